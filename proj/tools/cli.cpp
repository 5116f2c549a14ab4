#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "plot.hpp"
#include "pyrotime/cwgan.hpp"
#include "pyrotime/errors.hpp"
#include "pyrotime/evalmetrics.hpp"
#include "pyrotime/farr.hpp"
#include "pyrotime/firesim.hpp"
#include "pyrotime/geodata.hpp"
#include "pyrotime/kernels.hpp"
#include "pyrotime/parallel.hpp"
#include "pyrotime/posterior.hpp"
#include "pyrotime/raster_ops.hpp"
#include "pyrotime/rng.hpp"
#include "pyrotime/synthmeas.hpp"

#ifndef PYROTIME_VERSION
#define PYROTIME_VERSION "0.0.0"
#endif

namespace pyrotime::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kSeedEnv = "PYROTIME_SEED";
constexpr const char* kProvenanceName = "provenance.jsonl";
#if defined(__clang__)
constexpr const char* kCompiler = "clang " __VERSION__;
#else
constexpr const char* kCompiler = "g++ " __VERSION__;
#endif

/// Bad flag value detected after CLI11 parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (s.empty() || s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("malformed " + what + " '" + s + "'");
  }
}

int to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("malformed " + what + " '" + s + "'");
  }
}

LatLon parse_center(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 2) throw UsageError("grid center must be 'lat,lon', got '" + text + "'");
  return {to_double(parts[0], "latitude"), to_double(parts[1], "longitude")};
}

/// "N" or "NXxNY".
GridSpec parse_grid(const std::string& text, double resolution, const LatLon& center) {
  const auto parts = split(text, 'x');
  GridSpec g;
  if (parts.size() == 1) {
    g.nx = g.ny = to_int(parts[0], "grid size");
  } else if (parts.size() == 2) {
    g.nx = to_int(parts[0], "grid size");
    g.ny = to_int(parts[1], "grid size");
  } else {
    throw UsageError("grid must be 'N' or 'NXxNY', got '" + text + "'");
  }
  g.resolution = resolution;
  g.origin_lat = center.lat;
  g.origin_lon = center.lon;
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return g;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  for (const auto& p : split(text, ',')) out.push_back(to_int(p, what));
  return out;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_now() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Effective parameters of a parsed subcommand: every option with its
/// value (given or default), excluding ones that cannot change results.
ordered_json effective_parameters(const CLI::App& sub) {
  ordered_json p = ordered_json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config" || name == "workers") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      p[name] = r.size() == 1 ? ordered_json(r.front()) : ordered_json(r);
    } else {
      p[name] = opt->get_default_str();
    }
  }
  return p;
}

ordered_json versions() {
  return {{"pyrotime", PYROTIME_VERSION},
          {"compiler", kCompiler},
          {"cxx_standard", static_cast<long>(__cplusplus)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION},
          {"kernels", kernels::isa_name(kernels::active_isa())}};
}

void append_provenance(const fs::path& dir, const std::string& command,
                       const std::vector<std::string>& args, const ordered_json& params,
                       std::optional<std::uint64_t> seed) {
  fs::create_directories(dir);
  ordered_json rec;
  rec["command"] = command;
  rec["argv"] = args;
  rec["config_hash"] = hex64(fnv1a64(params.dump()));
  rec["parameters"] = params;
  rec["seed"] = seed ? ordered_json(*seed) : ordered_json(nullptr);
  rec["versions"] = versions();
  rec["time_utc"] = utc_now();
  std::ofstream os(dir / kProvenanceName, std::ios::app);
  os << rec.dump() << '\n';
  if (!os) throw DataError("cannot write provenance in " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw DataError("cannot write " + path.string());
}

// ---------------------------------------------------------------------------
// Subcommand parameters

struct Common {
  std::uint64_t seed = 0;
  int workers = default_workers();
};

void add_seed(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Random seed")->envname(kSeedEnv)->capture_default_str();
}

void add_workers(CLI::App* sub, Common& c) {
  sub->add_option("--workers", c.workers, "Worker threads; results do not depend on it")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

struct SimulateArgs {
  Common common;
  int n = 20;
  fs::path out;
  std::string grid = "512";
  double resolution = 60.0;
  std::string center = "0,0";
  double duration = 48.0;
  double base_ros = 0.05;
  int refine = 2;
};

struct DatasetArgs {
  Common common;
  fs::path sims;
  fs::path out;
  int n_train = 1000;
  int n_val = 200;
  int grid = 0;
  int samples_per_sim = 500;
};

struct TrainArgs {
  Common common;
  fs::path manifest;
  fs::path out;
  int epochs = 200;
  int batch = 16;
  int size = 0;
  std::string resume;
  int levels = 4;
  int base_width = 16;
  int dense_k = 16;
  int dense_n = 4;
  int latent = 64;
  std::string critic_fc = "64,1";
  double lr = 1e-4;
  int critic_steps = 5;
  double gp_weight = 10.0;
  int checkpoint_every = 0;
};

struct InferArgs {
  Common common;
  fs::path checkpoint;
  fs::path high;
  std::string both;
  int k = posterior::kDefaultMembers;
  std::string weights = "0.2,0.8";
  fs::path out;
  double horizon = kDefaultHorizonHours;
};

struct IngestArgs {
  fs::path csv;
  std::string center;
  std::string grid = "512";
  double resolution = 60.0;
  std::string day;
  std::vector<std::string> tiers = {"high", "high+nominal"};
  double window = 48.0;
  double horizon = kDefaultHorizonHours;
  fs::path out;
};

struct EvalArgs {
  fs::path pred;
  fs::path perimeter;
  std::string reported;
  fs::path out;
  std::string case_id;
  double horizon = kDefaultHorizonHours;
};

struct PlotArgs {
  std::vector<fs::path> inputs;
  fs::path out;
  std::string kind = "auto";
  int scale = 0;
};

// ---------------------------------------------------------------------------
// Subcommand bodies

std::optional<std::uint64_t> do_simulate(const SimulateArgs& a, std::ostream& out) {
  if (a.n < 1) throw UsageError("--n must be >= 1");
  const GridSpec spec = parse_grid(a.grid, a.resolution, parse_center(a.center));
  auto configs = firesim::sample_training_configs(a.n, a.common.seed, spec, a.duration, a.base_ros);
  for (auto& c : configs) c.refine = a.refine;
  fs::create_directories(a.out);
  parallel_for(configs.size(), a.common.workers, [&](std::size_t k) {
    const auto& c = configs[k];
    const ArrivalField field = firesim::solve_arrival(c, firesim::RosModel{});
    char stem[32];
    std::snprintf(stem, sizeof stem, "sim_%04zu", k);
    save_arrival(a.out / (std::string(stem) + ".farr"), field);
    ordered_json side;
    side["index"] = k;
    side["seed"] = a.common.seed;
    side["grid"] = {{"nx", spec.nx}, {"ny", spec.ny}, {"resolution_m", spec.resolution},
                    {"origin_lat", spec.origin_lat}, {"origin_lon", spec.origin_lon}};
    side["wind"] = {{"speed_mps", c.wind.speed}, {"direction_deg", c.wind.direction_deg}};
    ordered_json ig = ordered_json::array();
    for (const auto& p : c.ignitions) ig.push_back({{"i", p.i}, {"j", p.j}, {"time_hours", p.time_h}});
    side["ignitions"] = ig;
    side["base_ros_mps"] = c.base_ros;
    side["duration_hours"] = c.duration_h;
    side["refine"] = c.refine;
    write_text(a.out / (std::string(stem) + ".json"), side.dump(2) + "\n");
  });
  out << "wrote " << a.n << " simulations to " << a.out.string() << "\n";
  return a.common.seed;
}

std::optional<std::uint64_t> do_dataset(const DatasetArgs& a, std::ostream& out) {
  if (!fs::is_directory(a.sims)) throw DataError("simulation directory not found: " + a.sims.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.sims)) {
    if (e.is_regular_file() && e.path().extension() == ".farr") files.push_back(e.path());
  }
  if (files.empty()) throw DataError("no .farr simulations in " + a.sims.string());
  std::sort(files.begin(), files.end());
  GridSpec spec = read_farr(files.front()).header.spec;
  if (a.grid > 0) spec = cropped_spec(spec, a.grid, a.grid);
  synthmeas::AugmentParams aug = synthmeas::AugmentParams{}.scaled_for(spec);
  aug.samples_per_sim = a.samples_per_sim;
  const auto meas = synthmeas::MeasurementParams{}.scaled_for(spec);
  const auto m = synthmeas::build_dataset(a.sims, a.out, aug, meas, a.n_train, a.n_val, a.common.seed,
                                          a.common.workers, a.grid);
  out << "wrote " << m.train.size() << " training and " << m.validation.size()
      << " validation pairs (" << describe(m.spec) << ") to " << a.out.string() << "\n";
  return a.common.seed;
}

std::optional<std::uint64_t> do_train(const TrainArgs& a, std::ostream& out) {
  const auto manifest = synthmeas::load_manifest(a.manifest);
  const int size = a.size > 0 ? a.size : manifest.spec.nx;
  cwgan::GeneratorConfig g;
  g.input_size = size;
  g.levels = a.levels;
  g.base_width = a.base_width;
  g.dense_k = a.dense_k;
  g.dense_n = a.dense_n;
  g.latent_dim = a.latent;
  cwgan::CriticConfig c;
  c.input_size = size;
  c.levels = a.levels;
  c.base_width = a.base_width;
  c.dense_k = a.dense_k;
  c.dense_n = a.dense_n;
  c.fc_widths = parse_int_list(a.critic_fc, "critic fc widths");
  cwgan::TrainConfig t;
  t.epochs = a.epochs;
  t.batch_size = a.batch;
  t.learning_rate = a.lr;
  t.critic_steps_per_gen_step = a.critic_steps;
  t.gp_weight = a.gp_weight;
  t.seed = a.common.seed;
  t.checkpoint_every = a.checkpoint_every;
  std::optional<fs::path> resume;
  if (!a.resume.empty()) resume = fs::path(a.resume);
  cwgan::train(manifest, g, c, t, a.out, resume,
               [&](const cwgan::EpochLog& e) { out << e.to_json() << std::endl; });
  out << "checkpoint: " << (a.out / "last.ckpt").string() << "\n";
  return a.common.seed;
}

std::optional<std::uint64_t> do_infer(const InferArgs& a, std::ostream& out) {
  if (a.k < 1) throw UsageError("--k must be >= 1");
  cwgan::Generator gen = cwgan::load_generator(a.checkpoint);
  const NormalizedField high = load_normalized(a.high);
  const int s = gen.config().input_size;
  if (high.nx() != s || high.ny() != s) {
    throw DataError("measurement grid " + describe(high.spec()) + " does not match the generator input size " +
                    std::to_string(s));
  }
  posterior::Ensemble ens;
  std::vector<double> weights;
  if (a.both.empty()) {
    ens = posterior::sample_ensemble(gen, high, a.k, derive_seed(a.common.seed, {0}), a.common.workers);
    ens.source = "high";
    weights = {1.0};
  } else {
    const auto parts = split(a.weights, ',');
    if (parts.size() != 2) throw UsageError("--weights must be 'w_high,w_both'");
    weights = {to_double(parts[0], "weight"), to_double(parts[1], "weight")};
    const NormalizedField both = load_normalized(a.both);
    if (!both.spec().same_shape(high.spec())) throw DataError("tier measurements are on different grids");
    auto eh = posterior::sample_ensemble(gen, high, a.k, derive_seed(a.common.seed, {0}), a.common.workers);
    auto eb = posterior::sample_ensemble(gen, both, a.k, derive_seed(a.common.seed, {1}), a.common.workers);
    eh.source = "high";
    eb.source = "high+nominal";
    try {
      ens = posterior::merge_weighted(eh, eb, weights[0], weights[1]);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  const auto summary = posterior::pixel_stats(ens, a.horizon);
  fs::create_directories(a.out);
  save_arrival(a.out / "mean.farr", summary.mean, a.horizon);
  save_hours(a.out / "std.farr", summary.std_hours);
  ordered_json j;
  j["checkpoint"] = a.checkpoint.string();
  j["k"] = a.k;
  j["members"] = summary.n_members;
  j["tiers"] = a.both.empty() ? ordered_json::array({"high"}) : ordered_json::array({"high", "high+nominal"});
  j["weights"] = weights;
  j["seed"] = a.common.seed;
  j["horizon_hours"] = a.horizon;
  j["ignition_estimate"] =
      summary.ignition_estimate_h ? ordered_json(posterior::ignition_time(summary)) : ordered_json(nullptr);
  j["ignition_estimate_hours"] =
      summary.ignition_estimate_h ? ordered_json(*summary.ignition_estimate_h) : ordered_json(nullptr);
  write_text(a.out / "summary.json", j.dump(2) + "\n");
  out << "ensemble of " << summary.n_members << " members; ignition estimate "
      << (summary.ignition_estimate_h ? posterior::ignition_time(summary) : std::string("n/a")) << "\n";
  return a.common.seed;
}

std::optional<std::uint64_t> do_ingest(const IngestArgs& a, std::ostream& out) {
  const GridSpec spec = parse_grid(a.grid, a.resolution, parse_center(a.center));
  geodata::Timestamp day;
  try {
    day = geodata::parse_timestamp(a.day);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!(a.window >= 0.0 && a.window <= a.horizon)) throw UsageError("--window-hours must lie in [0, horizon]");
  std::vector<std::pair<std::string, std::set<geodata::Confidence>>> tier_sets;
  for (const auto& t : a.tiers) {
    try {
      tier_sets.emplace_back(t, geodata::parse_tiers(t));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  const auto dets = geodata::parse_af_csv(a.csv);
  fs::create_directories(a.out);
  ordered_json stats = ordered_json::object();
  for (const auto& [name, tiers] : tier_sets) {
    geodata::GriddingStats st;
    const auto field = geodata::grid_detections(dets, spec, day, tiers, a.window, a.horizon, &st);
    std::string label;
    for (auto it = tiers.rbegin(); it != tiers.rend(); ++it) {
      label += (label.empty() ? "" : "+") + geodata::to_string(*it);
    }
    save_normalized(a.out / ("measurement_" + label + ".farr"), field);
    stats[label] = {{"used", st.used},
                    {"outside_domain", st.outside_domain},
                    {"outside_window", st.outside_window},
                    {"other_tier", st.other_tier}};
    out << label << ": " << st.used << " detections gridded, " << st.outside_domain << " outside the domain, "
        << st.outside_window << " outside the window\n";
  }
  write_text(a.out / "ingest_stats.json", stats.dump(2) + "\n");
  return std::nullopt;
}

std::optional<std::uint64_t> do_eval(const EvalArgs& a, std::ostream& out) {
  const ArrivalField pred = load_arrival(a.pred);
  const auto perimeter = geodata::load_perimeter(a.perimeter);
  std::optional<std::string> reported;
  if (!a.reported.empty()) {
    try {
      evalmetrics::parse_clock_minutes(a.reported);
    } catch (const ParseError& e) {
      throw UsageError("--reported-ignition: expected HH:MM, got '" + a.reported + "'");
    }
    reported = a.reported;
  }
  Raster<std::uint8_t> cats;
  const std::string id = a.case_id.empty() ? a.pred.stem().string() : a.case_id;
  const auto report = evalmetrics::evaluate_case(pred, perimeter, reported, id, a.horizon, &cats);
  fs::create_directories(a.out);
  write_text(a.out / "score_report.json", report.to_json() + "\n");
  save_categories(a.out / "categories.farr", cats);
  auto fmt = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return std::string(buf);
  };
  out << "SC " << fmt(report.scores.sc) << "  POD " << fmt(report.scores.pod) << "  FAR "
      << fmt(report.scores.far);
  if (report.ignition_error_min) out << "  ignition error " << *report.ignition_error_min << " min";
  out << "\n";
  return std::nullopt;
}

std::optional<std::uint64_t> do_plot(const PlotArgs& a, std::ostream& out) {
  std::optional<plot::Kind> forced;
  if (a.kind != "auto") {
    try {
      forced = plot::parse_kind(a.kind);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  for (const auto& in : a.inputs) {
    if (!fs::exists(in)) throw DataError("input not found: " + in.string());
  }
  fs::create_directories(a.out);
  for (const auto& in : a.inputs) {
    const FarrRaster r = read_farr(in);
    const plot::Kind kind = forced ? *forced : plot::infer_kind(r.header);
    const fs::path dest = a.out / (in.stem().string() + ".ppm");
    plot::write_ppm(dest, plot::render(r, kind, a.scale));
    out << plot::to_string(kind) << " image: " << dest.string() << "\n";
  }
  return std::nullopt;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wildfire arrival-time simulation, training, inference and scoring toolkit", "pyrotime"};
  app.set_version_flag("--version", PYROTIME_VERSION);
  app.set_config("--config", "", "TOML config file; [subcommand] sections set flag defaults");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1, 1);
  app.fallthrough(false);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Synthetic fire arrival-time simulations");
  s->add_option("--n", sim.n, "Number of simulations")->capture_default_str();
  add_seed(s, sim.common);
  s->add_option("--out-dir,--out", sim.out, "Output directory")->required();
  s->add_option("--grid", sim.grid, "Grid size N or NXxNY")->capture_default_str();
  s->add_option("--resolution", sim.resolution, "Pixel size in meters")->capture_default_str();
  s->add_option("--grid-center", sim.center, "Center pixel 'lat,lon'")->capture_default_str();
  s->add_option("--duration", sim.duration, "Simulated hours")->capture_default_str();
  s->add_option("--base-ros", sim.base_ros, "Calm-air spread rate (m/s)")->capture_default_str();
  s->add_option("--refine", sim.refine, "Solver refinement factor")->capture_default_str();
  add_workers(s, sim.common);

  DatasetArgs ds;
  auto* d = app.add_subcommand("dataset", "Augmented (arrival, measurement) training pairs");
  d->add_option("--sims", ds.sims, "Directory of simulation rasters")->required();
  d->add_option("--out", ds.out, "Output directory")->required();
  d->add_option("--n-train", ds.n_train, "Training pairs")->capture_default_str();
  d->add_option("--n-val", ds.n_val, "Validation pairs")->capture_default_str();
  add_seed(d, ds.common);
  d->add_option("--grid", ds.grid, "Crop simulations to the central N x N window (0 keeps them)")
      ->capture_default_str();
  d->add_option("--samples-per-sim", ds.samples_per_sim, "Augmentations per simulation")->capture_default_str();
  add_workers(d, ds.common);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the conditional generator");
  t->add_option("--manifest", tr.manifest, "Dataset directory or manifest.json")->required();
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_option("--epochs", tr.epochs)->capture_default_str();
  t->add_option("--batch", tr.batch)->capture_default_str();
  add_seed(t, tr.common);
  t->add_option("--size", tr.size, "Network input size (0: the dataset grid)")->capture_default_str();
  t->add_option("--resume", tr.resume, "Checkpoint to continue from");
  t->add_option("--levels", tr.levels)->capture_default_str();
  t->add_option("--base-width", tr.base_width)->capture_default_str();
  t->add_option("--dense-k", tr.dense_k)->capture_default_str();
  t->add_option("--dense-n", tr.dense_n)->capture_default_str();
  t->add_option("--latent", tr.latent)->capture_default_str();
  t->add_option("--critic-fc", tr.critic_fc, "Critic dense widths, comma separated")->capture_default_str();
  t->add_option("--lr", tr.lr)->capture_default_str();
  t->add_option("--critic-steps", tr.critic_steps, "Critic steps per generator step")->capture_default_str();
  t->add_option("--gp-weight", tr.gp_weight)->capture_default_str();
  t->add_option("--checkpoint-every", tr.checkpoint_every)->capture_default_str();

  InferArgs inf;
  auto* f = app.add_subcommand("infer", "Posterior ensemble from measurements");
  f->add_option("--checkpoint", inf.checkpoint)->required();
  f->add_option("--measurement-high", inf.high)->required();
  f->add_option("--measurement-both", inf.both);
  f->add_option("--k", inf.k, "Members per tier")->capture_default_str();
  f->add_option("--weights", inf.weights, "Tier weights 'w_high,w_both'")->capture_default_str();
  add_seed(f, inf.common);
  f->add_option("--out", inf.out)->required();
  f->add_option("--horizon", inf.horizon)->capture_default_str();
  add_workers(f, inf.common);

  IngestArgs ing;
  auto* g = app.add_subcommand("ingest", "Grid active-fire detections into measurements");
  g->add_option("--af-csv", ing.csv)->required();
  g->add_option("--grid-center", ing.center, "Center pixel 'lat,lon'")->required();
  g->add_option("--grid", ing.grid, "Grid size N or NXxNY")->capture_default_str();
  g->add_option("--resolution", ing.resolution)->capture_default_str();
  g->add_option("--ignition-day", ing.day, "YYYY-MM-DD (00:00 UTC)")->required();
  g->add_option("--tiers", ing.tiers, "Tier sets, e.g. high and high+nominal")->capture_default_str();
  g->add_option("--window-hours", ing.window)->capture_default_str();
  g->add_option("--horizon", ing.horizon)->capture_default_str();
  g->add_option("--out", ing.out)->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a predicted arrival field against a perimeter");
  e->add_option("--pred", ev.pred)->required();
  e->add_option("--perimeter", ev.perimeter)->required();
  e->add_option("--reported-ignition", ev.reported, "HH:MM since the start of the ignition day");
  e->add_option("--out", ev.out)->required();
  e->add_option("--case-id", ev.case_id);
  e->add_option("--horizon", ev.horizon)->capture_default_str();

  PlotArgs pl;
  auto* p = app.add_subcommand("plot", "Render rasters as PPM images");
  p->add_option("--input", pl.inputs, "FARR rasters")->required();
  p->add_option("--out", pl.out)->required();
  p->add_option("--kind", pl.kind, "auto, arrival, measurement, std or category")->capture_default_str();
  p->add_option("--scale", pl.scale, "Image pixels per raster pixel (0: automatic)")->capture_default_str();

  if (args.empty()) {
    err << app.help();
    return kExitUsage;
  }
  std::vector<std::string> argv_store = {"pyrotime"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << PYROTIME_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  const std::map<std::string, std::pair<std::function<std::optional<std::uint64_t>()>, fs::path>> table = {
      {"simulate", {[&] { return do_simulate(sim, out); }, sim.out}},
      {"dataset", {[&] { return do_dataset(ds, out); }, ds.out}},
      {"train", {[&] { return do_train(tr, out); }, tr.out}},
      {"infer", {[&] { return do_infer(inf, out); }, inf.out}},
      {"ingest", {[&] { return do_ingest(ing, out); }, ing.out}},
      {"eval", {[&] { return do_eval(ev, out); }, ev.out}},
      {"plot", {[&] { return do_plot(pl, out); }, pl.out}},
  };
  try {
    const auto& [fn, dir] = table.at(name);
    const auto seed = fn();
    append_provenance(dir, name, args, effective_parameters(*sub), seed);
    return kExitOk;
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitData;
  }
}

}  // namespace pyrotime::cli
