// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "json.hpp"
#include "pyrotime/cwgan.hpp"
#include "pyrotime/evalmetrics.hpp"
#include "pyrotime/farr.hpp"
#include "pyrotime/firesim.hpp"
#include "pyrotime/geodata.hpp"
#include "pyrotime/posterior.hpp"
#include "pyrotime/raster_ops.hpp"
#include "pyrotime/rng.hpp"
#include "pyrotime/synthmeas.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace pyrotime;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string read_all(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path work_root() {
  static const fs::path root = [] {
    const fs::path p = fs::temp_directory_path() / "pyrotime_acceptance";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

std::string encode_normalized(const NormalizedField& f) {
  std::vector<float> v(f.values().begin(), f.values().end());
  return encode_farr({f.spec(), farr_units::kNormalized, 1.0}, v);
}

// ---------------------------------------------------------------------------
// 1. Eikonal accuracy

Outcome eikonal_accuracy() {
  const int n = 128;
  firesim::SpreadConfig cfg;
  cfg.spec = GridSpec::square(n, 60.0);
  cfg.ignitions = {{n / 2, n / 2, 0.0}};
  cfg.base_ros = 1.0;
  cfg.duration_h = 1e6;
  const auto t0 = Clock::now();
  const ArrivalField u = firesim::solve_arrival(cfg, firesim::RosModel{});
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double r = std::hypot(i - n / 2, j - n / 2);
      if (r <= 5.0) continue;
      const double exact = r * 60.0 / 1.0 / 3600.0;
      worst = std::max(worst, std::abs(u(i, j) - exact) / exact);
    }
  return {worst <= 0.08 && elapsed < 5.0,
          "max relative error " + fmt("%.4f", worst) + " (<= 0.08), runtime " + fmt("%.2f s", elapsed) +
              " (< 5 s)"};
}

// ---------------------------------------------------------------------------
// 2. Anisotropic oracle

Outcome anisotropic_oracle() {
  const firesim::Wind wind{5.0, 90.0};
  const firesim::RosModel model;
  const int n = 64, c = n / 2;
  firesim::SpreadConfig cfg;
  cfg.spec = GridSpec::square(n, 60.0);
  cfg.ignitions = {{c, c, 0.0}};
  cfg.base_ros = model.base_ros;
  cfg.wind = wind;
  cfg.duration_h = 1e6;
  const ArrivalField u = firesim::solve_arrival(cfg, model);
  const auto oracle = testing::dijkstra16(4 * n, 4 * n, 15.0, 4 * c, 4 * c, model, wind);
  auto ref = [&](int i, int j) { return oracle[static_cast<std::size_t>(4 * j) * 4 * n + 4 * i]; };
  double head = 0, back = 0, flank = 0;
  auto rel = [&](int i, int j) { return std::abs(u(i, j) - ref(i, j)) / ref(i, j); };
  for (int k = 2; k < c - 1; ++k) {
    head = std::max(head, rel(c + k, c));
    back = std::max(back, rel(c - k, c));
    flank = std::max({flank, rel(c, c - k), rel(c, c + k)});
  }
  const bool ok = head <= 0.10 && back <= 0.10 && flank <= 0.10;
  return {ok, "max relative error head " + fmt("%.4f", head) + ", flank " + fmt("%.4f", flank) + ", back " +
                  fmt("%.4f", back) + " (<= 0.10)"};
}

// ---------------------------------------------------------------------------
// 3. Measurement operator

struct MeasureArtifacts {
  std::string measurement, target;
};

MeasureArtifacts golden_measure() {
  const ArrivalField f = testing::radial_field();
  const auto p = synthmeas::MeasurementParams{}.scaled_for(f.spec());
  const auto r = synthmeas::measure(f, p, 42);
  return {encode_normalized(r.measurement), encode_normalized(r.target)};
}

MeasureArtifacts g_measure_first;

Outcome measurement_operator() {
  const fs::path dir(PYROTIME_TEST_DATA);
  g_measure_first = golden_measure();
  const bool golden = g_measure_first.measurement == read_all(dir / "measure_seed42_meas.farr") &&
                      g_measure_first.target == read_all(dir / "measure_seed42_target.farr");

  ArrivalField f(GridSpec::square(200, 375.0));
  Rng rng(2024);
  for (double& v : f.values()) v = rng.uniform(0.0, 48.0);
  synthmeas::MeasureTrace tr;
  synthmeas::measure(f, synthmeas::MeasurementParams{}, 777, &tr);
  std::size_t in = 0, kept = 0;
  for (std::size_t k = 0; k < tr.survivors.size(); ++k) {
    in += tr.interval_pixels[k];
    kept += tr.survivors[k];
  }
  const double frac = static_cast<double>(kept) / static_cast<double>(in);

  bool exact = true;
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ArrivalField base = testing::radial_field(96, 60.0, 0.012, 70.0);
    synthmeas::MeasureTrace t;
    synthmeas::measure(base, synthmeas::MeasurementParams{}.scaled_for(base.spec()), seed, &t);
    for (double v : t.coarse_measurement.values()) {
      if (is_background(v)) continue;
      ++checked;
      exact = exact && std::find(t.times_h.begin(), t.times_h.end(), v) != t.times_h.end();
    }
  }
  const bool ok = golden && in >= 10000 && std::abs(frac - 0.5) <= 0.02 && exact && checked > 0;
  return {ok, std::string("golden ") + (golden ? "byte-exact" : "MISMATCH") + ", survivor fraction " +
                  fmt("%.4f", frac) + " over " + std::to_string(in) + " pixels (0.50 +/- 0.02), " +
                  std::to_string(checked) + " pre-shift values " + (exact ? "all" : "NOT all") +
                  " equal a drawn overpass time"};
}

// ---------------------------------------------------------------------------
// 4. Metrics oracle

Outcome metrics_oracle() {
  Rng rng(4040);
  int matched = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const int nx = 2 + static_cast<int>(rng.below(15)), ny = 2 + static_cast<int>(rng.below(15));
    const GridSpec g{nx, ny, 60.0, 0.0, 0.0};
    std::vector<int> p(g.pixel_count()), t(g.pixel_count());
    const double pp = rng.uniform(), pt = rng.uniform();
    for (auto& v : p) v = rng.bernoulli(pp);
    for (auto& v : t) v = rng.bernoulli(pt);
    const auto want = testing::brute_confusion(p, t);
    const auto got = evalmetrics::confusion(BurnMask(g, std::vector<std::uint8_t>(p.begin(), p.end())),
                                            BurnMask(g, std::vector<std::uint8_t>(t.begin(), t.end())));
    matched += got.a == want.a && got.b == want.b && got.c == want.c;
  }
  const auto s = evalmetrics::scores({2, 1, 1, 16});
  const bool spot = s.sc && s.pod && s.far && std::abs(*s.sc - 2.0 / 3.0) < 1e-15 &&
                    std::abs(*s.pod - 2.0 / 3.0) < 1e-15 && std::abs(*s.far - 1.0 / 3.0) < 1e-15;
  return {matched == 25 && spot, std::to_string(matched) + "/25 random cases match brute force; A=2,B=1,C=1 gives SC " +
                                     fmt("%.6f", s.sc.value_or(-1)) + ", POD " + fmt("%.6f", s.pod.value_or(-1)) +
                                     ", FAR " + fmt("%.6f", s.far.value_or(-1))};
}

// ---------------------------------------------------------------------------
// 5. Gradient check

Outcome gradient_check() {
  cwgan::CriticConfig cfg;
  cfg.input_size = 16;
  double worst = 0.0;
  for (std::uint64_t probe = 0; probe < 3; ++probe) {
    cwgan::Critic critic(cfg, 500 + probe);
    Rng rng(600 + probe);
    nn::Tensor a({1, 1, 16, 16}), m({1, 1, 16, 16});
    for (double& v : a.data) v = rng.uniform();
    for (double& v : m.data) v = rng.bernoulli(0.3) ? rng.uniform(0.0, 0.9) : 1.0;
    worst = std::max(worst, cwgan::gradient_check(critic, a, m, 1e-4, 100, probe));
  }
  return {worst < 1e-3, "max relative error " + fmt("%.2e", worst) + " over 3 probes x 100 pixels (< 1e-3)"};
}

// ---------------------------------------------------------------------------
// 6. Toy cWGAN convergence

struct ToyArtifacts {
  std::vector<std::string> means;  // FARR bytes per validation case
  std::string checkpoint;
};

struct ToyResult {
  double first = 0, last = 0, sc = 0, seconds = 0;
  ToyArtifacts artifacts;
};

ToyResult run_toy(const fs::path& dir) {
  const auto t0 = Clock::now();
  const auto manifest = cwgan::build_disc_dataset(dir / "data", 500, 100, 16, 7);
  cwgan::GeneratorConfig g;
  g.input_size = 16;
  g.levels = 2;
  g.base_width = 8;
  g.dense_k = 8;
  g.dense_n = 4;
  g.latent_dim = 64;
  cwgan::CriticConfig c;
  c.input_size = 16;
  c.levels = 2;
  c.base_width = 8;
  c.dense_k = 8;
  c.dense_n = 4;
  cwgan::TrainConfig t;
  t.epochs = 80;
  t.batch_size = 16;
  t.critic_steps_per_gen_step = 5;
  t.learning_rate = 5e-4;
  t.gp_weight = 10.0;
  t.seed = 11;
  const auto res = cwgan::train(manifest, g, c, t, dir / "run");
  ToyResult out;
  out.first = res.log.front().mismatch;
  out.last = res.log.back().mismatch;
  out.artifacts.checkpoint = read_all(dir / "run" / "last.ckpt");

  cwgan::Generator gen = cwgan::load_generator(dir / "run" / "last.ckpt");
  evalmetrics::ConfusionRegions total;
  const double threshold = 0.75 * manifest.horizon_h;
  for (std::size_t k = 0; k < manifest.validation.size(); ++k) {
    const auto& rec = manifest.validation[k];
    const NormalizedField truth = load_normalized(manifest.root / rec.arrival);
    const NormalizedField meas = load_normalized(manifest.root / rec.measurement);
    const auto ens = posterior::sample_ensemble(gen, meas, 100, derive_seed(13, {k}));
    const auto summary = posterior::pixel_stats(ens, manifest.horizon_h);
    const auto r = evalmetrics::confusion(summary.mean, burn_mask(denormalize(truth, manifest.horizon_h), threshold),
                                          threshold);
    total.a += r.a;
    total.b += r.b;
    total.c += r.c;
    total.total += r.total;
    std::vector<float> v;
    for (double x : summary.mean.values()) v.push_back(is_background(x) ? 72.0f : static_cast<float>(x));
    out.artifacts.means.push_back(encode_farr({summary.mean.spec(), farr_units::kHours, 72.0}, v));
  }
  out.sc = evalmetrics::scores(total).sc.value_or(0.0);
  out.seconds = seconds_since(t0);
  return out;
}

ToyArtifacts g_toy_first;

Outcome toy_convergence() {
  const ToyResult r = run_toy(work_root() / "toy_a");
  g_toy_first = r.artifacts;
  const bool ok = r.last <= 0.5 * r.first && r.sc >= 0.9 && r.seconds <= 1800;
  return {ok, "validation mismatch " + fmt("%.4f", r.first) + " -> " + fmt("%.4f", r.last) + " (ratio " +
                  fmt("%.3f", r.last / r.first) + ", <= 0.5), K=100 ensemble-mean SC " + fmt("%.4f", r.sc) +
                  " (>= 0.9), " + fmt("%.0f s", r.seconds) + " (<= 1800 s)"};
}

// ---------------------------------------------------------------------------
// 7. Ensemble estimator

Outcome ensemble_estimator() {
  const GridSpec g = GridSpec::square(8, 60.0);
  const int nz = static_cast<int>(g.pixel_count());
  const posterior::Sampler stub = [](const std::vector<double>& z, const NormalizedField& m) {
    NormalizedField out(m.spec());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = std::clamp(0.5 + 0.1 * z[p], 0.0, 1.0);
    return out;
  };
  const NormalizedField meas(g);
  const auto s = posterior::pixel_stats(posterior::sample_ensemble(stub, nz, meas, 200, 71), 1.0);
  double sd = 0.0;
  for (double v : s.std_hours.values()) sd += v;
  sd /= static_cast<double>(s.std_hours.size());

  auto rms = [&](int k) {
    double sq = 0.0;
    std::size_t n = 0;
    for (int rep = 0; rep < 20; ++rep) {
      const auto e = posterior::sample_ensemble(
          stub, nz, meas, k, derive_seed(72, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(rep)}));
      const auto summary = posterior::pixel_stats(e, 1.0);
      for (double v : summary.mean.values()) {
        sq += (v - 0.5) * (v - 0.5);
        ++n;
      }
    }
    return std::sqrt(sq / static_cast<double>(n));
  };
  const double ratio = rms(400) / rms(200);
  const double target = 1.0 / std::sqrt(2.0);
  const bool ok = std::abs(sd - 0.1) <= 0.015 && std::abs(ratio - target) <= 0.2 * target;
  return {ok, "mean std at K=200 " + fmt("%.4f", sd) + " (0.1 +/- 15%), MC error ratio K=400/K=200 " +
                  fmt("%.4f", ratio) + " (0.7071 +/- 20%)"};
}

// ---------------------------------------------------------------------------
// 8. Ingestion

Outcome ingestion() {
  const GridSpec g = GridSpec::square(32, 60.0, 38.5, -121.0);
  const geodata::Timestamp day = geodata::parse_timestamp("2021-08-01");
  Rng rng(8080);
  int earliest_ok = 0, monotone_ok = 0, order_ok = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = static_cast<int>(rng.below(40));
    const int cells = 1 + static_cast<int>(rng.below(12));
    std::vector<std::pair<int, int>> pool;
    for (int c = 0; c < cells; ++c) pool.emplace_back(rng.below(32), rng.below(32));
    std::vector<geodata::AfDetection> dets;
    std::vector<int> cell_of;
    std::vector<double> hours_of;
    for (int k = 0; k < n; ++k) {
      const int c = static_cast<int>(rng.below(pool.size()));
      const auto [i, j] = pool[c];
      const LocalXY center = pixel_center(g, i, j);
      const LatLon ll = local_to_latlon(g, {center.east + rng.uniform(-20, 20), center.north + rng.uniform(-20, 20)});
      const long secs = static_cast<long>(rng.below(60 * 3600)) - 3600;
      dets.push_back({ll.lat, ll.lon, day + std::chrono::seconds(secs),
                      static_cast<geodata::Confidence>(rng.below(3))});
      cell_of.push_back(j * 32 + i);
      hours_of.push_back(secs / 3600.0);
    }
    const std::set<geodata::Confidence> high = {geodata::Confidence::high};
    const std::set<geodata::Confidence> both = {geodata::Confidence::high, geodata::Confidence::nominal};
    const auto fh = geodata::grid_detections(dets, g, day, high, 48.0);
    const auto fb = geodata::grid_detections(dets, g, day, both, 48.0);

    // Brute force: earliest in-window high detection per cell.
    std::vector<double> expect(g.pixel_count(), kBackground);
    for (int k = 0; k < n; ++k) {
      if (dets[k].confidence != geodata::Confidence::high) continue;
      if (hours_of[k] < 0.0 || hours_of[k] > 48.0) continue;
      expect[cell_of[k]] = std::min(expect[cell_of[k]], hours_of[k]);
    }
    bool same = true;
    for (std::size_t p = 0; p < expect.size(); ++p) {
      const double want = is_background(expect[p]) ? 1.0 : expect[p] / 72.0;
      same = same && std::abs(fh[p] - want) <= 1e-12;
    }
    earliest_ok += same;
    bool mono = true;
    for (std::size_t p = 0; p < fh.size(); ++p) mono = mono && (fh[p] >= 1.0 || fb[p] <= fh[p]);
    monotone_ok += mono;
    auto shuffled = dets;
    for (std::size_t k = shuffled.size(); k > 1; --k) std::swap(shuffled[k - 1], shuffled[rng.below(k)]);
    order_ok += geodata::grid_detections(shuffled, g, day, high, 48.0) == fh;
  }
  const bool ok = earliest_ok == 1000 && monotone_ok == 1000 && order_ok == 1000;
  return {ok, "earliest-wins " + std::to_string(earliest_ok) + "/1000, tier monotonicity " +
                  std::to_string(monotone_ok) + "/1000, order independence " + std::to_string(order_ok) + "/1000"};
}

// ---------------------------------------------------------------------------
// 9. End-to-end smoke through the CLI

struct E2eResult {
  bool ok = false;
  std::string detail;
  double seconds = 0;
};

int cli_run(const std::vector<std::string>& args, std::string& log) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) log += "'" + args.front() + "' exited " + std::to_string(code) + ": " + err.str();
  return code;
}

// Circle of the truth's burned area at time t, centered on its centroid.
void write_perimeter(const NormalizedField& truth, double horizon, double t, const fs::path& path) {
  const GridSpec& g = truth.spec();
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (truth(i, j) * horizon <= t && truth(i, j) < 1.0) {
        const LocalXY c = pixel_center(g, i, j);
        sx += c.east;
        sy += c.north;
        ++n;
      }
  n = std::max<std::size_t>(n, 1);
  const double r = std::max(g.resolution, std::sqrt(static_cast<double>(n) / std::numbers::pi) * g.resolution);
  geodata::PerimeterPolygon poly;
  poly.observed_time_h = t;
  std::vector<LatLon> ring;
  for (int k = 0; k < 32; ++k) {
    const double a = 2 * std::numbers::pi * k / 32;
    ring.push_back(local_to_latlon(g, {sx / n + r * std::cos(a), sy / n + r * std::sin(a)}));
  }
  ring.push_back(ring.front());
  poly.rings = {ring};
  std::ofstream(path) << geodata::perimeter_to_geojson(poly);
}

E2eResult run_e2e(const fs::path& dir) {
  E2eResult res;
  std::string log;
  const auto t0 = Clock::now();
  const std::string d = dir.string();
  bool ok = cli_run({"simulate", "--n", "4", "--seed", "7", "--grid", "64", "--base-ros", "0.01", "--out",
                     d + "/sims"},
                    log) == 0;
  ok = ok && cli_run({"dataset", "--sims", d + "/sims", "--out", d + "/data", "--n-train", "200", "--n-val", "50",
                      "--seed", "3"},
                     log) == 0;
  ok = ok && cli_run({"train", "--manifest", d + "/data", "--out", d + "/train", "--epochs", "5", "--batch", "16",
                      "--seed", "5", "--size", "64", "--levels", "4", "--base-width", "8", "--dense-k", "8"},
                     log) == 0;
  std::string meas, reported;
  if (ok) {
    const auto m = synthmeas::load_manifest(dir / "data");
    const auto& rec = m.validation.front();
    meas = (m.root / rec.measurement).string();
    const NormalizedField truth = load_normalized(m.root / rec.arrival);
    double first = 1.0;
    for (double v : truth.values()) first = std::min(first, v);
    reported = posterior::format_clock(first * m.horizon_h);
    write_perimeter(truth, m.horizon_h, std::min(m.horizon_h, first * m.horizon_h + 12.0), dir / "perimeter.geojson");
  }
  ok = ok && cli_run({"infer", "--checkpoint", d + "/train/last.ckpt", "--measurement-high", meas,
                      "--measurement-both", meas, "--k", "20", "--seed", "9", "--out", d + "/infer"},
                     log) == 0;
  ok = ok && cli_run({"eval", "--pred", d + "/infer/mean.farr", "--perimeter", d + "/perimeter.geojson",
                      "--reported-ignition", reported, "--out", d + "/eval"},
                     log) == 0;
  res.seconds = seconds_since(t0);
  ok = ok && cli_run({"plot", "--input", d + "/infer/mean.farr", d + "/infer/std.farr", d + "/eval/categories.farr",
                      "--out", d + "/plots"},
                     log) == 0;
  if (!ok) {
    res.detail = log;
    return res;
  }
  bool valid = false;
  std::string scores;
  try {
    const auto rep = evalmetrics::ScoreReport::from_json(read_all(dir / "eval" / "score_report.json"));
    auto in01 = [](const std::optional<double>& v) { return !v || (*v >= 0.0 && *v <= 1.0); };
    valid = in01(rep.scores.sc) && in01(rep.scores.pod) && in01(rep.scores.far) &&
            rep.regions.a + rep.regions.b + rep.regions.c <= rep.regions.total && rep.regions.total == 64 * 64 &&
            rep.ignition_error_min.has_value();
    scores = "SC " + fmt("%.3f", rep.scores.sc.value_or(NAN)) + ", POD " + fmt("%.3f", rep.scores.pod.value_or(NAN)) +
             ", FAR " + fmt("%.3f", rep.scores.far.value_or(NAN)) + ", ignition error " +
             std::to_string(rep.ignition_error_min.value_or(0)) + " min";
  } catch (const std::exception& e) {
    scores = std::string("invalid report: ") + e.what();
  }
  res.ok = valid && res.seconds < 600.0;
  res.detail = "all stages exit 0 in " + fmt("%.0f s", res.seconds) + " (< 600 s); report " +
               (valid ? "valid" : "INVALID") + " (" + scores + ")";
  return res;
}

Outcome end_to_end() {
  const auto r = run_e2e(work_root() / "e2e_a");
  return {r.ok, r.detail};
}

// ---------------------------------------------------------------------------
// 10. Determinism

std::map<std::string, std::string> farr_files(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".farr") {
      out[fs::relative(e.path(), root).string()] = read_all(e.path());
    }
  }
  return out;
}

Outcome determinism(const std::set<int>& ran) {
  if (!ran.count(3)) g_measure_first = golden_measure();
  const MeasureArtifacts m2 = golden_measure();
  const bool meas_same = m2.measurement == g_measure_first.measurement && m2.target == g_measure_first.target;

  if (!ran.count(6)) g_toy_first = run_toy(work_root() / "toy_a").artifacts;
  const ToyArtifacts t2 = run_toy(work_root() / "toy_b").artifacts;
  const auto toy_a = farr_files(work_root() / "toy_a"), toy_b = farr_files(work_root() / "toy_b");
  const bool toy_same = t2.means == g_toy_first.means && t2.checkpoint == g_toy_first.checkpoint && toy_a == toy_b;

  if (!ran.count(9)) run_e2e(work_root() / "e2e_a");
  run_e2e(work_root() / "e2e_b");
  const auto e2e_a = farr_files(work_root() / "e2e_a"), e2e_b = farr_files(work_root() / "e2e_b");
  const bool e2e_same = !e2e_a.empty() && e2e_a == e2e_b;

  return {meas_same && toy_same && e2e_same,
          std::string("measurement ") + (meas_same ? "identical" : "DIFFERS") + ", toy (" +
              std::to_string(toy_a.size() + t2.means.size()) + " rasters + checkpoint) " +
              (toy_same ? "identical" : "DIFFERS") + ", end-to-end (" + std::to_string(e2e_a.size()) +
              " rasters) " + (e2e_same ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int k = 1; k < argc; ++k) selected.insert(std::atoi(argv[k]));
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"eikonal accuracy", eikonal_accuracy},
      {"anisotropic oracle", anisotropic_oracle},
      {"measurement operator", measurement_operator},
      {"metrics oracle", metrics_oracle},
      {"critic gradient check", gradient_check},
      {"toy cWGAN convergence", toy_convergence},
      {"ensemble estimator", ensemble_estimator},
      {"ingestion rules", ingestion},
      {"end-to-end smoke", end_to_end},
      {"determinism", [&] { return determinism(selected); }},
  };
  int failed = 0;
  for (int id : selected) {
    if (id < 1 || id > static_cast<int>(criteria.size())) continue;
    const auto& [name, fn] = criteria[id - 1];
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
