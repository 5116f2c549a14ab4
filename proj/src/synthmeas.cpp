#include "pyrotime/synthmeas.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "pyrotime/errors.hpp"
#include "pyrotime/farr.hpp"
#include "pyrotime/parallel.hpp"
#include "pyrotime/raster_ops.hpp"
#include "pyrotime/rng.hpp"

namespace pyrotime::synthmeas {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

double extent_factor(const GridSpec& spec) {
  return std::min(1.0, std::min(spec.extent_x(), spec.extent_y()) / kReferenceExtentM);
}

// cos/sin of a clockwise rotation, exact on multiples of 90 degrees.
std::pair<double, double> rotation_cos_sin(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0) r += 360.0;
  if (r == 0.0) return {1.0, 0.0};
  if (r == 90.0) return {0.0, 1.0};
  if (r == 180.0) return {-1.0, 0.0};
  if (r == 270.0) return {0.0, -1.0};
  const double a = r * std::numbers::pi / 180.0;
  return {std::cos(a), std::sin(a)};
}

int round_half_down(double v) { return static_cast<int>(std::ceil(v - 0.5)); }

std::string record_stem(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", k);
  return buf;
}

json spec_json(const GridSpec& s) {
  return {{"nx", s.nx}, {"ny", s.ny}, {"resolution_m", s.resolution}, {"origin_lat", s.origin_lat},
          {"origin_lon", s.origin_lon}};
}

GridSpec spec_from_json(const json& j) {
  GridSpec s;
  s.nx = j.at("nx").get<int>();
  s.ny = j.at("ny").get<int>();
  s.resolution = j.at("resolution_m").get<double>();
  s.origin_lat = j.at("origin_lat").get<double>();
  s.origin_lon = j.at("origin_lon").get<double>();
  return s;
}

json record_json(const ManifestRecord& r) {
  return {{"arrival", r.arrival}, {"measurement", r.measurement}, {"seed", r.seed},
          {"sim", r.sim},         {"rotation_deg", r.rotation_deg}, {"dx_m", r.dx_m},
          {"dy_m", r.dy_m}};
}

ManifestRecord record_from_json(const json& j) {
  ManifestRecord r;
  r.arrival = j.at("arrival").get<std::string>();
  r.measurement = j.at("measurement").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.sim = j.at("sim").get<int>();
  r.rotation_deg = j.value("rotation_deg", 0.0);
  r.dx_m = j.value("dx_m", 0.0);
  r.dy_m = j.value("dy_m", 0.0);
  return r;
}

}  // namespace

void MeasurementParams::validate() const {
  require(n_obs >= 1, "MeasurementParams: n_obs must be >= 1");
  require(obs_window_lo_h >= 0.0 && obs_window_lo_h < obs_window_hi_h,
          "MeasurementParams: observation window must be a non-empty range of hours >= 0");
  require(lookback_lo_h > 0.0 && lookback_lo_h < lookback_hi_h,
          "MeasurementParams: lookback range must be a non-empty positive range");
  require(mask_keep_fraction > 0.0 && mask_keep_fraction <= 1.0,
          "MeasurementParams: mask_keep_fraction must be in (0, 1]");
  require(n_occlusions >= 0, "MeasurementParams: n_occlusions must be >= 0");
  require(occlusion_size_m >= 0.0, "MeasurementParams: occlusion_size_m must be >= 0");
  require(day_shift_lo_h >= 0.0 && day_shift_lo_h < day_shift_hi_h,
          "MeasurementParams: day shift must be a non-empty range of hours >= 0");
  require(sensor_resolution_m > 0.0, "MeasurementParams: sensor_resolution_m must be positive");
  require(horizon_h > 0.0, "MeasurementParams: horizon must be positive");
}

MeasurementParams MeasurementParams::scaled_for(const GridSpec& spec) const {
  MeasurementParams p = *this;
  p.occlusion_size_m *= extent_factor(spec);
  return p;
}

void AugmentParams::validate(const GridSpec& spec) const {
  require(rotation_lo_deg <= rotation_hi_deg, "AugmentParams: empty rotation range");
  require(translation_box_m >= 0.0, "AugmentParams: translation box must be >= 0");
  require(translation_box_m <= std::min(spec.extent_x(), spec.extent_y()),
          "AugmentParams: translation box does not fit inside the domain");
  require(samples_per_sim >= 1, "AugmentParams: samples_per_sim must be >= 1");
}

AugmentParams AugmentParams::scaled_for(const GridSpec& spec) const {
  AugmentParams p = *this;
  p.translation_box_m *= extent_factor(spec);
  return p;
}

ArrivalField augment(const ArrivalField& field, double rotation_deg, double dx_m, double dy_m,
                     double translation_box_m) {
  const GridSpec& spec = field.spec();
  const double half = 0.5 * translation_box_m;
  if (!(std::abs(dx_m) <= half && std::abs(dy_m) <= half)) {
    throw std::invalid_argument("augment: translation outside the translation box");
  }
  const auto [c, s] = rotation_cos_sin(rotation_deg);
  const double cx = 0.5 * (spec.nx - 1);
  const double cy = 0.5 * (spec.ny - 1);
  const int shift_e = static_cast<int>(std::lround(dx_m / spec.resolution));
  const int shift_n = static_cast<int>(std::lround(dy_m / spec.resolution));

  ArrivalField out(spec);
  for (int j = 0; j < spec.ny; ++j) {
    for (int i = 0; i < spec.nx; ++i) {
      // Undo the translation, then the rotation (x east, y south).
      const double x = (i - shift_e) - cx;
      const double y = (j + shift_n) - cy;
      const int si = round_half_down(cx + x * c + y * s);
      const int sj = round_half_down(cy - x * s + y * c);
      if (field.contains(si, sj)) out(i, j) = field(si, sj);
    }
  }
  return out;
}

MeasureResult measure(const ArrivalField& field, const MeasurementParams& params, std::uint64_t seed,
                      MeasureTrace* trace) {
  params.validate();
  const GridSpec& native = field.spec();
  if (native.resolution > params.sensor_resolution_m) {
    throw std::invalid_argument("measure: field resolution is coarser than the sensor resolution");
  }
  Rng rng(seed);

  // 1. sensor grid
  const ArrivalField coarse = resample_nearest(field, params.sensor_resolution_m);
  const GridSpec& cs = coarse.spec();

  // 2-3. overpass times and lookbacks
  std::vector<double> times(static_cast<std::size_t>(params.n_obs));
  for (double& t : times) t = rng.uniform(params.obs_window_lo_h, params.obs_window_hi_h);
  std::sort(times.begin(), times.end());
  std::vector<double> lookback(times.size());
  for (double& d : lookback) d = rng.uniform(params.lookback_lo_h, params.lookback_hi_h);

  // 4-7. masked copies combined by minimum
  ArrivalField meas(cs);
  std::vector<std::size_t> in_interval(times.size(), 0), survivors(times.size(), 0);
  for (std::size_t c = 0; c < times.size(); ++c) {
    const double hi = times[c];
    const double lo = std::max(hi - lookback[c], 0.0);
    for (std::size_t k = 0; k < coarse.size(); ++k) {
      const bool keep = rng.bernoulli(params.mask_keep_fraction);
      const double v = coarse[k];
      if (is_background(v) || !(v > lo && v <= hi)) continue;
      ++in_interval[c];
      if (!keep) continue;
      ++survivors[c];
      meas[k] = std::min(meas[k], hi);
    }
  }

  // 8. occlusion patches, clipped at the domain edge
  std::vector<std::array<double, 2>> centers;
  const double half = 0.5 * params.occlusion_size_m;
  for (int o = 0; o < params.n_occlusions; ++o) {
    const double ce = rng.uniform(0.0, cs.extent_x());
    const double cn = rng.uniform(0.0, cs.extent_y());
    centers.push_back({ce, cn});
    for (int j = 0; j < cs.ny; ++j) {
      const double y = (j + 0.5) * cs.resolution;
      if (std::abs(y - cn) > half) continue;
      for (int i = 0; i < cs.nx; ++i) {
        const double x = (i + 0.5) * cs.resolution;
        if (std::abs(x - ce) <= half) meas(i, j) = kBackground;
      }
    }
  }

  // 9. back to the native grid
  ArrivalField native_meas = resample_to(meas, native);

  // 10. ignition-day shift
  const double shift = rng.uniform(params.day_shift_lo_h, params.day_shift_hi_h);
  ArrivalField shifted = field;
  for (double& v : shifted.values())
    if (!is_background(v)) v += shift;
  for (double& v : native_meas.values())
    if (!is_background(v)) v += shift;

  // 11. normalization
  MeasureResult result{shifted, normalize(shifted, params.horizon_h),
                       normalize(native_meas, params.horizon_h)};
  if (trace) {
    trace->times_h = times;
    trace->lookback_h = lookback;
    trace->interval_pixels = in_interval;
    trace->survivors = survivors;
    trace->occlusion_centers_m = centers;
    trace->day_shift_h = shift;
    trace->coarse_arrival = coarse;
    trace->coarse_measurement = meas;
  }
  return result;
}

std::vector<int> validation_sims(int n_sims, int n_train, int n_val) {
  require(n_sims >= 1, "validation_sims: need at least one simulation");
  require(n_train >= 0 && n_val >= 0 && n_train + n_val > 0,
          "validation_sims: sample counts must be non-negative and not both zero");
  std::vector<int> out;
  if (n_val == 0) return out;
  if (n_train == 0) {
    for (int i = 0; i < n_sims; ++i) out.push_back(i);
    return out;
  }
  require(n_sims >= 2, "validation_sims: a train/validation split needs at least two simulations");
  const double share = static_cast<double>(n_val) / (n_train + n_val);
  const long v = std::clamp<long>(std::lround(n_sims * share), 1, n_sims - 1);
  for (long i = 0; i < n_sims; ++i) {
    if ((i + 1) * v / n_sims > i * v / n_sims) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::string DatasetManifest::to_json() const {
  json j;
  j["format"] = "pyrotime-dataset";
  j["version"] = 1;
  j["grid"] = spec_json(spec);
  j["seed"] = seed;
  j["horizon_h"] = horizon_h;
  j["sims"] = sims;
  j["validation_sims"] = validation_sims;
  j["train"] = json::array();
  for (const auto& r : train) j["train"].push_back(record_json(r));
  j["validation"] = json::array();
  for (const auto& r : validation) j["validation"].push_back(record_json(r));
  return j.dump(1) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text, const fs::path& root) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "pyrotime-dataset") {
      throw SchemaError("manifest: unexpected format tag");
    }
    DatasetManifest m;
    m.spec = spec_from_json(j.at("grid"));
    m.spec.validate();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.horizon_h = j.at("horizon_h").get<double>();
    m.sims = j.at("sims").get<std::vector<std::string>>();
    m.validation_sims = j.at("validation_sims").get<std::vector<int>>();
    for (const auto& r : j.at("train")) m.train.push_back(record_from_json(r));
    for (const auto& r : j.at("validation")) m.validation.push_back(record_from_json(r));
    m.root = root;
    return m;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("manifest: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("manifest: ") + e.what());
  }
}

DatasetManifest load_manifest(const fs::path& where) {
  const fs::path path = fs::is_directory(where) ? where / kManifestName : where;
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return DatasetManifest::from_json(ss.str(), path.parent_path());
}

DatasetManifest build_dataset(const fs::path& sim_dir, const fs::path& out_dir,
                              const AugmentParams& augment_params,
                              const MeasurementParams& measurement, int n_train, int n_val,
                              std::uint64_t seed, int workers, int crop) {
  measurement.validate();
  require(crop >= 0, "build_dataset: crop must be >= 0");
  if (!fs::is_directory(sim_dir)) throw DataError("simulation directory not found: " + sim_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(sim_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".farr") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  require(!files.empty(), "build_dataset: simulation directory holds no .farr rasters");

  std::vector<ArrivalField> sims;
  for (const auto& f : files) {
    ArrivalField a = load_arrival(f);
    sims.push_back(crop > 0 ? crop_center(a, crop, crop) : std::move(a));
  }
  const GridSpec spec = sims.front().spec();
  for (const auto& s : sims) {
    if (s.spec() != spec) throw DataError("build_dataset: simulations do not share one grid");
  }
  augment_params.validate(spec);

  const int n_sims = static_cast<int>(sims.size());
  const std::vector<int> val = validation_sims(n_sims, n_train, n_val);
  std::vector<int> train_ids;
  for (int i = 0; i < n_sims; ++i)
    if (!std::binary_search(val.begin(), val.end(), i)) train_ids.push_back(i);
  const auto cap = [&](std::size_t sims_in_split) {
    return static_cast<long>(sims_in_split) * augment_params.samples_per_sim;
  };
  if (n_train > cap(train_ids.size()) || n_val > cap(val.size())) {
    throw std::invalid_argument("build_dataset: not enough simulations for the requested totals");
  }

  DatasetManifest m;
  m.spec = spec;
  m.seed = seed;
  m.horizon_h = measurement.horizon_h;
  for (const auto& f : files) m.sims.push_back(f.filename().string());
  m.validation_sims = val;
  m.root = out_dir;

  struct Job {
    int split;  // 0 train, 1 validation
    std::size_t k;
    int sim;
  };
  std::vector<Job> jobs;
  for (int k = 0; k < n_train; ++k) jobs.push_back({0, static_cast<std::size_t>(k), train_ids[k % train_ids.size()]});
  for (int k = 0; k < n_val; ++k) jobs.push_back({1, static_cast<std::size_t>(k), val[k % val.size()]});

  fs::create_directories(out_dir / "train");
  fs::create_directories(out_dir / "validation");
  std::vector<ManifestRecord> records(jobs.size());
  const double half = 0.5 * augment_params.translation_box_m;
  parallel_for(jobs.size(), workers, [&](std::size_t q) {
    const Job& job = jobs[q];
    ManifestRecord r;
    r.sim = job.sim;
    r.seed = derive_seed(seed, {static_cast<std::uint64_t>(job.split), job.k});
    Rng rng(r.seed);
    r.rotation_deg = rng.uniform(augment_params.rotation_lo_deg, augment_params.rotation_hi_deg);
    r.dx_m = rng.uniform(-half, half);
    r.dy_m = rng.uniform(-half, half);
    const ArrivalField aug =
        augment(sims[job.sim], r.rotation_deg, r.dx_m, r.dy_m, augment_params.translation_box_m);
    const MeasureResult res = measure(aug, measurement, derive_seed(r.seed, {1}));
    const std::string dir = job.split == 0 ? "train" : "validation";
    const std::string stem = record_stem(job.k);
    r.arrival = dir + "/" + stem + "_arrival.farr";
    r.measurement = dir + "/" + stem + "_meas.farr";
    save_normalized(out_dir / r.arrival, res.target);
    save_normalized(out_dir / r.measurement, res.measurement);
    records[q] = r;
  });
  for (std::size_t q = 0; q < jobs.size(); ++q) {
    (jobs[q].split == 0 ? m.train : m.validation).push_back(records[q]);
  }

  std::ofstream os(out_dir / kManifestName);
  os << m.to_json();
  if (!os) throw DataError("cannot write manifest in " + out_dir.string());
  return m;
}

}  // namespace pyrotime::synthmeas
