#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pyrotime/grid.hpp"

namespace pyrotime::synthmeas {

/// Reference domain extent for the spatial parameters below (512 x 60 m).
inline constexpr double kReferenceExtentM = 30720.0;

struct MeasurementParams {
  int n_obs = 4;
  double obs_window_lo_h = 2.0;
  double obs_window_hi_h = 48.0;
  double lookback_lo_h = 6.0;
  double lookback_hi_h = 12.0;
  double mask_keep_fraction = 0.5;
  int n_occlusions = 3;
  double occlusion_size_m = 3000.0;
  double day_shift_lo_h = 0.0;
  double day_shift_hi_h = 24.0;
  double sensor_resolution_m = 375.0;
  double horizon_h = 72.0;

  void validate() const;

  /// Occlusion patch size shrunk in proportion to the domain extent of
  /// `spec`; grids at least as large as the reference keep the defaults.
  MeasurementParams scaled_for(const GridSpec& spec) const;
};

struct AugmentParams {
  double rotation_lo_deg = 0.0;
  double rotation_hi_deg = 360.0;
  double translation_box_m = 9000.0;  // side of the square centered box
  int samples_per_sim = 500;

  void validate(const GridSpec& spec) const;
  AugmentParams scaled_for(const GridSpec& spec) const;
};

/// Rotates about the grid center (clockwise on the map, inverse-mapped
/// nearest neighbor) and then shifts by whole pixels rounded from meters
/// (east, north). Vacated and out-of-source pixels become background.
/// Throws std::invalid_argument when the shift leaves the translation box.
ArrivalField augment(const ArrivalField& field, double rotation_deg, double dx_m, double dy_m,
                     double translation_box_m);

/// Random draws and intermediate rasters of one measure() call.
struct MeasureTrace {
  std::vector<double> times_h;     // sorted overpass times
  std::vector<double> lookback_h;  // per overpass
  std::vector<std::size_t> interval_pixels;  // in-interval pixels per copy, before masking
  std::vector<std::size_t> survivors;        // of those, kept by the knowledge mask
  std::vector<std::array<double, 2>> occlusion_centers_m;  // (east, south) from the NW corner
  double day_shift_h = 0.0;
  ArrivalField coarse_arrival;      // sensor grid, unshifted
  ArrivalField coarse_measurement;  // sensor grid, after occlusion, unshifted
};

struct MeasureResult {
  ArrivalField shifted;         // native grid, hours, day shift applied
  NormalizedField target;       // shifted / horizon
  NormalizedField measurement;  // native grid
};

/// Synthetic satellite measurement of a native-resolution arrival field.
/// All draws come from one stream seeded by `seed`, in this order: overpass
/// times, lookbacks, the knowledge mask of each copy (row-major over the
/// sensor grid), occlusion centers (east then south), day shift.
MeasureResult measure(const ArrivalField& field, const MeasurementParams& params, std::uint64_t seed,
                      MeasureTrace* trace = nullptr);

struct ManifestRecord {
  std::string arrival;      // relative to the manifest directory
  std::string measurement;  // relative to the manifest directory
  std::uint64_t seed = 0;
  int sim = 0;              // index into DatasetManifest::sims
  double rotation_deg = 0.0;
  double dx_m = 0.0;
  double dy_m = 0.0;
};

struct DatasetManifest {
  GridSpec spec;
  std::uint64_t seed = 0;
  double horizon_h = 72.0;
  std::vector<std::string> sims;
  std::vector<int> validation_sims;
  std::vector<ManifestRecord> train;
  std::vector<ManifestRecord> validation;
  std::filesystem::path root;  // directory holding the manifest; not serialized

  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text, const std::filesystem::path& root);
};

inline constexpr const char* kManifestName = "manifest.json";

/// Which of `n_sims` simulations are held out for validation, spaced evenly.
std::vector<int> validation_sims(int n_sims, int n_train, int n_val);

/// Augments and measures simulations from `sim_dir` (every *.farr, sorted by
/// name) into `out_dir`, writing normalized FARR pairs and manifest.json.
/// Output is independent of `workers`. A positive `crop` first cuts the
/// central crop x crop window out of every simulation.
DatasetManifest build_dataset(const std::filesystem::path& sim_dir,
                              const std::filesystem::path& out_dir, const AugmentParams& augment,
                              const MeasurementParams& measurement, int n_train, int n_val,
                              std::uint64_t seed, int workers = 1, int crop = 0);

/// Accepts the manifest file or the dataset directory holding it.
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace pyrotime::synthmeas
