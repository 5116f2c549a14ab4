#pragma once

#include <cstddef>
#include <type_traits>

#include "pyrotime/grid.hpp"

namespace pyrotime {

inline constexpr double kDefaultHorizonHours = 72.0;

/// Normalized values at or above this map back to background.
inline constexpr double kBackgroundThreshold = 1.0 - 1e-6;

/// Divides arrival hours by `horizon`; background becomes exactly 1.
/// Values above the horizon clamp to 1 and are tallied in `clamped`.
NormalizedField normalize(const ArrivalField& field, double horizon = kDefaultHorizonHours,
                          std::size_t* clamped = nullptr);

ArrivalField denormalize(const NormalizedField& field, double horizon = kDefaultHorizonHours);

BurnMask burn_mask(const ArrivalField& field, double t_hours);

// ---------------------------------------------------------------------------
// Resampling

/// Source index whose pixel center is nearest to target pixel `t`; exact
/// ties snap to the lower index.
int nearest_source_index(int t, double target_res, double source_res, int source_n);

/// Target grid with the same footprint at a new resolution; the pixel count
/// is rounded to the nearest integer.
GridSpec resampled_spec(const GridSpec& source, double target_resolution);

/// Throws std::invalid_argument when the two footprints differ by at least
/// one pixel of the coarser grid.
void check_same_footprint(const GridSpec& source, const GridSpec& target);

template <typename R>
R resample_to(const R& field, const GridSpec& target) {
  const GridSpec& src = field.spec();
  check_same_footprint(src, target);
  std::vector<int> col(target.nx), row(target.ny);
  for (int i = 0; i < target.nx; ++i)
    col[i] = nearest_source_index(i, target.resolution, src.resolution, src.nx);
  for (int j = 0; j < target.ny; ++j)
    row[j] = nearest_source_index(j, target.resolution, src.resolution, src.ny);
  std::vector<typename R::value_type> out(target.pixel_count());
  for (int j = 0; j < target.ny; ++j)
    for (int i = 0; i < target.nx; ++i)
      out[static_cast<std::size_t>(j) * target.nx + i] = field(col[i], row[j]);
  return R(target, std::move(out));
}

template <typename R>
R resample_nearest(const R& field, double target_resolution) {
  return resample_to(field, resampled_spec(field.spec(), target_resolution));
}

/// Central window of the requested size. With an odd remainder the window
/// sits one pixel toward the low-index side.
GridSpec cropped_spec(const GridSpec& source, int new_nx, int new_ny);

template <typename R>
R crop_center(const R& field, int new_nx, int new_ny) {
  GridSpec target = cropped_spec(field.spec(), new_nx, new_ny);
  const int oi = (field.nx() - new_nx) / 2;
  const int oj = (field.ny() - new_ny) / 2;
  std::vector<typename R::value_type> out(target.pixel_count());
  for (int j = 0; j < new_ny; ++j)
    for (int i = 0; i < new_nx; ++i)
      out[static_cast<std::size_t>(j) * new_nx + i] = field(oi + i, oj + j);
  return R(target, std::move(out));
}

// ---------------------------------------------------------------------------
// Geolocation on a local equirectangular tangent plane at the grid origin.

inline constexpr double kMetersPerDegreeLat = 111132.95;
inline constexpr double kMetersPerDegreeLonEquator = 111320.0;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

struct PixelIndex {
  int i = 0;
  int j = 0;
  friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
};

/// Meters east / north of the origin.
struct LocalXY {
  double east = 0.0;
  double north = 0.0;
};

double meters_per_degree_lon(double lat_deg);

LocalXY latlon_to_local(const GridSpec& spec, double lat, double lon);
LatLon local_to_latlon(const GridSpec& spec, LocalXY xy);

/// Pixel center of (i, j) in local meters.
LocalXY pixel_center(const GridSpec& spec, int i, int j);

LatLon pixel_to_latlon(const GridSpec& spec, int i, int j);

/// Throws std::out_of_range for points outside the grid.
PixelIndex latlon_to_pixel(const GridSpec& spec, double lat, double lon);

}  // namespace pyrotime
