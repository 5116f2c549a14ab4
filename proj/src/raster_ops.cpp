#include "pyrotime/raster_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace pyrotime {

void GridSpec::validate() const {
  if (nx < 8 || ny < 8) {
    throw std::invalid_argument("grid must be at least 8x8, got " + describe(*this));
  }
  if (!(resolution > 0.0) || !std::isfinite(resolution)) {
    throw std::invalid_argument("grid resolution must be positive");
  }
  if (!(std::abs(origin_lat) < 85.0) || !std::isfinite(origin_lon)) {
    throw std::invalid_argument("grid origin latitude must be within (-85, 85)");
  }
}

std::string describe(const GridSpec& spec) {
  std::ostringstream os;
  os << spec.nx << "x" << spec.ny << "@" << spec.resolution << "m";
  return os.str();
}

NormalizedField normalize(const ArrivalField& field, double horizon, std::size_t* clamped) {
  if (!(horizon > 0.0)) throw std::invalid_argument("normalize: horizon must be positive");
  std::vector<double> out(field.size());
  std::size_t n_clamped = 0;
  for (std::size_t k = 0; k < field.size(); ++k) {
    const double v = field[k];
    if (is_background(v)) {
      out[k] = 1.0;
    } else if (v > horizon) {
      out[k] = 1.0;
      ++n_clamped;
    } else {
      out[k] = std::max(0.0, v / horizon);
    }
  }
  if (clamped) *clamped += n_clamped;
  return NormalizedField(field.spec(), std::move(out));
}

ArrivalField denormalize(const NormalizedField& field, double horizon) {
  if (!(horizon > 0.0)) throw std::invalid_argument("denormalize: horizon must be positive");
  std::vector<double> out(field.size());
  for (std::size_t k = 0; k < field.size(); ++k) {
    const double v = field[k];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("denormalize: value outside [0,1]");
    }
    out[k] = v >= kBackgroundThreshold ? kBackground : v * horizon;
  }
  return ArrivalField(field.spec(), std::move(out));
}

BurnMask burn_mask(const ArrivalField& field, double t_hours) {
  std::vector<std::uint8_t> out(field.size());
  for (std::size_t k = 0; k < field.size(); ++k) {
    const double v = field[k];
    out[k] = !is_background(v) && v <= t_hours;
  }
  return BurnMask(field.spec(), std::move(out));
}

int nearest_source_index(int t, double target_res, double source_res, int source_n) {
  // Continuous source coordinate of the target center, in source pixel units
  // relative to source pixel centers.
  const double v = (t + 0.5) * (target_res / source_res) - 0.5;
  int k = static_cast<int>(std::ceil(v - 0.5));
  return std::clamp(k, 0, source_n - 1);
}

GridSpec resampled_spec(const GridSpec& source, double target_resolution) {
  if (!(target_resolution > 0.0) || !(source.resolution > 0.0)) {
    throw std::invalid_argument("resample: resolutions must be positive");
  }
  GridSpec out = source;
  out.resolution = target_resolution;
  out.nx = std::max(1, static_cast<int>(std::lround(source.extent_x() / target_resolution)));
  out.ny = std::max(1, static_cast<int>(std::lround(source.extent_y() / target_resolution)));
  return out;
}

void check_same_footprint(const GridSpec& source, const GridSpec& target) {
  if (!(target.resolution > 0.0) || !(source.resolution > 0.0)) {
    throw std::invalid_argument("resample: resolutions must be positive");
  }
  const double coarse = std::max(source.resolution, target.resolution);
  if (std::abs(source.extent_x() - target.extent_x()) >= coarse ||
      std::abs(source.extent_y() - target.extent_y()) >= coarse) {
    throw std::invalid_argument("resample: footprint mismatch between " + describe(source) +
                                " and " + describe(target));
  }
}

GridSpec cropped_spec(const GridSpec& source, int new_nx, int new_ny) {
  if (new_nx < 1 || new_ny < 1 || new_nx > source.nx || new_ny > source.ny) {
    throw std::invalid_argument("crop_center: requested size exceeds source " + describe(source));
  }
  const int oi = (source.nx - new_nx) / 2;
  const int oj = (source.ny - new_ny) / 2;
  GridSpec out = source;
  out.nx = new_nx;
  out.ny = new_ny;
  const LatLon c = pixel_to_latlon(source, oi + new_nx / 2, oj + new_ny / 2);
  out.origin_lat = c.lat;
  out.origin_lon = c.lon;
  return out;
}

double meters_per_degree_lon(double lat_deg) {
  return kMetersPerDegreeLonEquator * std::cos(lat_deg * std::numbers::pi / 180.0);
}

LocalXY latlon_to_local(const GridSpec& spec, double lat, double lon) {
  return {(lon - spec.origin_lon) * meters_per_degree_lon(spec.origin_lat),
          (lat - spec.origin_lat) * kMetersPerDegreeLat};
}

LatLon local_to_latlon(const GridSpec& spec, LocalXY xy) {
  return {spec.origin_lat + xy.north / kMetersPerDegreeLat,
          spec.origin_lon + xy.east / meters_per_degree_lon(spec.origin_lat)};
}

LocalXY pixel_center(const GridSpec& spec, int i, int j) {
  return {(i - spec.nx / 2) * spec.resolution, (spec.ny / 2 - j) * spec.resolution};
}

LatLon pixel_to_latlon(const GridSpec& spec, int i, int j) {
  return local_to_latlon(spec, pixel_center(spec, i, j));
}

PixelIndex latlon_to_pixel(const GridSpec& spec, double lat, double lon) {
  const LocalXY xy = latlon_to_local(spec, lat, lon);
  const double fi = xy.east / spec.resolution + spec.nx / 2;
  const double fj = spec.ny / 2 - xy.north / spec.resolution;
  const long i = std::lround(fi);
  const long j = std::lround(fj);
  if (!std::isfinite(fi) || !std::isfinite(fj) || i < 0 || j < 0 || i >= spec.nx || j >= spec.ny) {
    throw std::out_of_range("lat/lon outside grid domain");
  }
  return {static_cast<int>(i), static_cast<int>(j)};
}

}  // namespace pyrotime
