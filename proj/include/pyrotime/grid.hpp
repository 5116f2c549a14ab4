#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pyrotime {

/// Georeferenced square-pixel raster footprint.
///
/// Pixel (i, j) addresses column i (west to east) and row j (north to south,
/// north row first). The origin is the lat/lon of the center pixel
/// (nx/2, ny/2).
struct GridSpec {
  int nx = 512;
  int ny = 512;
  double resolution = 60.0;  // meters per pixel
  double origin_lat = 0.0;
  double origin_lon = 0.0;

  double extent_x() const { return nx * resolution; }
  double extent_y() const { return ny * resolution; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  }

  /// Throws std::invalid_argument when a footprint invariant is violated.
  void validate() const;

  /// Same grid shape and resolution, origin ignored.
  bool same_shape(const GridSpec& other) const {
    return nx == other.nx && ny == other.ny && resolution == other.resolution;
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

  static GridSpec production() { return GridSpec{}; }
  static GridSpec square(int n, double resolution_m, double lat = 0.0, double lon = 0.0) {
    return GridSpec{n, n, resolution_m, lat, lon};
  }
};

std::string describe(const GridSpec& spec);

/// Dense row-major 2-D raster bound to a GridSpec.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(GridSpec spec, T fill) : spec_(spec), values_(spec.pixel_count(), fill) {}
  Raster(GridSpec spec, std::vector<T> values) : spec_(spec), values_(std::move(values)) {
    if (values_.size() != spec_.pixel_count()) {
      throw std::invalid_argument("raster value count does not match grid " + describe(spec_));
    }
  }

  const GridSpec& spec() const { return spec_; }
  int nx() const { return spec_.nx; }
  int ny() const { return spec_.ny; }
  std::size_t size() const { return values_.size(); }

  T operator()(int i, int j) const { return values_[index(i, j)]; }
  T& operator()(int i, int j) { return values_[index(i, j)]; }
  T operator[](std::size_t k) const { return values_[k]; }
  T& operator[](std::size_t k) { return values_[k]; }

  bool contains(int i, int j) const { return i >= 0 && j >= 0 && i < spec_.nx && j < spec_.ny; }

  std::span<const T> values() const { return values_; }
  std::span<T> values() { return values_; }
  const std::vector<T>& data() const { return values_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 protected:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(spec_.nx) +
           static_cast<std::size_t>(i);
  }

  GridSpec spec_;
  std::vector<T> values_;
};

/// Never-burned marker for arrival rasters.
inline constexpr double kBackground = std::numeric_limits<double>::infinity();

inline bool is_background(double hours) { return std::isinf(hours) && hours > 0.0; }

/// Fire arrival time in hours since the start of the ignition day.
class ArrivalField : public Raster<double> {
 public:
  using Raster::Raster;
  explicit ArrivalField(GridSpec spec) : Raster(spec, kBackground) {}
};

/// Arrival or measurement scaled into [0, 1]; background is exactly 1.
class NormalizedField : public Raster<double> {
 public:
  using Raster::Raster;
  explicit NormalizedField(GridSpec spec) : Raster(spec, 1.0) {}
};

/// Per-pixel burned flag.
class BurnMask : public Raster<std::uint8_t> {
 public:
  using Raster::Raster;
  explicit BurnMask(GridSpec spec) : Raster(spec, std::uint8_t{0}) {}

  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : values_) n += v != 0;
    return n;
  }
};

}  // namespace pyrotime
