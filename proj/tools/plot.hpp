#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pyrotime/farr.hpp"

namespace pyrotime::plot {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 255);
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

/// Binary PPM (P6).
void write_ppm(const std::filesystem::path& path, const Image& image);

enum class Kind { arrival, measurement, spread, category };

Kind parse_kind(const std::string& name);
std::string to_string(Kind kind);

/// Chosen from the raster's units: category codes, normalized
/// measurements, hours with a background value (arrival times) or hours
/// without one (standard deviations).
Kind infer_kind(const FarrHeader& header);

/// Heatmap with an hour colorbar, or a three-color A/B/C map with legend.
/// `scale` is the side of one raster pixel in image pixels (0: automatic).
Image render(const FarrRaster& raster, Kind kind, int scale = 0);

}  // namespace pyrotime::plot
