#pragma once

// FARR raster files: one JSON header line followed by nx*ny little-endian
// float32 values, row-major, north row first.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pyrotime/grid.hpp"

namespace pyrotime {

namespace farr_units {
inline constexpr const char* kHours = "hours";
inline constexpr const char* kNormalized = "normalized";
inline constexpr const char* kCategory = "category";
}  // namespace farr_units

struct FarrHeader {
  GridSpec spec;
  std::string units = farr_units::kHours;
  std::optional<double> background;
};

struct FarrRaster {
  FarrHeader header;
  std::vector<float> values;
};

void write_farr(const std::filesystem::path& path, const FarrHeader& header,
                const std::vector<float>& values);
FarrRaster read_farr(const std::filesystem::path& path);

std::string encode_farr(const FarrHeader& header, const std::vector<float>& values);
FarrRaster decode_farr(const std::string& bytes);

/// Arrival rasters serialize background as the horizon value.
void save_arrival(const std::filesystem::path& path, const ArrivalField& field,
                  double horizon = 72.0);
ArrivalField load_arrival(const std::filesystem::path& path);

void save_normalized(const std::filesystem::path& path, const NormalizedField& field);
NormalizedField load_normalized(const std::filesystem::path& path);

/// Hour-valued raster without a background (e.g. standard deviations).
void save_hours(const std::filesystem::path& path, const Raster<double>& field);

/// Small-integer category codes.
void save_categories(const std::filesystem::path& path, const Raster<std::uint8_t>& field);
Raster<std::uint8_t> load_categories(const std::filesystem::path& path);

}  // namespace pyrotime
