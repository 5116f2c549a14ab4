#pragma once

#include <chrono>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "pyrotime/grid.hpp"
#include "pyrotime/raster_ops.hpp"

namespace pyrotime::geodata {

enum class Confidence { low, nominal, high };

std::string to_string(Confidence c);
/// Case-insensitive; throws std::invalid_argument for anything else.
Confidence parse_confidence(const std::string& text);

using Timestamp = std::chrono::sys_seconds;

/// "YYYY-MM-DDTHH:MM:SSZ" (the trailing Z and seconds are optional) or a
/// bare date "YYYY-MM-DD" meaning 00:00 UTC. Throws std::invalid_argument.
Timestamp parse_timestamp(const std::string& text);

struct AfDetection {
  double lat = 0.0;
  double lon = 0.0;
  Timestamp time_utc{};
  Confidence confidence = Confidence::nominal;
};

/// Reads a CSV extract with header columns lat, lon, time_utc, confidence
/// (any order, extra columns ignored). Throws SchemaError for a missing
/// column and ParseError naming the line of a malformed row. A file with no
/// rows yields an empty list.
std::vector<AfDetection> parse_af_csv(const std::filesystem::path& path);
std::vector<AfDetection> parse_af_csv_text(const std::string& text);

struct GriddingStats {
  std::size_t used = 0;
  std::size_t outside_domain = 0;
  std::size_t outside_window = 0;
  std::size_t other_tier = 0;
};

/// Earliest detection time per pixel, in hours since `day_start`, for
/// detections of the given tiers within [0, window_h]; normalized by
/// `horizon`, with untouched pixels background.
NormalizedField grid_detections(const std::vector<AfDetection>& detections, const GridSpec& spec,
                                Timestamp day_start, const std::set<Confidence>& tiers,
                                double window_h = 48.0, double horizon = kDefaultHorizonHours,
                                GriddingStats* stats = nullptr);

/// "high" or "high+nominal" (also accepts any '+'-joined tier names).
std::set<Confidence> parse_tiers(const std::string& text);

struct PerimeterPolygon {
  /// Closed lat/lon rings; even-odd filling over all of them.
  std::vector<std::vector<LatLon>> rings;
  double observed_time_h = 0.0;

  /// Throws std::invalid_argument for an open ring or one with fewer than
  /// three distinct vertices.
  void validate() const;
};

/// GeoJSON Feature, FeatureCollection or bare Polygon/MultiPolygon geometry.
/// The observation time comes from the "observed_time_hours" property.
PerimeterPolygon load_perimeter(const std::filesystem::path& path);
PerimeterPolygon parse_perimeter(const std::string& geojson);
std::string perimeter_to_geojson(const PerimeterPolygon& poly);

/// Pixels whose center lies inside the polygon (even-odd rule). Centers on
/// an edge count as inside. Throws std::invalid_argument when the polygon
/// does not overlap the grid.
BurnMask rasterize_perimeter(const PerimeterPolygon& poly, const GridSpec& spec);

}  // namespace pyrotime::geodata
