#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "pyrotime/geodata.hpp"
#include "pyrotime/grid.hpp"

namespace pyrotime::evalmetrics {

/// Pixel counts: A burned in both, B missed (truth only), C false alarm
/// (prediction only).
struct ConfusionRegions {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t c = 0;
  std::size_t total = 0;
  friend bool operator==(const ConfusionRegions&, const ConfusionRegions&) = default;
};

ConfusionRegions confusion(const BurnMask& pred, const BurnMask& truth);
/// Prediction mask is burn_mask(pred, t).
ConfusionRegions confusion(const ArrivalField& pred, const BurnMask& truth, double t_hours);

/// Ratios with a zero denominator are empty (not available).
struct Scores {
  std::optional<double> sc;
  std::optional<double> pod;
  std::optional<double> far;
};

Scores scores(const ConfusionRegions& r);

/// Category codes per pixel: 0 none, 1 A, 2 B, 3 C.
enum Category : std::uint8_t { kNone = 0, kHit = 1, kMiss = 2, kFalseAlarm = 3 };
Raster<std::uint8_t> category_raster(const BurnMask& pred, const BurnMask& truth);

/// Minutes since the start of the ignition day from "HH:MM" (hours may
/// exceed 24). Throws ParseError for anything else.
long parse_clock_minutes(const std::string& clock);

/// predicted minus reported, in minutes.
long ignition_error(const std::string& predicted, const std::string& reported);

struct ScoreReport {
  std::string case_id;
  double eval_time_h = 0.0;
  ConfusionRegions regions;
  Scores scores;
  std::optional<std::string> predicted_ignition;
  std::optional<std::string> reported_ignition;
  std::optional<long> ignition_error_min;

  /// Unavailable values are written as null.
  std::string to_json() const;
  static ScoreReport from_json(const std::string& text);
};

/// Rasterizes the perimeter, scores the prediction at its observation time
/// and, when a reported ignition is given, the ignition error of the
/// prediction's earliest arrival. `categories` receives the A/B/C raster.
ScoreReport evaluate_case(const ArrivalField& pred, const geodata::PerimeterPolygon& perimeter,
                          const std::optional<std::string>& reported_ignition,
                          const std::string& case_id = "case",
                          double horizon = kDefaultHorizonHours,
                          Raster<std::uint8_t>* categories = nullptr);

}  // namespace pyrotime::evalmetrics
