#include "pyrotime/evalmetrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"
#include "pyrotime/errors.hpp"
#include "pyrotime/posterior.hpp"
#include "pyrotime/raster_ops.hpp"

namespace pyrotime::evalmetrics {

using ordered_json = nlohmann::ordered_json;

namespace {

void check_specs(const GridSpec& a, const GridSpec& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("grid mismatch: " + describe(a) + " vs " + describe(b));
  }
}

std::optional<double> ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

ordered_json opt(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

}  // namespace

ConfusionRegions confusion(const BurnMask& pred, const BurnMask& truth) {
  check_specs(pred.spec(), truth.spec());
  ConfusionRegions r;
  r.total = pred.size();
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const bool p = pred[k] != 0, t = truth[k] != 0;
    r.a += p && t;
    r.b += !p && t;
    r.c += p && !t;
  }
  return r;
}

ConfusionRegions confusion(const ArrivalField& pred, const BurnMask& truth, double t_hours) {
  if (!(t_hours >= 0.0)) throw std::invalid_argument("confusion: t must be >= 0");
  check_specs(pred.spec(), truth.spec());
  return confusion(burn_mask(pred, t_hours), truth);
}

Scores scores(const ConfusionRegions& r) {
  const double a = static_cast<double>(r.a), b = static_cast<double>(r.b), c = static_cast<double>(r.c);
  return {ratio(2 * a, 2 * a + b + c), ratio(a, a + b), ratio(c, a + c)};
}

Raster<std::uint8_t> category_raster(const BurnMask& pred, const BurnMask& truth) {
  check_specs(pred.spec(), truth.spec());
  Raster<std::uint8_t> out(pred.spec(), std::uint8_t{kNone});
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const bool p = pred[k] != 0, t = truth[k] != 0;
    out[k] = p && t ? kHit : t ? kMiss : p ? kFalseAlarm : kNone;
  }
  return out;
}

long parse_clock_minutes(const std::string& clock) {
  long h = -1;
  int m = -1, used = 0;
  if (std::sscanf(clock.c_str(), "%ld:%2d%n", &h, &m, &used) != 2 ||
      static_cast<std::size_t>(used) != clock.size() || h < 0 || m < 0 || m > 59 ||
      clock.find(':') < 1 || clock.size() - clock.find(':') != 3 || clock[0] == '+' ||
      clock[0] == '-' || clock[0] == ' ') {
    throw ParseError(1, "malformed clock time '" + clock + "' (expected HH:MM)");
  }
  return h * 60 + m;
}

long ignition_error(const std::string& predicted, const std::string& reported) {
  return parse_clock_minutes(predicted) - parse_clock_minutes(reported);
}

std::string ScoreReport::to_json() const {
  ordered_json j;
  j["case_id"] = case_id;
  j["eval_time_hours"] = eval_time_h;
  j["regions"] = {{"A", regions.a}, {"B", regions.b}, {"C", regions.c}, {"total", regions.total}};
  j["sc"] = opt(scores.sc);
  j["pod"] = opt(scores.pod);
  j["far"] = opt(scores.far);
  j["predicted_ignition"] = predicted_ignition ? ordered_json(*predicted_ignition) : ordered_json(nullptr);
  j["reported_ignition"] = reported_ignition ? ordered_json(*reported_ignition) : ordered_json(nullptr);
  j["ignition_error_minutes"] =
      ignition_error_min ? ordered_json(*ignition_error_min) : ordered_json(nullptr);
  return j.dump(2);
}

ScoreReport ScoreReport::from_json(const std::string& text) {
  ScoreReport r;
  try {
    const auto j = ordered_json::parse(text);
    auto optd = [&](const char* k) -> std::optional<double> {
      return j.at(k).is_null() ? std::nullopt : std::optional<double>(j.at(k).get<double>());
    };
    auto opts = [&](const char* k) -> std::optional<std::string> {
      return j.at(k).is_null() ? std::nullopt : std::optional<std::string>(j.at(k).get<std::string>());
    };
    r.case_id = j.at("case_id").get<std::string>();
    r.eval_time_h = j.at("eval_time_hours").get<double>();
    const auto& reg = j.at("regions");
    r.regions = {reg.at("A").get<std::size_t>(), reg.at("B").get<std::size_t>(),
                 reg.at("C").get<std::size_t>(), reg.at("total").get<std::size_t>()};
    r.scores = {optd("sc"), optd("pod"), optd("far")};
    r.predicted_ignition = opts("predicted_ignition");
    r.reported_ignition = opts("reported_ignition");
    if (!j.at("ignition_error_minutes").is_null()) {
      r.ignition_error_min = j.at("ignition_error_minutes").get<long>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("score report: ") + e.what());
  }
  return r;
}

ScoreReport evaluate_case(const ArrivalField& pred, const geodata::PerimeterPolygon& perimeter,
                          const std::optional<std::string>& reported_ignition,
                          const std::string& case_id, double horizon,
                          Raster<std::uint8_t>* categories) {
  const double t = perimeter.observed_time_h;
  if (!(t >= 0.0 && t <= horizon)) {
    throw std::invalid_argument("evaluate_case: perimeter time outside the prediction horizon");
  }
  const BurnMask truth = geodata::rasterize_perimeter(perimeter, pred.spec());
  const BurnMask predicted = burn_mask(pred, t);
  ScoreReport r;
  r.case_id = case_id;
  r.eval_time_h = t;
  r.regions = confusion(predicted, truth);
  r.scores = scores(r.regions);
  double first = kBackground;
  for (double v : pred.values()) first = std::min(first, v);
  if (!is_background(first)) r.predicted_ignition = posterior::format_clock(first);
  if (reported_ignition) {
    parse_clock_minutes(*reported_ignition);
    r.reported_ignition = *reported_ignition;
    if (r.predicted_ignition) r.ignition_error_min = ignition_error(*r.predicted_ignition, *reported_ignition);
  }
  if (categories) *categories = category_raster(predicted, truth);
  return r;
}

}  // namespace pyrotime::evalmetrics
