#include "pyrotime/firesim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pyrotime/raster_ops.hpp"
#include "pyrotime/rng.hpp"

namespace pyrotime::firesim {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Samples per triangle edge when minimizing over the interpolation segment.
constexpr int kSegmentSamples = 64;

struct Offset {
  int di;
  int dj;
};

// The 8 stencil triangles: an axis neighbor paired with an adjacent diagonal.
constexpr std::array<std::pair<Offset, Offset>, 8> kTriangles = {{
    {{1, 0}, {1, 1}},
    {{1, 0}, {1, -1}},
    {{-1, 0}, {-1, 1}},
    {{-1, 0}, {-1, -1}},
    {{0, 1}, {1, 1}},
    {{0, 1}, {-1, 1}},
    {{0, -1}, {1, -1}},
    {{0, -1}, {-1, -1}},
}};

// Travel time (hours) from each sample point of each triangle segment to the
// center pixel. Depends only on the stencil geometry and the uniform wind.
struct TravelTable {
  std::array<std::array<double, kSegmentSamples + 1>, 8> hours{};
  std::array<double, 8> min_hours{};
};

TravelTable build_travel_table(double resolution_m, const RosModel& model, const Wind& wind) {
  TravelTable table;
  for (std::size_t t = 0; t < kTriangles.size(); ++t) {
    const auto [a, b] = kTriangles[t];
    double lo = kInf;
    for (int k = 0; k <= kSegmentSamples; ++k) {
      const double s = static_cast<double>(k) / kSegmentSamples;
      const double pi = a.di + s * (b.di - a.di);
      const double pj = a.dj + s * (b.dj - a.dj);
      // Travel from the sample point to the center: east = -pi, north = +pj.
      const double heading = std::atan2(-pi, pj) / kDeg;
      const double dist = resolution_m * std::sqrt(pi * pi + pj * pj);
      const double hours = dist / directional_ros(model, wind, heading) / 3600.0;
      table.hours[t][k] = hours;
      lo = std::min(lo, hours);
    }
    table.min_hours[t] = lo;
  }
  return table;
}

}  // namespace

void RosModel::validate() const {
  if (!(base_ros > 0.0)) throw std::invalid_argument("RosModel: base_ros must be positive");
  if (!(wind_gain >= 0.0)) throw std::invalid_argument("RosModel: wind_gain must be >= 0");
  if (!(back_fraction > 0.0 && back_fraction <= 1.0)) {
    throw std::invalid_argument("RosModel: back_fraction must be in (0, 1]");
  }
  if (!(flank_fraction > 0.0 && flank_fraction < 1.0)) {
    throw std::invalid_argument("RosModel: flank_fraction must be in (0, 1)");
  }
}

double RosModel::shape_exponent() const { return std::log(flank_fraction) / std::log(0.5); }

double directional_ros(const RosModel& model, const Wind& wind, double heading_deg) {
  if (!(wind.speed >= 0.0)) throw std::invalid_argument("directional_ros: negative wind speed");
  if (wind.speed == 0.0) return model.base_ros;
  const double head = 1.0 + model.wind_gain * wind.speed;
  const double back = model.back_fraction + (1.0 - model.back_fraction) / head;
  const double phi = (heading_deg - wind.direction_deg) * kDeg;
  const double c = 0.5 * (1.0 + std::cos(phi));
  const double shape = model.shape_exponent();
  const double e = shape == 1.0 ? c : std::pow(c, shape);
  return model.base_ros * (head * e + back * (1.0 - e));
}

std::vector<SweepOrder> default_sweep_orders() {
  return {{true, true}, {false, true}, {false, false}, {true, false}};
}

std::vector<double> solve_single(int nx, int ny, double resolution_m, const IgnitionPoint& ignition,
                                 const RosModel& model, const Wind& wind, double tolerance_h,
                                 const std::vector<SweepOrder>& orders, SolveStats* stats) {
  if (ignition.i < 0 || ignition.j < 0 || ignition.i >= nx || ignition.j >= ny) {
    throw std::invalid_argument("solve_single: ignition outside grid");
  }
  if (orders.empty()) throw std::invalid_argument("solve_single: no sweep orders");
  const TravelTable table = build_travel_table(resolution_m, model, wind);
  std::vector<double> u(static_cast<std::size_t>(nx) * ny, kInf);
  const std::size_t seed_index = static_cast<std::size_t>(ignition.j) * nx + ignition.i;
  u[seed_index] = ignition.time_h;

  auto value = [&](int i, int j) {
    return (i < 0 || j < 0 || i >= nx || j >= ny) ? kInf : u[static_cast<std::size_t>(j) * nx + i];
  };

  auto relax = [&](int i, int j) -> double {
    const std::size_t idx = static_cast<std::size_t>(j) * nx + i;
    if (idx == seed_index) return 0.0;
    double best = u[idx];
    for (std::size_t t = 0; t < kTriangles.size(); ++t) {
      const auto [a, b] = kTriangles[t];
      const double ua = value(i + a.di, j + a.dj);
      const double ub = value(i + b.di, j + b.dj);
      const double lo = std::min(ua, ub);
      if (!(lo + table.min_hours[t] < best)) continue;
      const auto& tt = table.hours[t];
      if (std::isinf(ub)) {
        best = std::min(best, ua + tt[0]);
      } else if (std::isinf(ua)) {
        best = std::min(best, ub + tt[kSegmentSamples]);
      } else {
        const double slope = (ub - ua) / kSegmentSamples;
        for (int k = 0; k <= kSegmentSamples; ++k) best = std::min(best, ua + slope * k + tt[k]);
      }
    }
    const double delta = u[idx] - best;
    if (best < u[idx]) {
      u[idx] = best;
      return std::isinf(delta) ? kInf : delta;
    }
    return 0.0;
  };

  int passes = 0;
  double max_update = kInf;
  while (max_update > tolerance_h) {
    max_update = 0.0;
    for (const SweepOrder& o : orders) {
      for (int jj = 0; jj < ny; ++jj) {
        const int j = o.j_ascending ? jj : ny - 1 - jj;
        for (int ii = 0; ii < nx; ++ii) {
          const int i = o.i_ascending ? ii : nx - 1 - ii;
          max_update = std::max(max_update, relax(i, j));
        }
      }
    }
    ++passes;
  }
  if (stats) {
    stats->passes = passes;
    stats->last_max_update_h = max_update;
  }
  return u;
}

ArrivalField solve_arrival(const SpreadConfig& config, const RosModel& model, SolveStats* stats) {
  config.spec.validate();
  if (config.refine < 1) throw std::invalid_argument("solve_arrival: refine must be >= 1");
  if (!(config.duration_h > 0.0)) throw std::invalid_argument("solve_arrival: duration must be > 0");
  RosModel effective = model;
  effective.base_ros = config.base_ros;
  effective.validate();

  const int r = config.refine;
  GridSpec fine = config.spec;
  fine.nx *= r;
  fine.ny *= r;
  fine.resolution /= r;

  std::vector<double> best(fine.pixel_count(), kInf);
  bool any = false;
  SolveStats total;
  for (const IgnitionPoint& ig : config.ignitions) {
    if (ig.i < 0 || ig.j < 0 || ig.i >= config.spec.nx || ig.j >= config.spec.ny) continue;
    any = true;
    SolveStats s;
    const auto u = solve_single(fine.nx, fine.ny, fine.resolution, {ig.i * r, ig.j * r, ig.time_h},
                                effective, config.wind, config.tolerance_h, default_sweep_orders(),
                                &s);
    total.passes += s.passes;
    total.last_max_update_h = std::max(total.last_max_update_h, s.last_max_update_h);
    for (std::size_t k = 0; k < best.size(); ++k) best[k] = std::min(best[k], u[k]);
  }
  if (!any) throw std::invalid_argument("solve_arrival: no ignition point inside the grid");
  if (stats) *stats = total;

  ArrivalField out = resample_to(ArrivalField(fine, std::move(best)), config.spec);
  for (double& v : out.values()) {
    if (v > config.duration_h) v = kBackground;
  }
  return out;
}

std::vector<SpreadConfig> sample_training_configs(int n, std::uint64_t seed, const GridSpec& spec,
                                                  double duration_h, double base_ros) {
  if (n < 1) throw std::invalid_argument("sample_training_configs: n must be >= 1");
  std::vector<SpreadConfig> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(k)}));
    SpreadConfig c;
    c.spec = spec;
    c.wind.speed = rng.uniform(0.0, 5.0);
    c.wind.direction_deg = rng.uniform(0.0, 360.0);
    c.ignitions = {{spec.nx / 2, spec.ny / 2, 0.0}};
    c.base_ros = base_ros;
    c.duration_h = duration_h;
    out.push_back(c);
  }
  return out;
}

}  // namespace pyrotime::firesim
