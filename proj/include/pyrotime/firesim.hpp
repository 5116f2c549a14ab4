#pragma once

#include <cstdint>
#include <vector>

#include "pyrotime/grid.hpp"

namespace pyrotime::firesim {

struct IgnitionPoint {
  int i = 0;
  int j = 0;
  double time_h = 0.0;
};

struct Wind {
  double speed = 0.0;          // m/s at 10 m
  double direction_deg = 0.0;  // compass direction the wind blows toward
};

/// Directional rate-of-spread law.
///
/// With e(phi) = ((1 + cos phi) / 2)^s, phi the angle between the heading and
/// the downwind direction and s chosen so that e(90 deg) = flank_fraction:
///
///   R(phi) = base_ros * [ h * e(phi) + b * (1 - e(phi)) ]
///   h = 1 + wind_gain * speed                        (head factor)
///   b = back_fraction + (1 - back_fraction) / h      (backing factor)
///
/// Calm air gives R = base_ros in every direction; the head rate is
/// base_ros * h and the backing rate decays toward back_fraction * base_ros
/// as the wind strengthens.
struct RosModel {
  double base_ros = 0.05;  // m/s
  double wind_gain = 0.4;  // per m/s
  double back_fraction = 0.2;
  double flank_fraction = 0.5;

  void validate() const;
  double shape_exponent() const;
};

/// Rate of spread (m/s) along `heading_deg` (compass degrees of travel).
double directional_ros(const RosModel& model, const Wind& wind, double heading_deg);

struct SpreadConfig {
  GridSpec spec;
  std::vector<IgnitionPoint> ignitions;
  Wind wind;
  double base_ros = 0.05;
  double duration_h = 48.0;
  /// Solve on a grid this many times finer, then coarsen to `spec`.
  int refine = 2;
  /// Fast sweeping stops once a full pass lowers no value by more than this.
  double tolerance_h = 1e-9;
};

struct SolveStats {
  int passes = 0;
  double last_max_update_h = 0.0;
};

/// First-arrival field of the anisotropic eikonal equation for the configured
/// ignitions. Pixels reached after `duration_h` are background. Multiple
/// ignitions yield the pointwise minimum of their single-ignition solutions.
ArrivalField solve_arrival(const SpreadConfig& config, const RosModel& model,
                           SolveStats* stats = nullptr);

/// Sweep orderings used by the solver; exposed so tests can permute them.
struct SweepOrder {
  bool i_ascending;
  bool j_ascending;
};

/// Single-ignition solve on an explicit grid without refinement or duration
/// cut-off. Values are hours; unreachable pixels stay +inf.
std::vector<double> solve_single(int nx, int ny, double resolution_m, const IgnitionPoint& ignition,
                                 const RosModel& model, const Wind& wind, double tolerance_h,
                                 const std::vector<SweepOrder>& orders, SolveStats* stats = nullptr);

std::vector<SweepOrder> default_sweep_orders();

/// Training ensemble: uniform wind speed in [0, 5] m/s, uniform direction,
/// one ignition at the center pixel at time 0.
std::vector<SpreadConfig> sample_training_configs(int n, std::uint64_t seed,
                                                  const GridSpec& spec = GridSpec::production(),
                                                  double duration_h = 48.0,
                                                  double base_ros = 0.05);

}  // namespace pyrotime::firesim
