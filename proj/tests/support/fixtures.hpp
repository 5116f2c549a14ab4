#pragma once

// Shared synthetic inputs for tests.

#include <cmath>

#include "pyrotime/grid.hpp"

namespace pyrotime::testing {

/// Radially symmetric arrival field around the center pixel spreading at
/// `ros` m/s; pixels later than `cutoff_h` are background.
inline ArrivalField radial_field(int n = 64, double res = 60.0, double ros = 0.015,
                                 double cutoff_h = 40.0) {
  ArrivalField f(GridSpec::square(n, res, 34.26, -117.96));
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double h = res * std::hypot(i - n / 2, j - n / 2) / ros / 3600.0;
      if (h <= cutoff_h) f(i, j) = h;
    }
  return f;
}

}  // namespace pyrotime::testing
