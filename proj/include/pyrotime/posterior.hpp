#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pyrotime/grid.hpp"
#include "pyrotime/raster_ops.hpp"

namespace pyrotime::cwgan {
class Generator;
}

namespace pyrotime::posterior {

inline constexpr int kDefaultMembers = 200;

/// Weighted set of normalized arrival realizations on one grid.
struct Ensemble {
  std::vector<NormalizedField> members;
  std::vector<double> weights;
  std::string source;

  /// Throws std::invalid_argument unless the ensemble is non-empty, all
  /// members share a grid, values lie in [0, 1] and weights sum to 1.
  void validate() const;
};

struct PosteriorSummary {
  ArrivalField mean;        // hours, background where the mean reaches it
  Raster<double> std_hours;
  /// Smallest non-background mean arrival; empty when nothing burns.
  std::optional<double> ignition_estimate_h;
  int n_members = 0;
  std::vector<double> weights;
};

/// Maps a latent draw and a measurement to one realization.
using Sampler = std::function<NormalizedField(const std::vector<double>& z,
                                              const NormalizedField& measurement)>;

/// K realizations with latent draws z_i ~ N(0, I) seeded per member, so the
/// ensemble does not depend on `workers`. Weights are uniform.
Ensemble sample_ensemble(const Sampler& sampler, int latent_dim, const NormalizedField& measurement,
                         int k, std::uint64_t seed, int workers = 1);
Ensemble sample_ensemble(cwgan::Generator& generator, const NormalizedField& measurement,
                         int k, std::uint64_t seed, int workers = 1);

/// Latent vector of member `index` for `seed`.
std::vector<double> member_latent(std::uint64_t seed, int index, int latent_dim);

/// Pools both ensembles; members of each carry its tier weight times their
/// weight within the tier.
Ensemble merge_weighted(const Ensemble& high, const Ensemble& both, double w_high = 0.2,
                        double w_both = 0.8);

/// Weighted pixel mean and standard deviation on normalized values, mapped
/// back to hours.
PosteriorSummary pixel_stats(const Ensemble& ensemble, double horizon = kDefaultHorizonHours);

/// "HH:MM" from hours since the start of the ignition day, nearest minute.
/// Hours may exceed 24.
std::string format_clock(double hours);

/// Clock string of the summary's ignition estimate; throws NoFireError when
/// every pixel is background.
std::string ignition_time(const PosteriorSummary& summary);

}  // namespace pyrotime::posterior
