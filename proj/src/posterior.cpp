#include "pyrotime/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "pyrotime/cwgan.hpp"
#include "pyrotime/errors.hpp"
#include "pyrotime/parallel.hpp"
#include "pyrotime/rng.hpp"

namespace pyrotime::posterior {

namespace {

constexpr int kChunk = 8;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void Ensemble::validate() const {
  require(!members.empty(), "ensemble: no members");
  require(weights.size() == members.size(), "ensemble: one weight per member required");
  const GridSpec& spec = members.front().spec();
  double total = 0.0;
  for (std::size_t k = 0; k < members.size(); ++k) {
    require(members[k].spec().same_shape(spec), "ensemble: members on different grids");
    require(weights[k] >= 0.0 && std::isfinite(weights[k]), "ensemble: weights must be >= 0");
    total += weights[k];
    for (double v : members[k].values()) {
      require(v >= 0.0 && v <= 1.0, "ensemble: member values must lie in [0, 1]");
    }
  }
  require(std::abs(total - 1.0) <= 1e-9, "ensemble: weights must sum to 1");
}

std::vector<double> member_latent(std::uint64_t seed, int index, int latent_dim) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(index)}));
  std::vector<double> z(static_cast<std::size_t>(latent_dim));
  for (double& v : z) v = rng.normal();
  return z;
}

Ensemble sample_ensemble(const Sampler& sampler, int latent_dim, const NormalizedField& measurement,
                         int k, std::uint64_t seed, int workers) {
  require(k >= 1, "sample_ensemble: K must be >= 1");
  require(latent_dim >= 1, "sample_ensemble: latent_dim must be >= 1");
  Ensemble e;
  e.members.resize(static_cast<std::size_t>(k));
  parallel_for(static_cast<std::size_t>(k), workers, [&](std::size_t i) {
    e.members[i] = sampler(member_latent(seed, static_cast<int>(i), latent_dim), measurement);
  });
  e.weights.assign(static_cast<std::size_t>(k), 1.0 / k);
  return e;
}

Ensemble sample_ensemble(cwgan::Generator& generator, const NormalizedField& measurement, int k,
                         std::uint64_t seed, int workers) {
  require(k >= 1, "sample_ensemble: K must be >= 1");
  const int nz = generator.config().latent_dim;
  const GridSpec& spec = measurement.spec();
  const std::size_t chunks = static_cast<std::size_t>((k + kChunk - 1) / kChunk);
  const nn::Tensor meas1 = cwgan::stack_fields({&measurement});
  Ensemble e;
  e.members.resize(static_cast<std::size_t>(k));
  parallel_for(chunks, workers, [&](std::size_t c) {
    const int first = static_cast<int>(c) * kChunk;
    const int n = std::min(kChunk, k - first);
    nn::Tensor z({n, nz, 1, 1});
    nn::Tensor meas({n, 1, spec.ny, spec.nx});
    for (int b = 0; b < n; ++b) {
      const auto zi = member_latent(seed, first + b, nz);
      std::copy(zi.begin(), zi.end(), z.sample(b));
      std::copy(meas1.data.begin(), meas1.data.end(), meas.sample(b));
    }
    const nn::Tensor out = generator.sample(z, meas);
    const std::size_t per = out.shape.per_sample();
    for (int b = 0; b < n; ++b) {
      e.members[first + b] =
          NormalizedField(spec, std::vector<double>(out.sample(b), out.sample(b) + per));
    }
  });
  e.weights.assign(static_cast<std::size_t>(k), 1.0 / k);
  return e;
}

Ensemble merge_weighted(const Ensemble& high, const Ensemble& both, double w_high, double w_both) {
  high.validate();
  both.validate();
  require(w_high >= 0.0 && w_both >= 0.0 && std::abs(w_high + w_both - 1.0) <= 1e-9,
          "merge_weighted: tier weights must be non-negative and sum to 1");
  require(high.members.front().spec().same_shape(both.members.front().spec()),
          "merge_weighted: ensembles are on different grids");
  Ensemble out;
  out.source = high.source + "+" + both.source;
  for (std::size_t k = 0; k < high.members.size(); ++k) {
    out.members.push_back(high.members[k]);
    out.weights.push_back(w_high * high.weights[k]);
  }
  for (std::size_t k = 0; k < both.members.size(); ++k) {
    out.members.push_back(both.members[k]);
    out.weights.push_back(w_both * both.weights[k]);
  }
  return out;
}

PosteriorSummary pixel_stats(const Ensemble& e, double horizon) {
  e.validate();
  require(horizon > 0.0, "pixel_stats: horizon must be positive");
  const GridSpec& spec = e.members.front().spec();
  const std::size_t n = spec.pixel_count();
  std::vector<double> mean(n, 0.0), var(n, 0.0);
  for (std::size_t k = 0; k < e.members.size(); ++k) {
    const double w = e.weights[k];
    const auto v = e.members[k].values();
    for (std::size_t p = 0; p < n; ++p) mean[p] += w * v[p];
  }
  for (std::size_t k = 0; k < e.members.size(); ++k) {
    const double w = e.weights[k];
    const auto v = e.members[k].values();
    for (std::size_t p = 0; p < n; ++p) var[p] += w * (v[p] - mean[p]) * (v[p] - mean[p]);
  }
  PosteriorSummary s;
  for (double& m : mean) m = std::clamp(m, 0.0, 1.0);
  s.mean = denormalize(NormalizedField(spec, mean), horizon);
  std::vector<double> sd(n);
  for (std::size_t p = 0; p < n; ++p) sd[p] = std::sqrt(var[p]) * horizon;
  s.std_hours = Raster<double>(spec, std::move(sd));
  for (double v : s.mean.values()) {
    if (is_background(v)) continue;
    if (!s.ignition_estimate_h || v < *s.ignition_estimate_h) s.ignition_estimate_h = v;
  }
  s.n_members = static_cast<int>(e.members.size());
  s.weights = e.weights;
  return s;
}

std::string format_clock(double hours) {
  require(std::isfinite(hours) && hours >= 0.0, "format_clock: hours must be finite and >= 0");
  const long long minutes = std::llround(hours * 60.0);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld", minutes / 60, minutes % 60);
  return buf;
}

std::string ignition_time(const PosteriorSummary& summary) {
  if (!summary.ignition_estimate_h) throw NoFireError("ignition_time: every pixel is background");
  return format_clock(*summary.ignition_estimate_h);
}

}  // namespace pyrotime::posterior
