#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace pyrotime {
class Rng;
}

namespace pyrotime::nn {

struct Param {
  std::string name;
  std::vector<double> value;
  std::vector<double> grad;
};

/// Ordered collection of learnable tensors. A frozen set still takes part in
/// forward and backward passes but accumulates no gradients.
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet&) = delete;
  ParamSet& operator=(const ParamSet&) = delete;
  ParamSet(ParamSet&&) = default;
  ParamSet& operator=(ParamSet&&) = default;

  Param& add(std::string name, std::size_t count);
  /// Normal(0, std) initialization drawn from `rng`.
  Param& add_normal(std::string name, std::size_t count, double std, Rng& rng);
  Param& add_constant(std::string name, std::size_t count, double value);

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  Param& operator[](std::size_t k) { return *params_[k]; }
  const Param& operator[](std::size_t k) const { return *params_[k]; }

  bool frozen() const { return frozen_; }
  void set_frozen(bool f) { frozen_ = f; }

  void zero_grad();
  bool all_finite() const;

  std::vector<double> flat_values() const;
  void set_flat_values(const std::vector<double>& flat);
  std::vector<double> flat_grads() const;

 private:
  std::vector<std::unique_ptr<Param>> params_;
  bool frozen_ = false;
};

/// Adaptive-moment optimizer with bias correction.
class Adam {
 public:
  Adam(double lr = 1e-4, double beta1 = 0.5, double beta2 = 0.9, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamSet& params);

  std::int64_t steps() const { return t_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  void restore(std::int64_t t, std::vector<double> m, std::vector<double> v);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace pyrotime::nn
