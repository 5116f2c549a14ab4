#include "pyrotime/nn/params.hpp"

#include <cmath>
#include <stdexcept>

#include "pyrotime/nn/tensor.hpp"
#include "pyrotime/rng.hpp"

namespace pyrotime::nn {

std::string to_string(const Shape& s) {
  return "[" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
         std::to_string(s.w) + "]";
}

Param& ParamSet::add(std::string name, std::size_t count) {
  auto p = std::make_unique<Param>();
  p->name = std::move(name);
  p->value.assign(count, 0.0);
  p->grad.assign(count, 0.0);
  params_.push_back(std::move(p));
  return *params_.back();
}

Param& ParamSet::add_normal(std::string name, std::size_t count, double std, Rng& rng) {
  Param& p = add(std::move(name), count);
  for (double& v : p.value) v = std * rng.normal();
  return p;
}

Param& ParamSet::add_constant(std::string name, std::size_t count, double value) {
  Param& p = add(std::move(name), count);
  p.value.assign(count, value);
  return p;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

bool ParamSet::all_finite() const {
  for (const auto& p : params_)
    for (double v : p->value)
      if (!std::isfinite(v)) return false;
  return true;
}

std::vector<double> ParamSet::flat_values() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& p : params_) out.insert(out.end(), p->value.begin(), p->value.end());
  return out;
}

void ParamSet::set_flat_values(const std::vector<double>& flat) {
  if (flat.size() != scalar_count()) throw std::invalid_argument("ParamSet: flat size mismatch");
  std::size_t off = 0;
  for (auto& p : params_) {
    std::copy(flat.begin() + off, flat.begin() + off + p->value.size(), p->value.begin());
    off += p->value.size();
  }
}

std::vector<double> ParamSet::flat_grads() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& p : params_) out.insert(out.end(), p->grad.begin(), p->grad.end());
  return out;
}

void Adam::step(ParamSet& params) {
  const std::size_t n = params.scalar_count();
  if (m_.empty()) {
    m_.assign(n, 0.0);
    v_.assign(n, 0.0);
  }
  if (m_.size() != n) throw std::invalid_argument("Adam: parameter count changed");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  std::size_t off = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param& p = params[k];
    for (std::size_t q = 0; q < p.value.size(); ++q, ++off) {
      const double g = p.grad[q];
      m_[off] = beta1_ * m_[off] + (1.0 - beta1_) * g;
      v_[off] = beta2_ * v_[off] + (1.0 - beta2_) * g * g;
      p.value[q] -= lr_ * (m_[off] / c1) / (std::sqrt(v_[off] / c2) + eps_);
    }
  }
}

void Adam::restore(std::int64_t t, std::vector<double> m, std::vector<double> v) {
  if (m.size() != v.size()) throw std::invalid_argument("Adam: moment sizes differ");
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace pyrotime::nn
