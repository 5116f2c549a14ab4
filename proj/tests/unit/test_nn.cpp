#include <cmath>
#include <functional>

#include "doctest.h"
#include "pyrotime/nn/params.hpp"
#include "pyrotime/nn/tape.hpp"
#include "pyrotime/rng.hpp"

using namespace pyrotime;
using namespace pyrotime::nn;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double scale = 1.0) {
  Tensor t(s);
  for (double& v : t.data) v = scale * rng.normal();
  return t;
}

double weighted_sum(const Tensor& t, const Tensor& w) {
  double s = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) s += t.data[k] * w.data[k];
  return s;
}

// A graph under test: builds on the tape from input `x` and returns the output.
using Graph = std::function<Tape::Var(Tape&, Tape::Var)>;

struct Probe {
  Tensor x;
  Tensor tangent;      // empty: no tangent
  Tensor value_weight;  // loss = <y, value_weight> + <dy, tangent_weight>
  Tensor tangent_weight;
};

double loss_of(const Graph& g, const Probe& p) {
  Tape tape(false);
  const auto x = p.tangent.empty() ? tape.input(p.x) : tape.input(p.x, p.tangent, false);
  const auto y = g(tape, x);
  double l = weighted_sum(tape.value(y), p.value_weight);
  if (!p.tangent_weight.empty()) l += weighted_sum(tape.tangent(y), p.tangent_weight);
  return l;
}

// Largest relative discrepancy between backward gradients (input and every
// parameter) and central differences of the same scalar loss.
double fd_discrepancy(const Graph& g, Probe p, ParamSet& params, double h = 1e-6) {
  params.zero_grad();
  Tape tape(true);
  const auto x = p.tangent.empty() ? tape.input(p.x, true) : tape.input(p.x, p.tangent, true);
  const auto y = g(tape, x);
  tape.backward(y, &p.value_weight, p.tangent_weight.empty() ? nullptr : &p.tangent_weight);
  const Tensor gx = tape.grad(x).empty() ? Tensor(p.x.shape) : tape.grad(x);

  double worst = 0.0;
  auto compare = [&](double analytic, double numeric) {
    const double scale = std::max({1e-6, std::abs(analytic), std::abs(numeric)});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  };
  for (std::size_t k = 0; k < p.x.size(); ++k) {
    const double keep = p.x.data[k];
    p.x.data[k] = keep + h;
    const double up = loss_of(g, p);
    p.x.data[k] = keep - h;
    const double down = loss_of(g, p);
    p.x.data[k] = keep;
    compare(gx.data[k], (up - down) / (2 * h));
  }
  for (std::size_t q = 0; q < params.size(); ++q) {
    Param& prm = params[q];
    for (std::size_t k = 0; k < prm.value.size(); ++k) {
      const double keep = prm.value[k];
      prm.value[k] = keep + h;
      const double up = loss_of(g, p);
      prm.value[k] = keep - h;
      const double down = loss_of(g, p);
      prm.value[k] = keep;
      compare(prm.grad[k], (up - down) / (2 * h));
    }
  }
  return worst;
}

Probe make_probe(Shape in, Shape out, Rng& rng, bool with_tangent) {
  Probe p;
  p.x = random_tensor(in, rng);
  p.value_weight = random_tensor(out, rng);
  if (with_tangent) {
    p.tangent = random_tensor(in, rng);
    p.tangent_weight = random_tensor(out, rng);
  }
  return p;
}

}  // namespace

TEST_CASE("conv gradients match finite differences") {
  Rng rng(1);
  for (int k : {1, 3}) {
    for (bool tangent : {false, true}) {
      ParamSet ps;
      Param& w = ps.add_normal("w", 3 * 2 * k * k, 0.5, rng);
      Param& b = ps.add_normal("b", 3, 0.5, rng);
      const Graph g = [&, k](Tape& t, Tape::Var x) { return t.conv(x, w, b, 3, k, ps); };
      const Probe p = make_probe({2, 2, 5, 4}, {2, 3, 5, 4}, rng, tangent);
      CHECK(fd_discrepancy(g, p, ps) < 1e-6);
    }
  }
}

TEST_CASE("elu gradients, including the tangent path, match finite differences") {
  Rng rng(2);
  for (bool tangent : {false, true}) {
    ParamSet ps;
    const Graph g = [](Tape& t, Tape::Var x) { return t.elu(x); };
    const Probe p = make_probe({2, 3, 3, 3}, {2, 3, 3, 3}, rng, tangent);
    CHECK(fd_discrepancy(g, p, ps) < 1e-6);
  }
}

TEST_CASE("sigmoid, upsample and pooling gradients match finite differences") {
  Rng rng(3);
  ParamSet ps;
  const Graph sig = [](Tape& t, Tape::Var x) { return t.sigmoid(x); };
  CHECK(fd_discrepancy(sig, make_probe({2, 2, 3, 3}, {2, 2, 3, 3}, rng, false), ps) < 1e-6);
  const Graph up = [](Tape& t, Tape::Var x) { return t.upsample2(x); };
  CHECK(fd_discrepancy(up, make_probe({2, 2, 3, 3}, {2, 2, 6, 6}, rng, false), ps) < 1e-6);
  for (bool tangent : {false, true}) {
    const Graph pool = [](Tape& t, Tape::Var x) { return t.avgpool2(x); };
    CHECK(fd_discrepancy(pool, make_probe({2, 2, 4, 6}, {2, 2, 2, 3}, rng, tangent), ps) < 1e-6);
  }
}

TEST_CASE("concat routes gradients to every input") {
  Rng rng(4);
  for (bool tangent : {false, true}) {
    ParamSet ps;
    Param& w = ps.add_normal("w", 2 * 2 * 9, 0.5, rng);
    Param& b = ps.add_normal("b", 2, 0.5, rng);
    const Graph g = [&](Tape& t, Tape::Var x) {
      const auto a = t.elu(t.conv(x, w, b, 2, 3, ps));
      return t.concat({x, a, x});
    };
    CHECK(fd_discrepancy(g, make_probe({2, 2, 4, 4}, {2, 6, 4, 4}, rng, tangent), ps) < 1e-6);
  }
}

TEST_CASE("cin gradients match finite differences") {
  Rng rng(5);
  const int nz = 3, c = 2;
  ParamSet ps;
  Param& wg = ps.add_normal("wg", c * nz, 0.3, rng);
  Param& bg = ps.add_constant("bg", c, 1.0);
  Param& wb = ps.add_normal("wb", c * nz, 0.3, rng);
  Param& bb = ps.add_normal("bb", c, 0.3, rng);
  const Tensor z = random_tensor({2, nz, 1, 1}, rng);
  const Graph g = [&](Tape& t, Tape::Var x) { return t.cin(x, z, wg, bg, wb, bb, ps); };
  CHECK(fd_discrepancy(g, make_probe({2, c, 4, 3}, {2, c, 4, 3}, rng, false), ps) < 1e-5);
}

TEST_CASE("linear gradients match finite differences") {
  Rng rng(6);
  for (bool tangent : {false, true}) {
    ParamSet ps;
    Param& w = ps.add_normal("w", 4 * 18, 0.3, rng);
    Param& b = ps.add_normal("b", 4, 0.3, rng);
    const Graph g = [&](Tape& t, Tape::Var x) { return t.linear(t.elu(x), w, b, 4, ps); };
    CHECK(fd_discrepancy(g, make_probe({3, 2, 3, 3}, {3, 4, 1, 1}, rng, tangent), ps) < 1e-6);
  }
}

TEST_CASE("tangents equal directional derivatives of values") {
  Rng rng(7);
  ParamSet ps;
  Param& w1 = ps.add_normal("w1", 4 * 2 * 9, 0.4, rng);
  Param& b1 = ps.add_normal("b1", 4, 0.4, rng);
  Param& w2 = ps.add_normal("w2", 3 * 6 * 2 * 2, 0.4, rng);
  Param& b2 = ps.add_normal("b2", 3, 0.4, rng);
  const Graph g = [&](Tape& t, Tape::Var x) {
    auto h = t.elu(t.conv(x, w1, b1, 4, 3, ps));
    h = t.avgpool2(t.concat({h, x}));
    h = t.elu(h);
    return t.linear(h, w2, b2, 3, ps);
  };
  const Tensor x = random_tensor({2, 2, 4, 4}, rng);
  const Tensor u = random_tensor(x.shape, rng);
  Tape tape(false);
  const auto y = g(tape, tape.input(x, u, false));
  REQUIRE(tape.has_tangent(y));
  const double h = 1e-6;
  Tensor xp = x, xm = x;
  for (std::size_t k = 0; k < x.size(); ++k) {
    xp.data[k] += h * u.data[k];
    xm.data[k] -= h * u.data[k];
  }
  Tape tp(false), tm(false);
  const auto yp = g(tp, tp.input(xp));
  const auto ym = g(tm, tm.input(xm));
  for (std::size_t k = 0; k < tape.value(y).size(); ++k) {
    const double fd = (tp.value(yp).data[k] - tm.value(ym).data[k]) / (2 * h);
    CHECK(tape.tangent(y).data[k] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("a frozen parameter set accumulates no gradients") {
  Rng rng(8);
  ParamSet ps;
  Param& w = ps.add_normal("w", 2 * 1 * 9, 0.5, rng);
  Param& b = ps.add_normal("b", 2, 0.5, rng);
  ps.set_frozen(true);
  Tape tape(true);
  const auto x = tape.input(random_tensor({1, 1, 4, 4}, rng), true);
  const auto y = tape.conv(x, w, b, 2, 3, ps);
  const Tensor seed(tape.value(y).shape, 1.0);
  tape.backward(y, &seed);
  CHECK_FALSE(tape.grad(x).empty());
  for (double v : ps.flat_grads()) CHECK(v == 0.0);
}

TEST_CASE("shape mismatches are rejected") {
  Rng rng(9);
  ParamSet ps;
  Param& w = ps.add_normal("w", 5, 0.5, rng);
  Param& b = ps.add_normal("b", 2, 0.5, rng);
  Tape tape(false);
  const auto x = tape.input(Tensor({1, 1, 4, 4}));
  CHECK_THROWS_AS(tape.conv(x, w, b, 2, 3, ps), std::invalid_argument);
  CHECK_THROWS_AS(tape.linear(x, w, b, 2, ps), std::invalid_argument);
  const auto odd = tape.input(Tensor({1, 1, 3, 4}));
  CHECK_THROWS_AS(tape.avgpool2(odd), std::invalid_argument);
  const auto other = tape.input(Tensor({2, 1, 4, 4}));
  CHECK_THROWS_AS(tape.concat({x, other}), std::invalid_argument);
}

TEST_CASE("Adam takes a bias-corrected first step of size lr") {
  ParamSet ps;
  Param& p = ps.add("p", 3);
  p.value = {1.0, -2.0, 0.5};
  p.grad = {0.3, -4.0, 0.0};
  Adam opt(0.01, 0.5, 0.9);
  opt.step(ps);
  CHECK(p.value[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(p.value[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
  CHECK(p.value[2] == 0.5);
  CHECK(opt.steps() == 1);

  // Minimizes a quadratic.
  ParamSet q;
  Param& x = q.add_constant("x", 1, 5.0);
  Adam slow(0.05);
  for (int k = 0; k < 2000; ++k) {
    q.zero_grad();
    x.grad[0] = 2.0 * (x.value[0] - 1.5);
    slow.step(q);
  }
  CHECK(x.value[0] == doctest::Approx(1.5).epsilon(1e-2));
}

TEST_CASE("flat parameter round trip") {
  Rng rng(10);
  ParamSet ps;
  ps.add_normal("a", 7, 1.0, rng);
  ps.add_normal("b", 3, 1.0, rng);
  const auto v = ps.flat_values();
  CHECK(v.size() == ps.scalar_count());
  ParamSet other;
  other.add("a", 7);
  other.add("b", 3);
  other.set_flat_values(v);
  CHECK(other.flat_values() == v);
  CHECK_THROWS_AS(other.set_flat_values(std::vector<double>(9)), std::invalid_argument);
}
