#include "pyrotime/nn/tape.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "pyrotime/kernels.hpp"

namespace pyrotime::nn {

namespace {

// Reusable per-thread buffers; slots keep concurrently live buffers apart.
double* scratch(int slot, std::size_t n) {
  thread_local std::array<std::vector<double>, 4> buffers;
  auto& b = buffers[slot];
  if (b.size() < n) b.resize(n);
  return b.data();
}

// Columns [lo, hi) of an output row whose shifted source column stays inside.
inline void valid_span(int w, int shift, int& lo, int& hi) {
  lo = std::max(0, -shift);
  hi = std::min(w, w - shift);
}

void im2col(const double* x, int cin, int h, int w, int k, double* cols) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < cin; ++c) {
    const double* plane = x + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * hw;
        const int shift = kx - pad;
        int lo, hi;
        valid_span(w, shift, lo, hi);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          double* dst = row + static_cast<std::size_t>(y) * w;
          if (sy < 0 || sy >= h || lo >= hi) {
            std::fill(dst, dst + w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(sy) * w + shift;
          std::fill(dst, dst + lo, 0.0);
          std::copy(src + lo, src + hi, dst + lo);
          std::fill(dst + hi, dst + w, 0.0);
        }
      }
    }
  }
}

void col2im_add(const double* cols, int cin, int h, int w, int k, double* gx) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < cin; ++c) {
    double* plane = gx + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * hw;
        const int shift = kx - pad;
        int lo, hi;
        valid_span(w, shift, lo, hi);
        if (lo >= hi) continue;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          const double* src = row + static_cast<std::size_t>(y) * w;
          double* dst = plane + static_cast<std::size_t>(sy) * w + shift;
          for (int xx = lo; xx < hi; ++xx) dst[xx] += src[xx];
        }
      }
    }
  }
}

void add_into(Tensor& dst, const double* src, std::size_t offset, std::size_t n) {
  kernels::axpy(1.0, src, dst.data.data() + offset, n);
}

}  // namespace

Tape::Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_buffer(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.empty()) n.grad = Tensor(n.val.shape);
  return n.grad;
}

Tensor& Tape::dgrad_buffer(Var v) {
  Node& n = nodes_[v.id];
  if (n.dgrad.empty()) n.dgrad = Tensor(n.val.shape);
  return n.dgrad;
}

Tape::Var Tape::input(Tensor value, bool requires_grad) {
  Node n;
  n.val = std::move(value);
  n.needs_grad = requires_grad;
  return push(std::move(n));
}

Tape::Var Tape::input(Tensor value, Tensor tangent, bool requires_grad) {
  if (!(tangent.shape == value.shape)) throw std::invalid_argument("Tape::input: tangent shape");
  Node n;
  n.val = std::move(value);
  n.dot = std::move(tangent);
  n.has_dot = true;
  n.needs_grad = requires_grad;
  return push(std::move(n));
}

Tape::Var Tape::conv(Var x, Param& w, Param& b, int cout, int k, const ParamSet& owner) {
  const Shape s = nodes_[x.id].val.shape;
  const int cin = s.c;
  const std::size_t kk = static_cast<std::size_t>(cin) * k * k;
  const std::size_t hw = s.plane();
  if (k < 1 || k % 2 == 0) throw std::invalid_argument("conv: kernel size must be odd");
  if (w.value.size() != kk * cout || b.value.size() != static_cast<std::size_t>(cout)) {
    throw std::invalid_argument("conv: parameter " + w.name + " does not match input " +
                                to_string(s));
  }
  Node out;
  out.val = Tensor({s.n, cout, s.h, s.w});
  double* cols = k == 1 ? nullptr : scratch(0, kk * hw);
  auto apply = [&](const double* src, double* dst, bool bias) {
    const double* c = src;
    if (k > 1) {
      im2col(src, cin, s.h, s.w, k, cols);
      c = cols;
    }
    kernels::gemm(cout, static_cast<int>(hw), static_cast<int>(kk), w.value.data(), c, dst, false);
    if (bias) {
      for (int o = 0; o < cout; ++o) {
        double* row = dst + o * hw;
        for (std::size_t p = 0; p < hw; ++p) row[p] += b.value[o];
      }
    }
  };
  {
    const Node& in = nodes_[x.id];
    for (int n = 0; n < s.n; ++n) apply(in.val.sample(n), out.val.sample(n), true);
    if (in.has_dot) {
      out.dot = Tensor(out.val.shape);
      out.has_dot = true;
      for (int n = 0; n < s.n; ++n) apply(in.dot.sample(n), out.dot.sample(n), false);
    }
    out.needs_grad = in.needs_grad || !owner.frozen();
  }
  const bool train = !owner.frozen();
  const Var y = push(std::move(out));
  if (!grad_enabled_ || !nodes_[y.id].needs_grad) return y;

  steps_.push_back([this, x, y, &w, &b, cout, k, kk, hw, s, cin, train] {
    Node& o = nodes_[y.id];
    if (o.grad.empty() && o.dgrad.empty()) return;
    const bool need_x = nodes_[x.id].needs_grad;
    std::vector<double> wt(kk * cout);
    for (int c = 0; c < cout; ++c)
      for (std::size_t j = 0; j < kk; ++j) wt[j * cout + c] = w.value[c * kk + j];
    double* cols = scratch(0, kk * hw);
    double* tmp = scratch(1, kk * hw);
    double* gt = scratch(2, hw * cout);
    double* dw = scratch(3, kk * cout);

    auto backprop = [&](const Tensor& gy, const Tensor& src, Tensor* gx, bool bias) {
      for (int n = 0; n < s.n; ++n) {
        const double* g = gy.sample(n);
        if (train) {
          const double* cb = src.sample(n);
          if (k > 1) {
            im2col(cb, cin, s.h, s.w, k, cols);
            cb = cols;
          }
          // dW^T [kk x cout] = cols [kk x hw] * g^T [hw x cout]
          for (int c = 0; c < cout; ++c)
            for (std::size_t p = 0; p < hw; ++p) gt[p * cout + c] = g[c * hw + p];
          kernels::gemm(static_cast<int>(kk), cout, static_cast<int>(hw), cb, gt, dw, false);
          for (int c = 0; c < cout; ++c)
            for (std::size_t j = 0; j < kk; ++j) w.grad[c * kk + j] += dw[j * cout + c];
          if (bias) {
            for (int c = 0; c < cout; ++c) {
              double acc = 0.0;
              for (std::size_t p = 0; p < hw; ++p) acc += g[c * hw + p];
              b.grad[c] += acc;
            }
          }
        }
        if (gx) {
          kernels::gemm(static_cast<int>(kk), static_cast<int>(hw), cout, wt.data(), g, tmp, false);
          if (k > 1) {
            col2im_add(tmp, cin, s.h, s.w, k, gx->sample(n));
          } else {
            add_into(*gx, tmp, n * s.per_sample(), kk * hw);
          }
        }
      }
    };
    if (!o.grad.empty()) backprop(o.grad, nodes_[x.id].val, need_x ? &grad_buffer(x) : nullptr, true);
    if (!o.dgrad.empty()) {
      backprop(o.dgrad, nodes_[x.id].dot, need_x ? &dgrad_buffer(x) : nullptr, false);
    }
  });
  return y;
}

Tape::Var Tape::elu(Var x) {
  Node out;
  {
    const Node& in = nodes_[x.id];
    out.val = Tensor(in.val.shape);
    for (std::size_t q = 0; q < in.val.size(); ++q) {
      const double v = in.val.data[q];
      out.val.data[q] = v > 0.0 ? v : std::expm1(v);
    }
    if (in.has_dot) {
      out.has_dot = true;
      out.dot = Tensor(in.val.shape);
      for (std::size_t q = 0; q < in.val.size(); ++q) {
        const double v = in.val.data[q];
        out.dot.data[q] = (v > 0.0 ? 1.0 : std::exp(v)) * in.dot.data[q];
      }
    }
    out.needs_grad = in.needs_grad;
  }
  const Var y = push(std::move(out));
  if (!grad_enabled_ || !nodes_[y.id].needs_grad) return y;
  steps_.push_back([this, x, y] {
    Node& o = nodes_[y.id];
    if (o.grad.empty() && o.dgrad.empty()) return;
    const Tensor& xv = nodes_[x.id].val;
    Tensor& gx = grad_buffer(x);
    for (std::size_t q = 0; q < xv.size(); ++q) {
      const double v = xv.data[q];
      const double d1 = v > 0.0 ? 1.0 : std::exp(v);
      double g = o.grad.empty() ? 0.0 : o.grad.data[q] * d1;
      if (!o.dgrad.empty()) {
        const double d2 = v > 0.0 ? 0.0 : std::exp(v);
        g += o.dgrad.data[q] * d2 * nodes_[x.id].dot.data[q];
      }
      gx.data[q] += g;
    }
    if (!o.dgrad.empty()) {
      Tensor& gdx = dgrad_buffer(x);
      for (std::size_t q = 0; q < xv.size(); ++q) {
        gdx.data[q] += o.dgrad.data[q] * (xv.data[q] > 0.0 ? 1.0 : std::exp(xv.data[q]));
      }
    }
  });
  return y;
}

Tape::Var Tape::sigmoid(Var x) {
  Node out;
  {
    const Node& in = nodes_[x.id];
    if (in.has_dot) throw std::invalid_argument("sigmoid: tangents are not supported");
    out.val = Tensor(in.val.shape);
    for (std::size_t q = 0; q < in.val.size(); ++q) {
      out.val.data[q] = 1.0 / (1.0 + std::exp(-in.val.data[q]));
    }
    out.needs_grad = in.needs_grad;
  }
  const Var y = push(std::move(out));
  if (!grad_enabled_ || !nodes_[y.id].needs_grad) return y;
  steps_.push_back([this, x, y] {
    Node& o = nodes_[y.id];
    if (o.grad.empty()) return;
    Tensor& gx = grad_buffer(x);
    for (std::size_t q = 0; q < o.val.size(); ++q) {
      const double s = o.val.data[q];
      gx.data[q] += o.grad.data[q] * s * (1.0 - s);
    }
  });
  return y;
}

Tape::Var Tape::concat(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape s0 = nodes_[xs[0].id].val.shape;
  int channels = 0;
  bool any_dot = false, needs = false;
  for (Var v : xs) {
    const Shape s = nodes_[v.id].val.shape;
    if (s.n != s0.n || s.h != s0.h || s.w != s0.w) {
      throw std::invalid_argument("concat: shape mismatch " + to_string(s) + " vs " + to_string(s0));
    }
    channels += s.c;
    any_dot = any_dot || nodes_[v.id].has_dot;
    needs = needs || nodes_[v.id].needs_grad;
  }
  Node out;
  out.val = Tensor({s0.n, channels, s0.h, s0.w});
  if (any_dot) {
    out.dot = Tensor(out.val.shape);
    out.has_dot = true;
  }
  out.needs_grad = needs;
  const std::size_t hw = s0.plane();
  for (int n = 0; n < s0.n; ++n) {
    std::size_t off = 0;
    for (Var v : xs) {
      const Node& in = nodes_[v.id];
      const std::size_t len = in.val.shape.c * hw;
      std::copy(in.val.sample(n), in.val.sample(n) + len, out.val.sample(n) + off);
      if (in.has_dot) std::copy(in.dot.sample(n), in.dot.sample(n) + len, out.dot.sample(n) + off);
      off += len;
    }
  }
  const Var y = push(std::move(out));
  if (!grad_enabled_ || !needs) return y;
  steps_.push_back([this, xs, y, hw] {
    Node& o = nodes_[y.id];
    for (int n = 0; n < o.val.shape.n; ++n) {
      std::size_t off = 0;
      for (Var v : xs) {
        const std::size_t len = nodes_[v.id].val.shape.c * hw;
        if (nodes_[v.id].needs_grad) {
          const std::size_t base = n * nodes_[v.id].val.shape.per_sample();
          if (!o.grad.empty()) add_into(grad_buffer(v), o.grad.sample(n) + off, base, len);
          if (!o.dgrad.empty() && nodes_[v.id].has_dot) {
            add_into(dgrad_buffer(v), o.dgrad.sample(n) + off, base, len);
          }
        }
        off += len;
      }
    }
  });
  return y;
}

Tape::Var Tape::avgpool2(Var x) {
  const Shape s = nodes_[x.id].val.shape;
  if (s.h % 2 || s.w % 2) throw std::invalid_argument("avgpool2: odd spatial size " + to_string(s));
  const Shape t{s.n, s.c, s.h / 2, s.w / 2};
  auto pool = [&](const Tensor& src, Tensor& dst) {
    for (int p = 0; p < s.n * s.c; ++p) {
      const double* a = src.data.data() + p * s.plane();
      double* d = dst.data.data() + p * t.plane();
      for (int y = 0; y < t.h; ++y)
        for (int xx = 0; xx < t.w; ++xx) {
          const double* q = a + 2 * y * s.w + 2 * xx;
          d[y * t.w + xx] = 0.25 * (q[0] + q[1] + q[s.w] + q[s.w + 1]);
        }
    }
  };
  Node out;
  out.val = Tensor(t);
  pool(nodes_[x.id].val, out.val);
  if (nodes_[x.id].has_dot) {
    out.dot = Tensor(t);
    out.has_dot = true;
    pool(nodes_[x.id].dot, out.dot);
  }
  out.needs_grad = nodes_[x.id].needs_grad;
  const Var y = push(std::move(out));
  if (!grad_enabled_ || !nodes_[y.id].needs_grad) return y;
  steps_.push_back([this, x, y, s, t] {
    auto unpool = [&](const Tensor& g, Tensor& dst) {
      for (int p = 0; p < s.n * s.c; ++p) {
        const double* a = g.data.data() + p * t.plane();
        double* d = dst.data.data() + p * s.plane();
        for (int yy = 0; yy < s.h; ++yy)
          for (int xx = 0; xx < s.w; ++xx) d[yy * s.w + xx] += 0.25 * a[(yy / 2) * t.w + xx / 2];
      }
    };
    Node& o = nodes_[y.id];
    if (!o.grad.empty()) unpool(o.grad, grad_buffer(x));
    if (!o.dgrad.empty()) unpool(o.dgrad, dgrad_buffer(x));
  });
  return y;
}

Tape::Var Tape::upsample2(Var x) {
  const Shape s = nodes_[x.id].val.shape;
  if (nodes_[x.id].has_dot) throw std::invalid_argument("upsample2: tangents are not supported");
  const Shape t{s.n, s.c, s.h * 2, s.w * 2};
  Node out;
  out.val = Tensor(t);
  for (int p = 0; p < s.n * s.c; ++p) {
    const double* a = nodes_[x.id].val.data.data() + p * s.plane();
    double* d = out.val.data.data() + p * t.plane();
    for (int yy = 0; yy < t.h; ++yy)
      for (int xx = 0; xx < t.w; ++xx) d[yy * t.w + xx] = a[(yy / 2) * s.w + xx / 2];
  }
  out.needs_grad = nodes_[x.id].needs_grad;
  const Var y = push(std::move(out));
  if (!grad_enabled_ || !nodes_[y.id].needs_grad) return y;
  steps_.push_back([this, x, y, s, t] {
    Node& o = nodes_[y.id];
    if (o.grad.empty()) return;
    Tensor& gx = grad_buffer(x);
    for (int p = 0; p < s.n * s.c; ++p) {
      const double* a = o.grad.data.data() + p * t.plane();
      double* d = gx.data.data() + p * s.plane();
      for (int yy = 0; yy < t.h; ++yy)
        for (int xx = 0; xx < t.w; ++xx) d[(yy / 2) * s.w + xx / 2] += a[yy * t.w + xx];
    }
  });
  return y;
}

Tape::Var Tape::cin(Var x, const Tensor& z, Param& wg, Param& bg, Param& wb, Param& bb,
                    const ParamSet& owner) {
  constexpr double kEps = 1e-5;
  const Shape s = nodes_[x.id].val.shape;
  if (nodes_[x.id].has_dot) throw std::invalid_argument("cin: tangents are not supported");
  const int nz = z.shape.c;
  if (z.shape.n != s.n || z.shape.plane() != 1) throw std::invalid_argument("cin: latent batch shape");
  const std::size_t cz = static_cast<std::size_t>(s.c) * nz;
  if (wg.value.size() != cz || wb.value.size() != cz || bg.value.size() != std::size_t(s.c) ||
      bb.value.size() != std::size_t(s.c)) {
    throw std::invalid_argument("cin: parameter " + wg.name + " does not match input " + to_string(s));
  }
  const std::size_t hw = s.plane();
  auto xhat = std::make_shared<std::vector<double>>(s.size());
  auto inv = std::make_shared<std::vector<double>>(static_cast<std::size_t>(s.n) * s.c);
  auto gamma = std::make_shared<std::vector<double>>(inv->size());
  Node out;
  out.val = Tensor(s);
  const Tensor& xv = nodes_[x.id].val;
  for (int n = 0; n < s.n; ++n) {
    const double* zn = z.sample(n);
    for (int c = 0; c < s.c; ++c) {
      const std::size_t pc = static_cast<std::size_t>(n) * s.c + c;
      const double g = bg.value[c] + kernels::dot(wg.value.data() + c * nz, zn, nz);
      const double be = bb.value[c] + kernels::dot(wb.value.data() + c * nz, zn, nz);
      const double* a = xv.channel(n, c);
      double mean = 0.0;
      for (std::size_t p = 0; p < hw; ++p) mean += a[p];
      mean /= hw;
      double var = 0.0;
      for (std::size_t p = 0; p < hw; ++p) var += (a[p] - mean) * (a[p] - mean);
      var /= hw;
      const double iv = 1.0 / std::sqrt(var + kEps);
      (*inv)[pc] = iv;
      (*gamma)[pc] = g;
      double* xh = xhat->data() + pc * hw;
      double* d = out.val.channel(n, c);
      for (std::size_t p = 0; p < hw; ++p) {
        xh[p] = (a[p] - mean) * iv;
        d[p] = g * xh[p] + be;
      }
    }
  }
  const bool train = !owner.frozen();
  out.needs_grad = nodes_[x.id].needs_grad || train;
  const Var y = push(std::move(out));
  if (!grad_enabled_ || !nodes_[y.id].needs_grad) return y;
  steps_.push_back([this, x, y, z, &wg, &bg, &wb, &bb, xhat, inv, gamma, s, nz, hw, train] {
    Node& o = nodes_[y.id];
    if (o.grad.empty()) return;
    const bool need_x = nodes_[x.id].needs_grad;
    std::vector<double> gxh(hw);
    for (int n = 0; n < s.n; ++n) {
      const double* zn = z.sample(n);
      for (int c = 0; c < s.c; ++c) {
        const std::size_t pc = static_cast<std::size_t>(n) * s.c + c;
        const double* g = o.grad.channel(n, c);
        const double* xh = xhat->data() + pc * hw;
        double sg = 0.0, sgx = 0.0;
        for (std::size_t p = 0; p < hw; ++p) {
          sg += g[p];
          sgx += g[p] * xh[p];
        }
        if (train) {
          kernels::axpy(sgx, zn, wg.grad.data() + c * nz, nz);
          bg.grad[c] += sgx;
          kernels::axpy(sg, zn, wb.grad.data() + c * nz, nz);
          bb.grad[c] += sg;
        }
        if (need_x) {
          const double gm = (*gamma)[pc];
          const double m1 = gm * sg / hw;
          const double m2 = gm * sgx / hw;
          double* dx = grad_buffer(x).channel(n, c);
          const double iv = (*inv)[pc];
          for (std::size_t p = 0; p < hw; ++p) dx[p] += iv * (gm * g[p] - m1 - xh[p] * m2);
        }
      }
    }
  });
  return y;
}

Tape::Var Tape::linear(Var x, Param& w, Param& b, int out_features, const ParamSet& owner) {
  const Shape s = nodes_[x.id].val.shape;
  const std::size_t f = s.per_sample();
  if (w.value.size() != f * out_features || b.value.size() != std::size_t(out_features)) {
    throw std::invalid_argument("linear: parameter " + w.name + " does not match input " +
                                to_string(s));
  }
  const Shape t{s.n, out_features, 1, 1};
  Node out;
  out.val = Tensor(t);
  {
    const Node& in = nodes_[x.id];
    for (int n = 0; n < s.n; ++n)
      for (int o = 0; o < out_features; ++o)
        out.val.sample(n)[o] = b.value[o] + kernels::dot(w.value.data() + o * f, in.val.sample(n), f);
    if (in.has_dot) {
      out.has_dot = true;
      out.dot = Tensor(t);
      for (int n = 0; n < s.n; ++n)
        for (int o = 0; o < out_features; ++o)
          out.dot.sample(n)[o] = kernels::dot(w.value.data() + o * f, in.dot.sample(n), f);
    }
    out.needs_grad = in.needs_grad || !owner.frozen();
  }
  const bool train = !owner.frozen();
  const Var y = push(std::move(out));
  if (!grad_enabled_ || !nodes_[y.id].needs_grad) return y;
  steps_.push_back([this, x, y, &w, &b, out_features, f, train] {
    Node& o = nodes_[y.id];
    if (o.grad.empty() && o.dgrad.empty()) return;
    const bool need_x = nodes_[x.id].needs_grad;
    const int batch = o.val.shape.n;
    auto backprop = [&](const Tensor& gy, const Tensor& src, Tensor* gx, bool bias) {
      for (int n = 0; n < batch; ++n)
        for (int k = 0; k < out_features; ++k) {
          const double g = gy.sample(n)[k];
          if (g == 0.0) continue;
          if (train) {
            kernels::axpy(g, src.sample(n), w.grad.data() + k * f, f);
            if (bias) b.grad[k] += g;
          }
          if (gx) kernels::axpy(g, w.value.data() + k * f, gx->sample(n), f);
        }
    };
    if (!o.grad.empty()) backprop(o.grad, nodes_[x.id].val, need_x ? &grad_buffer(x) : nullptr, true);
    if (!o.dgrad.empty()) {
      backprop(o.dgrad, nodes_[x.id].dot, need_x ? &dgrad_buffer(x) : nullptr, false);
    }
  });
  return y;
}

void Tape::backward(Var out, const Tensor* value_seed, const Tensor* tangent_seed) {
  if (!grad_enabled_) throw std::logic_error("Tape::backward on a tape without gradients");
  const Shape s = nodes_[out.id].val.shape;
  if (value_seed) {
    if (!(value_seed->shape == s)) throw std::invalid_argument("backward: seed shape");
    Tensor& g = grad_buffer(out);
    kernels::axpy(1.0, value_seed->data.data(), g.data.data(), g.size());
  }
  if (tangent_seed) {
    if (!(tangent_seed->shape == s) || !nodes_[out.id].has_dot) {
      throw std::invalid_argument("backward: tangent seed without a tangent output");
    }
    Tensor& g = dgrad_buffer(out);
    kernels::axpy(1.0, tangent_seed->data.data(), g.data.data(), g.size());
  }
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

}  // namespace pyrotime::nn
