#pragma once

#include <functional>
#include <vector>

#include "pyrotime/nn/params.hpp"
#include "pyrotime/nn/tensor.hpp"

namespace pyrotime::nn {

/// Reverse-mode recording of a forward pass.
///
/// Besides values, a node may carry a tangent: the directional derivative of
/// its value along a tangent attached to an input. Backward passes propagate
/// adjoints of both values and tangents, so a loss defined on output tangents
/// (a directional input derivative) can be differentiated with respect to
/// the parameters. Only the ops used by the critic support tangents.
class Tape {
 public:
  struct Var {
    int id = -1;
  };

  /// With grad_enabled false nothing is recorded for backward.
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(Tensor value, bool requires_grad = false);
  Var input(Tensor value, Tensor tangent, bool requires_grad);

  /// Square kernel convolution with zero padding k/2 and unit stride.
  /// `w` holds [cout][cin][k][k], `b` holds [cout].
  Var conv(Var x, Param& w, Param& b, int cout, int k, const ParamSet& owner);
  Var elu(Var x);
  Var sigmoid(Var x);
  Var concat(const std::vector<Var>& xs);
  Var avgpool2(Var x);
  Var upsample2(Var x);
  /// Instance normalization with per-sample scale and shift computed from
  /// the latent batch `z` ([n][nz]): gamma = wg z + bg, beta = wb z + bb.
  Var cin(Var x, const Tensor& z, Param& wg, Param& bg, Param& wb, Param& bb,
          const ParamSet& owner);
  /// Fully connected layer over the flattened sample; output [n, out, 1, 1].
  Var linear(Var x, Param& w, Param& b, int out, const ParamSet& owner);

  const Tensor& value(Var v) const { return nodes_[v.id].val; }
  const Tensor& tangent(Var v) const { return nodes_[v.id].dot; }
  bool has_tangent(Var v) const { return nodes_[v.id].has_dot; }
  /// Adjoint of the value; empty when nothing reached the node.
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }

  /// Seeds the adjoints of `out` (either may be null) and runs all recorded
  /// backward steps in reverse order.
  void backward(Var out, const Tensor* value_seed, const Tensor* tangent_seed = nullptr);

 private:
  struct Node {
    Tensor val;
    Tensor dot;
    Tensor grad;
    Tensor dgrad;
    bool has_dot = false;
    bool needs_grad = false;
  };

  Var push(Node node);
  Node& node(Var v) { return nodes_[v.id]; }
  Tensor& grad_buffer(Var v);
  Tensor& dgrad_buffer(Var v);

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::vector<std::function<void()>> steps_;
};

}  // namespace pyrotime::nn
