#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pyrotime::nn {

/// Batch-major 4-D shape [n, c, h, w].
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * c * static_cast<std::size_t>(h) * w;
  }
  std::size_t per_sample() const { return static_cast<std::size_t>(c) * h * w; }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Dense double tensor in [n][c][h][w] order.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}
  Tensor(Shape s, std::vector<double> values) : shape(s), data(std::move(values)) {
    if (data.size() != shape.size()) throw std::invalid_argument("Tensor: size mismatch");
  }

  bool empty() const { return data.empty(); }
  std::size_t size() const { return data.size(); }
  double* sample(int b) { return data.data() + b * shape.per_sample(); }
  const double* sample(int b) const { return data.data() + b * shape.per_sample(); }
  double* channel(int b, int c) { return sample(b) + c * shape.plane(); }
  const double* channel(int b, int c) const { return sample(b) + c * shape.plane(); }
};

}  // namespace pyrotime::nn
