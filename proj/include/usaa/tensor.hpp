#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace usaa::nn {

struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  bool operator==(const Shape&) const = default;
};

// Dense NCHW tensor.
template <typename Real>
struct Tensor {
  Shape shape;
  std::vector<Real> data;

  Tensor() = default;
  explicit Tensor(Shape s, Real fill = Real(0)) : shape(s), data(s.numel(), fill) {}
  Tensor(int n, int c, int h, int w, Real fill = Real(0))
      : Tensor(Shape{n, c, h, w}, fill) {}

  std::size_t numel() const { return data.size(); }
  bool empty() const { return data.empty(); }

  std::size_t index(int in, int ic, int y, int x) const {
    return ((static_cast<std::size_t>(in) * shape.c + ic) * shape.h + y) * shape.w + x;
  }
  Real& at(int in, int ic, int y, int x) { return data[index(in, ic, y, x)]; }
  Real at(int in, int ic, int y, int x) const { return data[index(in, ic, y, x)]; }

  bool finite() const {
    for (Real v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<Other>(data[i]);
    return out;
  }
};

}  // namespace usaa::nn
