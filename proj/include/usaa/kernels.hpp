#pragma once

// Convolution and pooling kernels. `serial` holds direct loop-nest reference
// implementations; `omp` holds the OpenMP production kernels. Both produce
// the same results up to floating-point summation order, and each is
// deterministic regardless of thread count (no cross-thread reductions).

#include <vector>

#include "usaa/tensor.hpp"

namespace usaa::nn {

struct ConvGeometry {
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  int dilation = 1;
  int groups = 1;

  int out_size(int in) const {
    return (in + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1;
  }
};

inline constexpr int kPoolWindow = 3;
inline constexpr int kPoolPadding = 1;

inline int pool_out_size(int in, int stride) {
  return (in + 2 * kPoolPadding - kPoolWindow) / stride + 1;
}

enum class KernelBackend { kSerial, kParallel };

void set_kernel_backend(KernelBackend backend);
KernelBackend kernel_backend();

namespace detail {
// Throws usaa::Error(kShape) when `weight` cannot convolve `input`.
void check_conv_shapes(Shape input, Shape weight, const ConvGeometry& g);
}  // namespace detail

#define USAA_DECLARE_KERNELS                                                                   \
  template <typename Real>                                                                     \
  Tensor<Real> conv2d_forward(const Tensor<Real>& x, const Tensor<Real>& weight,               \
                              const ConvGeometry& g);                                          \
  template <typename Real>                                                                     \
  Tensor<Real> conv2d_backward_input(const Tensor<Real>& grad_out, const Tensor<Real>& weight, \
                                     const ConvGeometry& g, Shape input_shape);                \
  template <typename Real>                                                                     \
  Tensor<Real> conv2d_backward_weight(const Tensor<Real>& grad_out, const Tensor<Real>& x,     \
                                      const ConvGeometry& g, Shape weight_shape);              \
  /* Average pooling excludes padded cells from the divisor. */                                \
  template <typename Real>                                                                     \
  Tensor<Real> avg_pool3_forward(const Tensor<Real>& x, int stride);                           \
  template <typename Real>                                                                     \
  Tensor<Real> avg_pool3_backward(const Tensor<Real>& grad_out, Shape input_shape, int stride); \
  /* `argmax` receives the flat input index chosen for each output cell. */                    \
  template <typename Real>                                                                     \
  Tensor<Real> max_pool3_forward(const Tensor<Real>& x, int stride, std::vector<int>& argmax); \
  template <typename Real>                                                                     \
  Tensor<Real> max_pool3_backward(const Tensor<Real>& grad_out, const std::vector<int>& argmax, \
                                  Shape input_shape);

namespace serial {
USAA_DECLARE_KERNELS
}  // namespace serial

namespace omp {
USAA_DECLARE_KERNELS
}  // namespace omp

#undef USAA_DECLARE_KERNELS

// Dispatch to the selected backend.
template <typename Real>
Tensor<Real> conv2d_forward(const Tensor<Real>& x, const Tensor<Real>& weight,
                            const ConvGeometry& g) {
  return kernel_backend() == KernelBackend::kSerial ? serial::conv2d_forward(x, weight, g)
                                                    : omp::conv2d_forward(x, weight, g);
}
template <typename Real>
Tensor<Real> conv2d_backward_input(const Tensor<Real>& grad_out, const Tensor<Real>& weight,
                                   const ConvGeometry& g, Shape input_shape) {
  return kernel_backend() == KernelBackend::kSerial
             ? serial::conv2d_backward_input(grad_out, weight, g, input_shape)
             : omp::conv2d_backward_input(grad_out, weight, g, input_shape);
}
template <typename Real>
Tensor<Real> conv2d_backward_weight(const Tensor<Real>& grad_out, const Tensor<Real>& x,
                                    const ConvGeometry& g, Shape weight_shape) {
  return kernel_backend() == KernelBackend::kSerial
             ? serial::conv2d_backward_weight(grad_out, x, g, weight_shape)
             : omp::conv2d_backward_weight(grad_out, x, g, weight_shape);
}
template <typename Real>
Tensor<Real> avg_pool3_forward(const Tensor<Real>& x, int stride) {
  return kernel_backend() == KernelBackend::kSerial ? serial::avg_pool3_forward(x, stride)
                                                    : omp::avg_pool3_forward(x, stride);
}
template <typename Real>
Tensor<Real> avg_pool3_backward(const Tensor<Real>& grad_out, Shape input_shape, int stride) {
  return kernel_backend() == KernelBackend::kSerial
             ? serial::avg_pool3_backward(grad_out, input_shape, stride)
             : omp::avg_pool3_backward(grad_out, input_shape, stride);
}
template <typename Real>
Tensor<Real> max_pool3_forward(const Tensor<Real>& x, int stride, std::vector<int>& argmax) {
  return kernel_backend() == KernelBackend::kSerial ? serial::max_pool3_forward(x, stride, argmax)
                                                    : omp::max_pool3_forward(x, stride, argmax);
}
template <typename Real>
Tensor<Real> max_pool3_backward(const Tensor<Real>& grad_out, const std::vector<int>& argmax,
                                Shape input_shape) {
  return kernel_backend() == KernelBackend::kSerial
             ? serial::max_pool3_backward(grad_out, argmax, input_shape)
             : omp::max_pool3_backward(grad_out, argmax, input_shape);
}

}  // namespace usaa::nn
