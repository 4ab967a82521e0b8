// Reference kernels: straight loop nests over every output (or input) cell.
// Kept deliberately literal so they can serve as the oracle for the OpenMP
// kernels.

#include <atomic>
#include <fmt/format.h>
#include <limits>

#include "usaa/error.hpp"
#include "usaa/kernels.hpp"

namespace usaa::nn {
namespace {

std::atomic<KernelBackend> g_backend{KernelBackend::kParallel};

}  // namespace

void set_kernel_backend(KernelBackend backend) { g_backend.store(backend); }
KernelBackend kernel_backend() { return g_backend.load(); }

namespace detail {

void check_conv_shapes(Shape x, Shape w, const ConvGeometry& g) {
  if (g.groups < 1 || x.c % g.groups != 0 || w.n % g.groups != 0 ||
      w.c != x.c / g.groups || w.h != g.kernel || w.w != g.kernel) {
    throw Error(ErrorCode::kShape,
                fmt::format("conv weight ({},{},{},{}) incompatible with input channels {} "
                            "groups {} kernel {}",
                            w.n, w.c, w.h, w.w, x.c, g.groups, g.kernel));
  }
  if (g.out_size(x.h) < 1 || g.out_size(x.w) < 1) {
    throw Error(ErrorCode::kShape, "conv output would be empty");
  }
}

}  // namespace detail

namespace serial {

using detail::check_conv_shapes;

template <typename Real>
Tensor<Real> conv2d_forward(const Tensor<Real>& x, const Tensor<Real>& weight,
                            const ConvGeometry& g) {
  check_conv_shapes(x.shape, weight.shape, g);
  const int cout = weight.shape.n;
  const int cin_g = weight.shape.c;
  const int cout_g = cout / g.groups;
  Tensor<Real> y(x.shape.n, cout, g.out_size(x.shape.h), g.out_size(x.shape.w));
  for (int n = 0; n < y.shape.n; ++n)
    for (int oc = 0; oc < cout; ++oc)
      for (int oy = 0; oy < y.shape.h; ++oy)
        for (int ox = 0; ox < y.shape.w; ++ox) {
          Real acc = 0;
          const int group = oc / cout_g;
          for (int icg = 0; icg < cin_g; ++icg)
            for (int ky = 0; ky < g.kernel; ++ky)
              for (int kx = 0; kx < g.kernel; ++kx) {
                const int iy = oy * g.stride - g.padding + ky * g.dilation;
                const int ix = ox * g.stride - g.padding + kx * g.dilation;
                if (iy < 0 || iy >= x.shape.h || ix < 0 || ix >= x.shape.w) continue;
                acc += weight.at(oc, icg, ky, kx) * x.at(n, group * cin_g + icg, iy, ix);
              }
          y.at(n, oc, oy, ox) = acc;
        }
  return y;
}

template <typename Real>
Tensor<Real> conv2d_backward_input(const Tensor<Real>& grad_out, const Tensor<Real>& weight,
                                   const ConvGeometry& g, Shape input_shape) {
  check_conv_shapes(input_shape, weight.shape, g);
  const int cin_g = weight.shape.c;
  const int cout_g = weight.shape.n / g.groups;
  Tensor<Real> gx(input_shape);
  for (int n = 0; n < grad_out.shape.n; ++n)
    for (int oc = 0; oc < grad_out.shape.c; ++oc)
      for (int oy = 0; oy < grad_out.shape.h; ++oy)
        for (int ox = 0; ox < grad_out.shape.w; ++ox) {
          const Real go = grad_out.at(n, oc, oy, ox);
          const int group = oc / cout_g;
          for (int icg = 0; icg < cin_g; ++icg)
            for (int ky = 0; ky < g.kernel; ++ky)
              for (int kx = 0; kx < g.kernel; ++kx) {
                const int iy = oy * g.stride - g.padding + ky * g.dilation;
                const int ix = ox * g.stride - g.padding + kx * g.dilation;
                if (iy < 0 || iy >= input_shape.h || ix < 0 || ix >= input_shape.w) continue;
                gx.at(n, group * cin_g + icg, iy, ix) += weight.at(oc, icg, ky, kx) * go;
              }
        }
  return gx;
}

template <typename Real>
Tensor<Real> conv2d_backward_weight(const Tensor<Real>& grad_out, const Tensor<Real>& x,
                                    const ConvGeometry& g, Shape weight_shape) {
  check_conv_shapes(x.shape, weight_shape, g);
  const int cin_g = weight_shape.c;
  const int cout_g = weight_shape.n / g.groups;
  Tensor<Real> gw(weight_shape);
  for (int n = 0; n < grad_out.shape.n; ++n)
    for (int oc = 0; oc < grad_out.shape.c; ++oc)
      for (int oy = 0; oy < grad_out.shape.h; ++oy)
        for (int ox = 0; ox < grad_out.shape.w; ++ox) {
          const Real go = grad_out.at(n, oc, oy, ox);
          const int group = oc / cout_g;
          for (int icg = 0; icg < cin_g; ++icg)
            for (int ky = 0; ky < g.kernel; ++ky)
              for (int kx = 0; kx < g.kernel; ++kx) {
                const int iy = oy * g.stride - g.padding + ky * g.dilation;
                const int ix = ox * g.stride - g.padding + kx * g.dilation;
                if (iy < 0 || iy >= x.shape.h || ix < 0 || ix >= x.shape.w) continue;
                gw.at(oc, icg, ky, kx) += go * x.at(n, group * cin_g + icg, iy, ix);
              }
        }
  return gw;
}

template <typename Real>
Tensor<Real> avg_pool3_forward(const Tensor<Real>& x, int stride) {
  Tensor<Real> y(x.shape.n, x.shape.c, pool_out_size(x.shape.h, stride),
                 pool_out_size(x.shape.w, stride));
  for (int n = 0; n < y.shape.n; ++n)
    for (int c = 0; c < y.shape.c; ++c)
      for (int oy = 0; oy < y.shape.h; ++oy)
        for (int ox = 0; ox < y.shape.w; ++ox) {
          Real acc = 0;
          int count = 0;
          for (int ky = 0; ky < kPoolWindow; ++ky)
            for (int kx = 0; kx < kPoolWindow; ++kx) {
              const int iy = oy * stride - kPoolPadding + ky;
              const int ix = ox * stride - kPoolPadding + kx;
              if (iy < 0 || iy >= x.shape.h || ix < 0 || ix >= x.shape.w) continue;
              acc += x.at(n, c, iy, ix);
              ++count;
            }
          y.at(n, c, oy, ox) = acc / static_cast<Real>(count);
        }
  return y;
}

template <typename Real>
Tensor<Real> avg_pool3_backward(const Tensor<Real>& grad_out, Shape input_shape, int stride) {
  Tensor<Real> gx(input_shape);
  for (int n = 0; n < grad_out.shape.n; ++n)
    for (int c = 0; c < grad_out.shape.c; ++c)
      for (int oy = 0; oy < grad_out.shape.h; ++oy)
        for (int ox = 0; ox < grad_out.shape.w; ++ox) {
          int count = 0;
          for (int ky = 0; ky < kPoolWindow; ++ky)
            for (int kx = 0; kx < kPoolWindow; ++kx) {
              const int iy = oy * stride - kPoolPadding + ky;
              const int ix = ox * stride - kPoolPadding + kx;
              if (iy >= 0 && iy < input_shape.h && ix >= 0 && ix < input_shape.w) ++count;
            }
          const Real share = grad_out.at(n, c, oy, ox) / static_cast<Real>(count);
          for (int ky = 0; ky < kPoolWindow; ++ky)
            for (int kx = 0; kx < kPoolWindow; ++kx) {
              const int iy = oy * stride - kPoolPadding + ky;
              const int ix = ox * stride - kPoolPadding + kx;
              if (iy < 0 || iy >= input_shape.h || ix < 0 || ix >= input_shape.w) continue;
              gx.at(n, c, iy, ix) += share;
            }
        }
  return gx;
}

template <typename Real>
Tensor<Real> max_pool3_forward(const Tensor<Real>& x, int stride, std::vector<int>& argmax) {
  Tensor<Real> y(x.shape.n, x.shape.c, pool_out_size(x.shape.h, stride),
                 pool_out_size(x.shape.w, stride));
  argmax.assign(y.numel(), -1);
  for (int n = 0; n < y.shape.n; ++n)
    for (int c = 0; c < y.shape.c; ++c)
      for (int oy = 0; oy < y.shape.h; ++oy)
        for (int ox = 0; ox < y.shape.w; ++ox) {
          Real best = -std::numeric_limits<Real>::infinity();
          int best_index = -1;
          for (int ky = 0; ky < kPoolWindow; ++ky)
            for (int kx = 0; kx < kPoolWindow; ++kx) {
              const int iy = oy * stride - kPoolPadding + ky;
              const int ix = ox * stride - kPoolPadding + kx;
              if (iy < 0 || iy >= x.shape.h || ix < 0 || ix >= x.shape.w) continue;
              const Real v = x.at(n, c, iy, ix);
              if (best_index < 0 || v > best) {
                best = v;
                best_index = static_cast<int>(x.index(n, c, iy, ix));
              }
            }
          y.at(n, c, oy, ox) = best;
          argmax[y.index(n, c, oy, ox)] = best_index;
        }
  return y;
}

template <typename Real>
Tensor<Real> max_pool3_backward(const Tensor<Real>& grad_out, const std::vector<int>& argmax,
                                Shape input_shape) {
  Tensor<Real> gx(input_shape);
  for (std::size_t i = 0; i < grad_out.numel(); ++i) {
    gx.data[static_cast<std::size_t>(argmax[i])] += grad_out.data[i];
  }
  return gx;
}

#define USAA_INSTANTIATE(Real)                                                                 \
  template Tensor<Real> conv2d_forward(const Tensor<Real>&, const Tensor<Real>&,               \
                                       const ConvGeometry&);                                   \
  template Tensor<Real> conv2d_backward_input(const Tensor<Real>&, const Tensor<Real>&,        \
                                              const ConvGeometry&, Shape);                     \
  template Tensor<Real> conv2d_backward_weight(const Tensor<Real>&, const Tensor<Real>&,       \
                                               const ConvGeometry&, Shape);                    \
  template Tensor<Real> avg_pool3_forward(const Tensor<Real>&, int);                           \
  template Tensor<Real> avg_pool3_backward(const Tensor<Real>&, Shape, int);                   \
  template Tensor<Real> max_pool3_forward(const Tensor<Real>&, int, std::vector<int>&);        \
  template Tensor<Real> max_pool3_backward(const Tensor<Real>&, const std::vector<int>&, Shape);

USAA_INSTANTIATE(float)
USAA_INSTANTIATE(double)
#undef USAA_INSTANTIATE

}  // namespace serial
}  // namespace usaa::nn
