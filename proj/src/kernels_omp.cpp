#include <algorithm>
#include <limits>

#include "usaa/kernels.hpp"

namespace usaa::nn::omp {
namespace {

// Output columns [lo, hi) whose input column ox * stride + offset is in [0, width).
struct ColumnRange {
  int lo;
  int hi;
};

ColumnRange valid_columns(int offset, int stride, int width, int out_width) {
  const int lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  const int last = width - 1 - offset;
  const int hi = last < 0 ? 0 : std::min(out_width, last / stride + 1);
  return {lo, std::max(lo, hi)};
}

}  // namespace

template <typename Real>
Tensor<Real> conv2d_forward(const Tensor<Real>& x, const Tensor<Real>& weight,
                            const ConvGeometry& g) {
  detail::check_conv_shapes(x.shape, weight.shape, g);
  const int batch = x.shape.n;
  const int cout = weight.shape.n;
  const int cin_g = weight.shape.c;
  const int cout_g = cout / g.groups;
  const int H = x.shape.h, W = x.shape.w;
  const int OH = g.out_size(H), OW = g.out_size(W);
  Tensor<Real> y(batch, cout, OH, OW);
  const bool pointwise = g.kernel == 1 && g.stride == 1 && g.padding == 0;
  const std::size_t plane = static_cast<std::size_t>(OH) * OW;

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < batch; ++n) {
    for (int oc = 0; oc < cout; ++oc) {
      Real* out = y.data.data() + y.index(n, oc, 0, 0);
      const int group = oc / cout_g;
      for (int icg = 0; icg < cin_g; ++icg) {
        const Real* in = x.data.data() + x.index(n, group * cin_g + icg, 0, 0);
        if (pointwise) {
          const Real wv = weight.at(oc, icg, 0, 0);
          for (std::size_t p = 0; p < plane; ++p) out[p] += wv * in[p];
          continue;
        }
        for (int ky = 0; ky < g.kernel; ++ky) {
          for (int kx = 0; kx < g.kernel; ++kx) {
            const Real wv = weight.at(oc, icg, ky, kx);
            const int off_x = kx * g.dilation - g.padding;
            const auto cols = valid_columns(off_x, g.stride, W, OW);
            for (int oy = 0; oy < OH; ++oy) {
              const int iy = oy * g.stride - g.padding + ky * g.dilation;
              if (iy < 0 || iy >= H) continue;
              Real* orow = out + static_cast<std::size_t>(oy) * OW;
              const Real* irow = in + static_cast<std::size_t>(iy) * W + off_x;
              if (g.stride == 1) {
                for (int ox = cols.lo; ox < cols.hi; ++ox) orow[ox] += wv * irow[ox];
              } else {
                for (int ox = cols.lo; ox < cols.hi; ++ox) orow[ox] += wv * irow[ox * g.stride];
              }
            }
          }
        }
      }
    }
  }
  return y;
}

template <typename Real>
Tensor<Real> conv2d_backward_input(const Tensor<Real>& grad_out, const Tensor<Real>& weight,
                                   const ConvGeometry& g, Shape input_shape) {
  detail::check_conv_shapes(input_shape, weight.shape, g);
  const int batch = input_shape.n;
  const int cin = input_shape.c;
  const int cin_g = weight.shape.c;
  const int cout_g = weight.shape.n / g.groups;
  const int H = input_shape.h, W = input_shape.w;
  const int OH = grad_out.shape.h, OW = grad_out.shape.w;
  Tensor<Real> gx(input_shape);
  const bool pointwise = g.kernel == 1 && g.stride == 1 && g.padding == 0;
  const std::size_t plane = static_cast<std::size_t>(OH) * OW;

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < batch; ++n) {
    for (int ic = 0; ic < cin; ++ic) {
      Real* gin = gx.data.data() + gx.index(n, ic, 0, 0);
      const int group = ic / cin_g;
      const int icg = ic % cin_g;
      for (int oc = group * cout_g; oc < (group + 1) * cout_g; ++oc) {
        const Real* go = grad_out.data.data() + grad_out.index(n, oc, 0, 0);
        if (pointwise) {
          const Real wv = weight.at(oc, icg, 0, 0);
          for (std::size_t p = 0; p < plane; ++p) gin[p] += wv * go[p];
          continue;
        }
        for (int ky = 0; ky < g.kernel; ++ky) {
          for (int kx = 0; kx < g.kernel; ++kx) {
            const Real wv = weight.at(oc, icg, ky, kx);
            const int off_x = kx * g.dilation - g.padding;
            const auto cols = valid_columns(off_x, g.stride, W, OW);
            for (int oy = 0; oy < OH; ++oy) {
              const int iy = oy * g.stride - g.padding + ky * g.dilation;
              if (iy < 0 || iy >= H) continue;
              Real* grow = gin + static_cast<std::size_t>(iy) * W + off_x;
              const Real* gorow = go + static_cast<std::size_t>(oy) * OW;
              if (g.stride == 1) {
                for (int ox = cols.lo; ox < cols.hi; ++ox) grow[ox] += wv * gorow[ox];
              } else {
                for (int ox = cols.lo; ox < cols.hi; ++ox) grow[ox * g.stride] += wv * gorow[ox];
              }
            }
          }
        }
      }
    }
  }
  return gx;
}

template <typename Real>
Tensor<Real> conv2d_backward_weight(const Tensor<Real>& grad_out, const Tensor<Real>& x,
                                    const ConvGeometry& g, Shape weight_shape) {
  detail::check_conv_shapes(x.shape, weight_shape, g);
  const int batch = x.shape.n;
  const int cout = weight_shape.n;
  const int cin_g = weight_shape.c;
  const int cout_g = cout / g.groups;
  const int H = x.shape.h, W = x.shape.w;
  const int OH = grad_out.shape.h, OW = grad_out.shape.w;
  Tensor<Real> gw(weight_shape);
  const bool pointwise = g.kernel == 1 && g.stride == 1 && g.padding == 0;
  const std::size_t plane = static_cast<std::size_t>(OH) * OW;

#pragma omp parallel for collapse(2) schedule(static)
  for (int oc = 0; oc < cout; ++oc) {
    for (int icg = 0; icg < cin_g; ++icg) {
      const int ic = (oc / cout_g) * cin_g + icg;
      // Lane-wise partial sums vectorize; the final fold is in fixed order.
      std::vector<Real> lanes(pointwise ? plane : static_cast<std::size_t>(OW));
      for (int ky = 0; ky < g.kernel; ++ky) {
        for (int kx = 0; kx < g.kernel; ++kx) {
          const int off_x = kx * g.dilation - g.padding;
          const auto cols = valid_columns(off_x, g.stride, W, OW);
          std::fill(lanes.begin(), lanes.end(), Real(0));
          for (int n = 0; n < batch; ++n) {
            const Real* go = grad_out.data.data() + grad_out.index(n, oc, 0, 0);
            const Real* in = x.data.data() + x.index(n, ic, 0, 0);
            if (pointwise) {
              for (std::size_t p = 0; p < plane; ++p) lanes[p] += go[p] * in[p];
              continue;
            }
            for (int oy = 0; oy < OH; ++oy) {
              const int iy = oy * g.stride - g.padding + ky * g.dilation;
              if (iy < 0 || iy >= H) continue;
              const Real* irow = in + static_cast<std::size_t>(iy) * W + off_x;
              const Real* gorow = go + static_cast<std::size_t>(oy) * OW;
              if (g.stride == 1) {
                for (int ox = cols.lo; ox < cols.hi; ++ox) lanes[ox] += gorow[ox] * irow[ox];
              } else {
                for (int ox = cols.lo; ox < cols.hi; ++ox) {
                  lanes[ox] += gorow[ox] * irow[ox * g.stride];
                }
              }
            }
          }
          Real acc = 0;
          for (Real v : lanes) acc += v;
          gw.at(oc, icg, ky, kx) = acc;
        }
      }
    }
  }
  return gw;
}

namespace {

// Window [lo, hi) along one axis for every output position.
struct Window {
  std::vector<int> lo;
  std::vector<int> hi;
};

Window pool_windows(int in, int out, int stride) {
  Window w{std::vector<int>(static_cast<std::size_t>(out)), std::vector<int>(static_cast<std::size_t>(out))};
  for (int o = 0; o < out; ++o) {
    w.lo[static_cast<std::size_t>(o)] = std::max(0, o * stride - kPoolPadding);
    w.hi[static_cast<std::size_t>(o)] = std::min(in, o * stride - kPoolPadding + kPoolWindow);
  }
  return w;
}

}  // namespace

template <typename Real>
Tensor<Real> avg_pool3_forward(const Tensor<Real>& x, int stride) {
  const int H = x.shape.h, W = x.shape.w;
  const int OH = pool_out_size(H, stride), OW = pool_out_size(W, stride);
  Tensor<Real> y(x.shape.n, x.shape.c, OH, OW);
  const Window rows = pool_windows(H, OH, stride);
  const Window cols = pool_windows(W, OW, stride);
  const int planes = x.shape.n * x.shape.c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const Real* in = x.data.data() + static_cast<std::size_t>(p) * H * W;
    Real* out = y.data.data() + static_cast<std::size_t>(p) * OH * OW;
    // Horizontal window sums, then vertical.
    std::vector<Real> hsum(static_cast<std::size_t>(H) * OW);
    for (int iy = 0; iy < H; ++iy) {
      const Real* row = in + static_cast<std::size_t>(iy) * W;
      Real* hrow = hsum.data() + static_cast<std::size_t>(iy) * OW;
      for (int ox = 0; ox < OW; ++ox) {
        Real acc = 0;
        for (int ix = cols.lo[ox]; ix < cols.hi[ox]; ++ix) acc += row[ix];
        hrow[ox] = acc;
      }
    }
    for (int oy = 0; oy < OH; ++oy) {
      Real* orow = out + static_cast<std::size_t>(oy) * OW;
      const int y0 = rows.lo[oy], y1 = rows.hi[oy];
      for (int iy = y0; iy < y1; ++iy) {
        const Real* hrow = hsum.data() + static_cast<std::size_t>(iy) * OW;
        for (int ox = 0; ox < OW; ++ox) orow[ox] += hrow[ox];
      }
      for (int ox = 0; ox < OW; ++ox) {
        orow[ox] /= static_cast<Real>((y1 - y0) * (cols.hi[ox] - cols.lo[ox]));
      }
    }
  }
  return y;
}

template <typename Real>
Tensor<Real> avg_pool3_backward(const Tensor<Real>& grad_out, Shape input_shape, int stride) {
  const int H = input_shape.h, W = input_shape.w;
  const int OH = grad_out.shape.h, OW = grad_out.shape.w;
  Tensor<Real> gx(input_shape);
  const Window rows = pool_windows(H, OH, stride);
  const Window cols = pool_windows(W, OW, stride);
  const int planes = input_shape.n * input_shape.c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const Real* go = grad_out.data.data() + static_cast<std::size_t>(p) * OH * OW;
    Real* gin = gx.data.data() + static_cast<std::size_t>(p) * H * W;
    std::vector<Real> share(static_cast<std::size_t>(OW));
    std::vector<Real> hgrad(static_cast<std::size_t>(H) * OW, Real(0));
    for (int oy = 0; oy < OH; ++oy) {
      const int y0 = rows.lo[oy], y1 = rows.hi[oy];
      const Real* gorow = go + static_cast<std::size_t>(oy) * OW;
      for (int ox = 0; ox < OW; ++ox) {
        share[ox] = gorow[ox] / static_cast<Real>((y1 - y0) * (cols.hi[ox] - cols.lo[ox]));
      }
      for (int iy = y0; iy < y1; ++iy) {
        Real* hrow = hgrad.data() + static_cast<std::size_t>(iy) * OW;
        for (int ox = 0; ox < OW; ++ox) hrow[ox] += share[ox];
      }
    }
    for (int iy = 0; iy < H; ++iy) {
      const Real* hrow = hgrad.data() + static_cast<std::size_t>(iy) * OW;
      Real* grow = gin + static_cast<std::size_t>(iy) * W;
      for (int ox = 0; ox < OW; ++ox) {
        for (int ix = cols.lo[ox]; ix < cols.hi[ox]; ++ix) grow[ix] += hrow[ox];
      }
    }
  }
  return gx;
}

template <typename Real>
Tensor<Real> max_pool3_forward(const Tensor<Real>& x, int stride, std::vector<int>& argmax) {
  const int H = x.shape.h, W = x.shape.w;
  const int OH = pool_out_size(H, stride), OW = pool_out_size(W, stride);
  Tensor<Real> y(x.shape.n, x.shape.c, OH, OW);
  argmax.assign(y.numel(), -1);
  const Window rows = pool_windows(H, OH, stride);
  const Window cols = pool_windows(W, OW, stride);
  const int planes = x.shape.n * x.shape.c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const std::size_t in_base = static_cast<std::size_t>(p) * H * W;
    const std::size_t out_base = static_cast<std::size_t>(p) * OH * OW;
    const Real* in = x.data.data() + in_base;
    // Per-row window maxima keep the first strict maximum in scan order.
    std::vector<int> hidx(static_cast<std::size_t>(H) * OW);
    for (int iy = 0; iy < H; ++iy) {
      const Real* row = in + static_cast<std::size_t>(iy) * W;
      for (int ox = 0; ox < OW; ++ox) {
        int best = cols.lo[ox];
        for (int ix = best + 1; ix < cols.hi[ox]; ++ix) {
          if (row[ix] > row[best]) best = ix;
        }
        hidx[static_cast<std::size_t>(iy) * OW + ox] = iy * W + best;
      }
    }
    for (int oy = 0; oy < OH; ++oy) {
      for (int ox = 0; ox < OW; ++ox) {
        int best = hidx[static_cast<std::size_t>(rows.lo[oy]) * OW + ox];
        for (int iy = rows.lo[oy] + 1; iy < rows.hi[oy]; ++iy) {
          const int cand = hidx[static_cast<std::size_t>(iy) * OW + ox];
          if (in[cand] > in[best]) best = cand;
        }
        const std::size_t o = out_base + static_cast<std::size_t>(oy) * OW + ox;
        y.data[o] = in[best];
        argmax[o] = static_cast<int>(in_base) + best;
      }
    }
  }
  return y;
}

template <typename Real>
Tensor<Real> max_pool3_backward(const Tensor<Real>& grad_out, const std::vector<int>& argmax,
                                Shape input_shape) {
  Tensor<Real> gx(input_shape);
  const int planes = input_shape.n * input_shape.c;
  const std::size_t out_plane = static_cast<std::size_t>(grad_out.shape.h) * grad_out.shape.w;
  // Each output cell's argmax lies in its own input plane, so planes are independent.
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    for (std::size_t i = static_cast<std::size_t>(p) * out_plane;
         i < static_cast<std::size_t>(p + 1) * out_plane; ++i) {
      gx.data[static_cast<std::size_t>(argmax[i])] += grad_out.data[i];
    }
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

}  // namespace usaa::nn::omp
