#include "usaa/tape.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "usaa/error.hpp"

namespace usaa::nn {
namespace {

template <typename Real>
void accumulate(Tape<Real>& t, Var v, Tensor<Real>&& delta) {
  if (!t.needs_grad(v)) return;
  Tensor<Real>& buf = t.grad_buffer(v);
  if (buf.empty()) {
    buf = std::move(delta);
    return;
  }
  for (std::size_t i = 0; i < buf.data.size(); ++i) buf.data[i] += delta.data[i];
}

}  // namespace

template <typename Real>
Var Tape<Real>::constant(Tensor<Real> value) {
  nodes_.push_back({std::move(value), {}, {}, std::nullopt, false});
  return {static_cast<int>(nodes_.size()) - 1};
}

template <typename Real>
Var Tape<Real>::variable(Tensor<Real> value) {
  nodes_.push_back({std::move(value), {}, {}, std::nullopt, record_});
  return {static_cast<int>(nodes_.size()) - 1};
}

template <typename Real>
Var Tape<Real>::parameter(const ParamKey& key, Tensor<Real> value) {
  nodes_.push_back({std::move(value), {}, {}, key, record_});
  return {static_cast<int>(nodes_.size()) - 1};
}

template <typename Real>
Var Tape<Real>::push(Tensor<Real> value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (Var in : inputs) needs = needs || nodes_[static_cast<std::size_t>(in.id)].needs_grad;
  needs = needs && record_;
  nodes_.push_back({std::move(value), {}, needs ? std::move(backward) : Backward{}, std::nullopt,
                    needs});
  return {static_cast<int>(nodes_.size()) - 1};
}

template <typename Real>
Tensor<Real>& Tape<Real>::grad_buffer(Var v) {
  return nodes_[static_cast<std::size_t>(v.id)].grad;
}

template <typename Real>
void Tape<Real>::backward(Var out) {
  if (value(out).numel() != 1) {
    throw Error(ErrorCode::kShape, "backward without a seed needs a scalar output");
  }
  backward(out, Tensor<Real>(value(out).shape, Real(1)));
}

template <typename Real>
void Tape<Real>::backward(Var out, const Tensor<Real>& seed) {
  if (!record_) throw Error(ErrorCode::kParameter, "tape was not recording");
  if (!(seed.shape == value(out).shape)) {
    throw Error(ErrorCode::kShape, "backward seed shape mismatch");
  }
  nodes_[static_cast<std::size_t>(out.id)].grad = seed;
  for (int i = out.id; i >= 0; --i) {
    auto& node = nodes_[static_cast<std::size_t>(i)];
    if (node.backward && !node.grad.empty()) node.backward(*this, i);
  }
}

template <typename Real>
std::map<ParamKey, Tensor<Real>> Tape<Real>::parameter_grads() const {
  std::map<ParamKey, Tensor<Real>> out;
  for (const auto& node : nodes_) {
    if (!node.key) continue;
    Tensor<Real> g = node.grad.empty() ? Tensor<Real>(node.value.shape) : node.grad;
    auto [it, inserted] = out.emplace(*node.key, std::move(g));
    if (!inserted) {
      throw Error(ErrorCode::kParameter,
                  "parameter " + node.key->describe() + " appears twice on the tape");
    }
  }
  return out;
}

template <typename Real>
std::vector<ParamKey> Tape<Real>::parameter_keys() const {
  std::vector<ParamKey> keys;
  for (const auto& node : nodes_) {
    if (node.key) keys.push_back(*node.key);
  }
  return keys;
}

namespace ops {

template <typename Real>
Var conv2d(Tape<Real>& t, Var x, Var weight, const ConvGeometry& g) {
  auto y = conv2d_forward(t.value(x), t.value(weight), g);
  return t.push(std::move(y), {x, weight}, [x, weight, g](Tape<Real>& tape, int self) {
    const auto& gy = tape.grad(Var{self});
    if (tape.needs_grad(x)) {
      accumulate(tape, x,
                 conv2d_backward_input(gy, tape.value(weight), g, tape.value(x).shape));
    }
    if (tape.needs_grad(weight)) {
      accumulate(tape, weight,
                 conv2d_backward_weight(gy, tape.value(x), g, tape.value(weight).shape));
    }
  });
}

template <typename Real>
Var relu(Tape<Real>& t, Var x) {
  Tensor<Real> y = t.value(x);
  for (auto& v : y.data) v = std::max(v, Real(0));
  return t.push(std::move(y), {x}, [x](Tape<Real>& tape, int self) {
    const auto& gy = tape.grad(Var{self});
    const auto& in = tape.value(x);
    Tensor<Real> gx(in.shape);
    for (std::size_t i = 0; i < gx.data.size(); ++i) {
      gx.data[i] = in.data[i] > Real(0) ? gy.data[i] : Real(0);
    }
    accumulate(tape, x, std::move(gx));
  });
}

template <typename Real>
Var add(Tape<Real>& t, Var a, Var b) {
  if (!(t.value(a).shape == t.value(b).shape)) {
    throw Error(ErrorCode::kShape, "add operands differ in shape");
  }
  Tensor<Real> y = t.value(a);
  const auto& vb = t.value(b);
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += vb.data[i];
  return t.push(std::move(y), {a, b}, [a, b](Tape<Real>& tape, int self) {
    const auto& gy = tape.grad(Var{self});
    if (tape.needs_grad(a)) accumulate(tape, a, Tensor<Real>(gy));
    if (tape.needs_grad(b)) accumulate(tape, b, Tensor<Real>(gy));
  });
}

template <typename Real>
Var concat_channels(Tape<Real>& t, std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorCode::kShape, "concat of nothing");
  const Shape first = t.value(parts[0]).shape;
  int channels = 0;
  for (Var p : parts) {
    const Shape s = t.value(p).shape;
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw Error(ErrorCode::kShape, "concat operands differ in batch or spatial size");
    }
    channels += s.c;
  }
  Tensor<Real> y(first.n, channels, first.h, first.w);
  const std::size_t plane = static_cast<std::size_t>(first.h) * first.w;
  std::vector<Var> inputs(parts.begin(), parts.end());
  int offset = 0;
  for (Var p : parts) {
    const auto& v = t.value(p);
    for (int n = 0; n < first.n; ++n) {
      std::copy_n(v.data.begin() + static_cast<std::ptrdiff_t>(v.index(n, 0, 0, 0)),
                  static_cast<std::size_t>(v.shape.c) * plane,
                  y.data.begin() + static_cast<std::ptrdiff_t>(y.index(n, offset, 0, 0)));
    }
    offset += v.shape.c;
  }
  return t.push(std::move(y), std::span<const Var>(inputs), [inputs](Tape<Real>& tape, int self) {
    const auto& gy = tape.grad(Var{self});
    const std::size_t plane = static_cast<std::size_t>(gy.shape.h) * gy.shape.w;
    int offset = 0;
    for (Var p : inputs) {
      const Shape s = tape.value(p).shape;
      if (tape.needs_grad(p)) {
        Tensor<Real> gp(s);
        for (int n = 0; n < s.n; ++n) {
          std::copy_n(gy.data.begin() + static_cast<std::ptrdiff_t>(gy.index(n, offset, 0, 0)),
                      static_cast<std::size_t>(s.c) * plane,
                      gp.data.begin() + static_cast<std::ptrdiff_t>(gp.index(n, 0, 0, 0)));
        }
        accumulate(tape, p, std::move(gp));
      }
      offset += s.c;
    }
  });
}

template <typename Real>
Var avg_pool3(Tape<Real>& t, Var x, int stride) {
  auto y = avg_pool3_forward(t.value(x), stride);
  return t.push(std::move(y), {x}, [x, stride](Tape<Real>& tape, int self) {
    accumulate(tape, x, avg_pool3_backward(tape.grad(Var{self}), tape.value(x).shape, stride));
  });
}

template <typename Real>
Var max_pool3(Tape<Real>& t, Var x, int stride) {
  std::vector<int> argmax;
  auto y = max_pool3_forward(t.value(x), stride, argmax);
  return t.push(std::move(y), {x},
                [x, argmax = std::move(argmax)](Tape<Real>& tape, int self) {
                  accumulate(tape, x,
                             max_pool3_backward(tape.grad(Var{self}), argmax,
                                                tape.value(x).shape));
                });
}

template <typename Real>
Var global_avg_pool(Tape<Real>& t, Var x) {
  const auto& in = t.value(x);
  const Shape s = in.shape;
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  Tensor<Real> y(s.n, s.c, 1, 1);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      Real acc = 0;
      const Real* p = in.data.data() + in.index(n, c, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      y.at(n, c, 0, 0) = acc / static_cast<Real>(plane);
    }
  return t.push(std::move(y), {x}, [x](Tape<Real>& tape, int self) {
    const auto& gy = tape.grad(Var{self});
    const Shape s = tape.value(x).shape;
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    Tensor<Real> gx(s);
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const Real share = gy.at(n, c, 0, 0) / static_cast<Real>(plane);
        Real* p = gx.data.data() + gx.index(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) p[i] = share;
      }
    accumulate(tape, x, std::move(gx));
  });
}

template <typename Real>
Var linear(Tape<Real>& t, Var x, Var weight, Var bias) {
  const auto& in = t.value(x);
  const auto& w = t.value(weight);
  const auto& b = t.value(bias);
  const int batch = in.shape.n;
  const int features = in.shape.c * in.shape.h * in.shape.w;
  const int outputs = w.shape.n;
  if (w.shape.c * w.shape.h * w.shape.w != features || b.numel() != static_cast<std::size_t>(outputs)) {
    throw Error(ErrorCode::kShape,
                fmt::format("linear weight ({},{}) does not match {} input features", w.shape.n,
                            w.shape.c, features));
  }
  Tensor<Real> y(batch, outputs, 1, 1);
  for (int n = 0; n < batch; ++n)
    for (int k = 0; k < outputs; ++k) {
      Real acc = b.data[static_cast<std::size_t>(k)];
      for (int f = 0; f < features; ++f) {
        acc += w.data[static_cast<std::size_t>(k) * features + f] *
               in.data[static_cast<std::size_t>(n) * features + f];
      }
      y.at(n, k, 0, 0) = acc;
    }
  return t.push(std::move(y), {x, weight, bias},
                [x, weight, bias, batch, features, outputs](Tape<Real>& tape, int self) {
                  const auto& gy = tape.grad(Var{self});
                  const auto& in = tape.value(x);
                  const auto& w = tape.value(weight);
                  if (tape.needs_grad(x)) {
                    Tensor<Real> gx(in.shape);
                    for (int n = 0; n < batch; ++n)
                      for (int k = 0; k < outputs; ++k) {
                        const Real g = gy.data[static_cast<std::size_t>(n) * outputs + k];
                        for (int f = 0; f < features; ++f) {
                          gx.data[static_cast<std::size_t>(n) * features + f] +=
                              g * w.data[static_cast<std::size_t>(k) * features + f];
                        }
                      }
                    accumulate(tape, x, std::move(gx));
                  }
                  if (tape.needs_grad(weight)) {
                    Tensor<Real> gw(w.shape);
                    for (int k = 0; k < outputs; ++k)
                      for (int n = 0; n < batch; ++n) {
                        const Real g = gy.data[static_cast<std::size_t>(n) * outputs + k];
                        for (int f = 0; f < features; ++f) {
                          gw.data[static_cast<std::size_t>(k) * features + f] +=
                              g * in.data[static_cast<std::size_t>(n) * features + f];
                        }
                      }
                    accumulate(tape, weight, std::move(gw));
                  }
                  if (tape.needs_grad(bias)) {
                    Tensor<Real> gb(tape.value(bias).shape);
                    for (int n = 0; n < batch; ++n)
                      for (int k = 0; k < outputs; ++k) {
                        gb.data[static_cast<std::size_t>(k)] +=
                            gy.data[static_cast<std::size_t>(n) * outputs + k];
                      }
                    accumulate(tape, bias, std::move(gb));
                  }
                });
}

template <typename Real>
Var softmax_cross_entropy(Tape<Real>& t, Var logits, std::span<const int> labels,
                          std::vector<double>* probabilities) {
  const auto& z = t.value(logits);
  const int batch = z.shape.n;
  const int classes = z.shape.c;
  if (labels.size() != static_cast<std::size_t>(batch)) {
    throw Error(ErrorCode::kShape, "one label per sample expected");
  }
  std::vector<double> probs(static_cast<std::size_t>(batch) * classes);
  double loss = 0.0;
  for (int n = 0; n < batch; ++n) {
    const int label = labels[static_cast<std::size_t>(n)];
    if (label < 0 || label >= classes) {
      throw Error(ErrorCode::kRange,
                  fmt::format("label {} of sample {} outside [0, {})", label, n, classes));
    }
    double zmax = z.at(n, 0, 0, 0);
    for (int k = 1; k < classes; ++k) zmax = std::max(zmax, static_cast<double>(z.at(n, k, 0, 0)));
    double sum = 0.0;
    for (int k = 0; k < classes; ++k) sum += std::exp(static_cast<double>(z.at(n, k, 0, 0)) - zmax);
    const double log_sum = std::log(sum) + zmax;
    for (int k = 0; k < classes; ++k) {
      probs[static_cast<std::size_t>(n) * classes + k] =
          std::exp(static_cast<double>(z.at(n, k, 0, 0)) - log_sum);
    }
    loss += log_sum - static_cast<double>(z.at(n, label, 0, 0));
  }
  loss /= batch;
  if (probabilities) *probabilities = probs;
  std::vector<int> kept(labels.begin(), labels.end());
  return t.push(Tensor<Real>(1, 1, 1, 1, static_cast<Real>(loss)), {logits},
                [logits, probs = std::move(probs), kept = std::move(kept), batch, classes](
                    Tape<Real>& tape, int self) {
                  const Real scale = tape.grad(Var{self}).data[0] / static_cast<Real>(batch);
                  Tensor<Real> gz(tape.value(logits).shape);
                  for (int n = 0; n < batch; ++n)
                    for (int k = 0; k < classes; ++k) {
                      const double p = probs[static_cast<std::size_t>(n) * classes + k];
                      const double target = kept[static_cast<std::size_t>(n)] == k ? 1.0 : 0.0;
                      gz.at(n, k, 0, 0) = static_cast<Real>(p - target) * scale;
                    }
                  accumulate(tape, logits, std::move(gz));
                });
}

template <typename Real>
Var sigmoid_bce(Tape<Real>& t, Var logits, std::span<const int> labels,
                std::vector<double>* probabilities) {
  const auto& z = t.value(logits);
  const int batch = z.shape.n;
  const int width = z.shape.c;
  if (labels.size() != static_cast<std::size_t>(batch) * width) {
    throw Error(ErrorCode::kShape, "multi-label targets must be batch x outputs");
  }
  std::vector<double> probs(labels.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y != 0 && y != 1) {
      throw Error(ErrorCode::kRange, fmt::format("multi-label target {} is not 0/1", y));
    }
    const double v = z.data[i];
    probs[i] = 1.0 / (1.0 + std::exp(-v));
    loss += std::max(v, 0.0) - v * y + std::log1p(std::exp(-std::abs(v)));
  }
  const double count = static_cast<double>(labels.size());
  loss /= count;
  if (probabilities) *probabilities = probs;
  std::vector<int> kept(labels.begin(), labels.end());
  return t.push(Tensor<Real>(1, 1, 1, 1, static_cast<Real>(loss)), {logits},
                [logits, probs = std::move(probs), kept = std::move(kept), count](
                    Tape<Real>& tape, int self) {
                  const double scale = tape.grad(Var{self}).data[0] / count;
                  Tensor<Real> gz(tape.value(logits).shape);
                  for (std::size_t i = 0; i < kept.size(); ++i) {
                    gz.data[i] = static_cast<Real>((probs[i] - kept[i]) * scale);
                  }
                  accumulate(tape, logits, std::move(gz));
                });
}

#define USAA_INSTANTIATE(Real)                                                              \
  template Var conv2d(Tape<Real>&, Var, Var, const ConvGeometry&);                          \
  template Var relu(Tape<Real>&, Var);                                                      \
  template Var add(Tape<Real>&, Var, Var);                                                  \
  template Var concat_channels(Tape<Real>&, std::span<const Var>);                          \
  template Var avg_pool3(Tape<Real>&, Var, int);                                            \
  template Var max_pool3(Tape<Real>&, Var, int);                                            \
  template Var global_avg_pool(Tape<Real>&, Var);                                           \
  template Var linear(Tape<Real>&, Var, Var, Var);                                          \
  template Var softmax_cross_entropy(Tape<Real>&, Var, std::span<const int>,                \
                                     std::vector<double>*);                                 \
  template Var sigmoid_bce(Tape<Real>&, Var, std::span<const int>, std::vector<double>*);

USAA_INSTANTIATE(float)
USAA_INSTANTIATE(double)
#undef USAA_INSTANTIATE

}  // namespace ops

template class Tape<float>;
template class Tape<double>;

}  // namespace usaa::nn
