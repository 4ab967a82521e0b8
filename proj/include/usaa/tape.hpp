#pragma once

// Reverse-mode differentiation over a linear tape of tensor nodes.

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "usaa/kernels.hpp"
#include "usaa/param_store.hpp"
#include "usaa/tensor.hpp"

namespace usaa::nn {

struct Var {
  int id = -1;
};

template <typename Real>
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  // With record = false no backward closures are kept (inference only).
  explicit Tape(bool record = true) : record_(record) {}

  Var constant(Tensor<Real> value);
  Var variable(Tensor<Real> value);
  Var parameter(const ParamKey& key, Tensor<Real> value);

  const Tensor<Real>& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  // Empty tensor when no gradient reached the node.
  const Tensor<Real>& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }
  bool needs_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  bool recording() const { return record_; }

  // Seeds d(out) = seed (or 1 for a scalar) and propagates to every node.
  void backward(Var out);
  void backward(Var out, const Tensor<Real>& seed);

  // Gradients of every parameter node that received one.
  std::map<ParamKey, Tensor<Real>> parameter_grads() const;
  std::vector<ParamKey> parameter_keys() const;

  // Used by operations.
  Var push(Tensor<Real> value, std::span<const Var> inputs, Backward backward);
  Var push(Tensor<Real> value, std::initializer_list<Var> inputs, Backward backward) {
    return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
  }
  Tensor<Real>& grad_buffer(Var v);

 private:
  struct Node {
    Tensor<Real> value;
    Tensor<Real> grad;
    Backward backward;
    std::optional<ParamKey> key;
    bool needs_grad = false;
  };
  bool record_;
  std::vector<Node> nodes_;
};

// Tape operations. All tensors are NCHW; vectors are (n, c, 1, 1).
namespace ops {

template <typename Real>
Var conv2d(Tape<Real>& t, Var x, Var weight, const ConvGeometry& g);
template <typename Real>
Var relu(Tape<Real>& t, Var x);
template <typename Real>
Var add(Tape<Real>& t, Var a, Var b);
template <typename Real>
Var concat_channels(Tape<Real>& t, std::span<const Var> parts);
template <typename Real>
Var avg_pool3(Tape<Real>& t, Var x, int stride);
template <typename Real>
Var max_pool3(Tape<Real>& t, Var x, int stride);
template <typename Real>
Var global_avg_pool(Tape<Real>& t, Var x);
// x (n, c, 1, 1), weight (k, c, 1, 1), bias (k, 1, 1, 1) -> (n, k, 1, 1).
template <typename Real>
Var linear(Tape<Real>& t, Var x, Var weight, Var bias);

// Mean softmax cross-entropy over the batch; `probabilities` receives (n, k).
template <typename Real>
Var softmax_cross_entropy(Tape<Real>& t, Var logits, std::span<const int> labels,
                          std::vector<double>* probabilities = nullptr);
// Mean per-label sigmoid binary cross-entropy; `labels` is n x k 0/1 entries.
template <typename Real>
Var sigmoid_bce(Tape<Real>& t, Var logits, std::span<const int> labels,
                std::vector<double>* probabilities = nullptr);

}  // namespace ops
}  // namespace usaa::nn
