#pragma once

#include <set>
#include <span>
#include <vector>

#include "usaa/dataset.hpp"
#include "usaa/encoding.hpp"
#include "usaa/metrics.hpp"
#include "usaa/param_store.hpp"
#include "usaa/tape.hpp"

namespace usaa::nn {

inline constexpr int kMinCells = 1;
inline constexpr int kMaxCells = 12;

// A concrete cell-stacked network: stem (3x3 conv) -> L_n cells -> global
// average pool -> affine head.
struct NetworkSpec {
  CellEncoding normal;
  CellEncoding reduce;
  int cells = 1;
  int c_init = 16;
  int num_classes = 2;
  int input_channels = 1;

  // Cell indices floor(L_n/3) and floor(2 L_n/3); none when L_n < 3.
  std::vector<int> reduction_positions() const;
  bool is_reduction(int cell) const;
  // Channel width C of every cell; reduction cells double it.
  std::vector<int> cell_widths() const;
  const CellEncoding& encoding(int cell) const { return is_reduction(cell) ? reduce : normal; }
};

NetworkSpec build_network(const Individual& ind, int cells, int c_init, int num_classes,
                          int input_channels);

// Gathers parameters for one forward pass from a read-only store.
template <typename Real>
class ParamFeed {
 public:
  explicit ParamFeed(const ParamStore<Real>& store) : store_(store) {}
  Var get(Tape<Real>& tape, const ParamKey& key, Shape shape) const {
    return tape.parameter(key, store_.fetch(key, shape));
  }

 private:
  const ParamStore<Real>& store_;
};

// One candidate operation on an edge. Stride 2 only for reduction-cell edges
// leaving an input node.
template <typename Real>
Var op_forward(Tape<Real>& tape, NeuralOp op, Var x, int stride, int cell, int edge,
               const ParamFeed<Real>& params);

template <typename Real>
Var forward_logits(Tape<Real>& tape, const NetworkSpec& spec, const ParamFeed<Real>& params,
                   Var input);

// Every key a forward pass of `spec` touches.
std::set<ParamKey> network_keys(const NetworkSpec& spec);

// Labels for one batch; `width` > 1 only for the multi-label task.
struct LabelBatch {
  std::vector<int> values;
  int width = 1;
};

template <typename Real>
struct LossResult {
  double loss = 0.0;
  ScoreMatrix scores;
};

template <typename Real>
struct GradResult {
  double loss = 0.0;
  ScoreMatrix scores;
  std::map<ParamKey, Tensor<Real>> grads;
};

template <typename Real>
LossResult<Real> forward_loss(const NetworkSpec& spec, const ParamStore<Real>& store,
                              const Tensor<Real>& batch, const LabelBatch& labels,
                              TaskType task);

// Forward plus reverse pass; gradients cover exactly the keys this network touches.
template <typename Real>
GradResult<Real> backward(const NetworkSpec& spec, const ParamStore<Real>& store,
                          const Tensor<Real>& batch, const LabelBatch& labels, TaskType task);

// Packs normalized images into an (n, c, h, w) tensor.
template <typename Real>
Tensor<Real> to_batch(std::span<const augment::NormalizedImage> images);

LabelBatch gather_labels(const Split& split, std::span<const std::size_t> indices);

}  // namespace usaa::nn
