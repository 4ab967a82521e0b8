#include "usaa/network.hpp"

#include <fmt/format.h>

#include "usaa/error.hpp"

namespace usaa::nn {

std::vector<int> NetworkSpec::reduction_positions() const {
  if (cells < 3) return {};
  return {cells / 3, 2 * cells / 3};
}

bool NetworkSpec::is_reduction(int cell) const {
  for (int p : reduction_positions()) {
    if (p == cell) return true;
  }
  return false;
}

std::vector<int> NetworkSpec::cell_widths() const {
  std::vector<int> widths;
  int c = c_init;
  for (int i = 0; i < cells; ++i) {
    if (is_reduction(i)) c *= 2;
    widths.push_back(c);
  }
  return widths;
}

NetworkSpec build_network(const Individual& ind, int cells, int c_init, int num_classes,
                          int input_channels) {
  if (!ind.arch_concrete()) {
    throw Error(ErrorCode::kValidation, "random codes present");
  }
  if (cells < kMinCells || cells > kMaxCells) {
    throw Error(ErrorCode::kParameter, fmt::format("L_n must be in [1,12], got {}", cells));
  }
  if (c_init < 1 || num_classes < 1 || (input_channels != 1 && input_channels != 3)) {
    throw Error(ErrorCode::kParameter, "invalid network dimensions");
  }
  Individual arch_only = ind;
  arch_only.aug.assign(1, static_cast<int>(AugOp::kIdentity));
  const auto report = validate(arch_only, 1);
  if (!report.ok()) {
    throw Error(ErrorCode::kValidation, "invalid architecture: " + report.violations.front());
  }
  return {ind.normal, ind.reduce, cells, c_init, num_classes, input_channels};
}

namespace {

ConvGeometry depthwise_geometry(int kernel, int dilation, int stride, int channels) {
  return {kernel, stride, dilation * (kernel - 1) / 2, dilation, channels};
}

template <typename Real>
Var separable(Tape<Real>& tape, Var x, int kernel, int dilation, int stride, int cell, int edge,
              int op, const ParamFeed<Real>& params) {
  const int c = tape.value(x).shape.c;
  Var h = ops::relu(tape, x);
  Var dw = params.get(tape, ParamKey::edge_op(cell, edge, op, ParamRole::kDepthwise),
                      Shape{c, 1, kernel, kernel});
  h = ops::conv2d(tape, h, dw, depthwise_geometry(kernel, dilation, stride, c));
  Var pw = params.get(tape, ParamKey::edge_op(cell, edge, op, ParamRole::kPointwise),
                      Shape{c, c, 1, 1});
  return ops::conv2d(tape, h, pw, ConvGeometry{});
}

}  // namespace

template <typename Real>
Var op_forward(Tape<Real>& tape, NeuralOp op, Var x, int stride, int cell, int edge,
               const ParamFeed<Real>& params) {
  const int id = static_cast<int>(op);
  switch (op) {
    case NeuralOp::kSkipConnection: {
      if (stride == 1) return x;
      const int c = tape.value(x).shape.c;
      Var w = params.get(tape, ParamKey::edge_op(cell, edge, id, ParamRole::kProjection),
                         Shape{c, c, 1, 1});
      return ops::conv2d(tape, x, w, ConvGeometry{1, 2, 0, 1, 1});
    }
    case NeuralOp::kAvgPool3x3:
      return ops::avg_pool3(tape, x, stride);
    case NeuralOp::kMaxPool3x3:
      return ops::max_pool3(tape, x, stride);
    case NeuralOp::kSepConv3x3:
      return separable(tape, x, 3, 1, stride, cell, edge, id, params);
    case NeuralOp::kSepConv5x5:
      return separable(tape, x, 5, 1, stride, cell, edge, id, params);
    case NeuralOp::kDilConv3x3:
      return separable(tape, x, 3, 2, stride, cell, edge, id, params);
    case NeuralOp::kDilConv5x5:
      return separable(tape, x, 5, 2, stride, cell, edge, id, params);
  }
  throw Error(ErrorCode::kRange, fmt::format("neural op {}", id));
}

template <typename Real>
Var forward_logits(Tape<Real>& tape, const NetworkSpec& spec, const ParamFeed<Real>& params,
                   Var input) {
  const Shape in = tape.value(input).shape;
  if (in.c != spec.input_channels) {
    throw Error(ErrorCode::kShape, fmt::format("network expects {} input channels, got {}",
                                               spec.input_channels, in.c));
  }
  Var stem_w = params.get(tape, ParamKey::stem(), Shape{spec.c_init, spec.input_channels, 3, 3});
  Var stem = ops::conv2d(tape, input, stem_w, ConvGeometry{3, 1, 1, 1, 1});

  const auto widths = spec.cell_widths();
  Var s0 = stem;
  Var s1 = stem;
  for (int cell = 0; cell < spec.cells; ++cell) {
    const int c = widths[static_cast<std::size_t>(cell)];
    const bool reduction = spec.is_reduction(cell);
    const CellEncoding& enc = spec.encoding(cell);

    // Align both inputs to width C; s0 may sit one resolution level above s1.
    const Shape sh0 = tape.value(s0).shape;
    const Shape sh1 = tape.value(s1).shape;
    const int stride0 = sh0.h > sh1.h ? 2 : 1;
    Var w0 = params.get(tape, ParamKey::preprocess(cell, 0), Shape{c, sh0.c, 1, 1});
    Var w1 = params.get(tape, ParamKey::preprocess(cell, 1), Shape{c, sh1.c, 1, 1});
    Var in0 = ops::conv2d(tape, ops::relu(tape, s0), w0, ConvGeometry{1, stride0, 0, 1, 1});
    Var in1 = ops::conv2d(tape, ops::relu(tape, s1), w1, ConvGeometry{});

    std::vector<Var> states{in0, in1};
    for (int node = 1; node <= kIntermediateNodes; ++node) {
      const int begin = node_edge_offset(node);
      std::optional<Var> sum;
      for (int j = 0; j < node_source_count(node); ++j) {
        const int edge = begin + j;
        if (enc.edges[edge] != 1) continue;
        const int stride = reduction && j < 2 ? 2 : 1;
        Var out = op_forward(tape, static_cast<NeuralOp>(enc.ops[edge]),
                             states[static_cast<std::size_t>(j)], stride, cell, edge, params);
        sum = sum ? ops::add(tape, *sum, out) : out;
      }
      if (!sum) {
        throw Error(ErrorCode::kValidation,
                    fmt::format("cell {} node{} has no active edge", cell, node));
      }
      states.push_back(*sum);
    }
    const std::vector<Var> nodes(states.begin() + 2, states.end());
    Var out = ops::concat_channels(tape, std::span<const Var>(nodes));
    s0 = s1;
    s1 = out;
  }

  Var pooled = ops::global_avg_pool(tape, s1);
  const int features = tape.value(pooled).shape.c;
  Var hw = params.get(tape, ParamKey::head(ParamRole::kWeight),
                      Shape{spec.num_classes, features, 1, 1});
  Var hb = params.get(tape, ParamKey::head(ParamRole::kBias), Shape{spec.num_classes, 1, 1, 1});
  return ops::linear(tape, pooled, hw, hb);
}

std::set<ParamKey> network_keys(const NetworkSpec& spec) {
  // A tiny forward records every parameter node without doing real work on it.
  ParamStore<float> empty;
  Tape<float> tape(false);
  Var x = tape.constant(Tensor<float>(1, spec.input_channels, 8, 8));
  forward_logits(tape, spec, ParamFeed<float>(empty), x);
  const auto keys = tape.parameter_keys();
  return {keys.begin(), keys.end()};
}

namespace {

template <typename Real>
Var loss_node(Tape<Real>& tape, Var logits, const LabelBatch& labels, TaskType task,
              std::vector<double>& probs) {
  if (task == TaskType::kMultiLabel) {
    return ops::sigmoid_bce(tape, logits, std::span<const int>(labels.values), &probs);
  }
  if (labels.width != 1) throw Error(ErrorCode::kShape, "single-label task needs width 1");
  return ops::softmax_cross_entropy(tape, logits, std::span<const int>(labels.values), &probs);
}

template <typename Real>
void check_batch(const Tensor<Real>& batch) {
  if (!batch.finite()) throw Error(ErrorCode::kValidation, "non-finite values in input batch");
}

}  // namespace

template <typename Real>
LossResult<Real> forward_loss(const NetworkSpec& spec, const ParamStore<Real>& store,
                              const Tensor<Real>& batch, const LabelBatch& labels,
                              TaskType task) {
  check_batch(batch);
  Tape<Real> tape(false);
  Var x = tape.constant(batch);
  Var logits = forward_logits(tape, spec, ParamFeed<Real>(store), x);
  LossResult<Real> result;
  Var loss = loss_node(tape, logits, labels, task, result.scores.data);
  result.loss = static_cast<double>(tape.value(loss).data[0]);
  if (!std::isfinite(result.loss)) throw Error(ErrorCode::kValidation, "non-finite loss");
  result.scores.rows = batch.shape.n;
  result.scores.cols = spec.num_classes;
  return result;
}

template <typename Real>
GradResult<Real> backward(const NetworkSpec& spec, const ParamStore<Real>& store,
                          const Tensor<Real>& batch, const LabelBatch& labels, TaskType task) {
  check_batch(batch);
  Tape<Real> tape(true);
  Var x = tape.constant(batch);
  Var logits = forward_logits(tape, spec, ParamFeed<Real>(store), x);
  GradResult<Real> result;
  Var loss = loss_node(tape, logits, labels, task, result.scores.data);
  result.loss = static_cast<double>(tape.value(loss).data[0]);
  if (!std::isfinite(result.loss)) throw Error(ErrorCode::kValidation, "non-finite loss");
  result.scores.rows = batch.shape.n;
  result.scores.cols = spec.num_classes;
  tape.backward(loss);
  result.grads = tape.parameter_grads();
  return result;
}

template <typename Real>
Tensor<Real> to_batch(std::span<const augment::NormalizedImage> images) {
  if (images.empty()) return {};
  const auto& first = images.front();
  Tensor<Real> t(static_cast<int>(images.size()), first.channels, first.height, first.width);
  const std::size_t per = first.data.size();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].data.size() != per) throw Error(ErrorCode::kShape, "ragged image batch");
    std::copy(images[i].data.begin(), images[i].data.end(),
              t.data.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return t;
}

LabelBatch gather_labels(const Split& split, std::span<const std::size_t> indices) {
  LabelBatch out;
  out.width = split.label_width;
  for (auto i : indices) {
    auto row = split.label_row(i);
    out.values.insert(out.values.end(), row.begin(), row.end());
  }
  return out;
}

#define USAA_INSTANTIATE(Real)                                                                 \
  template Var op_forward(Tape<Real>&, NeuralOp, Var, int, int, int, const ParamFeed<Real>&);  \
  template Var forward_logits(Tape<Real>&, const NetworkSpec&, const ParamFeed<Real>&, Var);   \
  template LossResult<Real> forward_loss(const NetworkSpec&, const ParamStore<Real>&,          \
                                         const Tensor<Real>&, const LabelBatch&, TaskType);    \
  template GradResult<Real> backward(const NetworkSpec&, const ParamStore<Real>&,              \
                                     const Tensor<Real>&, const LabelBatch&, TaskType);        \
  template Tensor<Real> to_batch(std::span<const augment::NormalizedImage>);

USAA_INSTANTIATE(float)
USAA_INSTANTIATE(double)
#undef USAA_INSTANTIATE

}  // namespace usaa::nn
