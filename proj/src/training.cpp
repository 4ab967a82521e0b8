#include "usaa/training.hpp"

#include <algorithm>
#include <numeric>

#include "usaa/error.hpp"

namespace usaa {

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch, Stream& shuffle) {
  if (batch < 1) throw Error(ErrorCode::kParameter, "batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with the stream's own integer draws keeps the order portable.
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(n, begin + static_cast<std::size_t>(batch));
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

double train_step(const nn::NetworkSpec& spec, nn::ParamStore<float>& store,
                  std::span<const augment::NormalizedImage> images, const nn::LabelBatch& labels,
                  TaskType task, double lr, const nn::TrainConfig& config) {
  const auto batch = nn::to_batch<float>(images);
  auto result = nn::backward(spec, store, batch, labels, task);
  nn::sgd_step(store, result.grads, lr, config);
  return result.loss;
}

std::vector<augment::NormalizedImage> normalize_all(std::span<const augment::ImageU8> images,
                                                    const augment::NormStats& stats) {
  std::vector<augment::NormalizedImage> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(augment::normalize(img, stats));
  return out;
}

SplitEval evaluate_split(const nn::NetworkSpec& spec, const nn::ParamStore<float>& store,
                         const Split& split, TaskType task, const augment::NormStats& stats,
                         const augment::SubPolicy* policy, Stream* rng,
                         const augment::Magnitudes& magnitudes) {
  if (policy != nullptr && rng == nullptr) {
    throw Error(ErrorCode::kParameter, "a transformed evaluation needs a stream");
  }
  SplitEval out;
  out.scores.cols = spec.num_classes;
  double loss_sum = 0.0;
  for (std::size_t begin = 0; begin < split.size(); begin += kEvalChunk) {
    const std::size_t end = std::min(split.size(), begin + kEvalChunk);
    std::vector<augment::NormalizedImage> images;
    std::vector<std::size_t> indices;
    for (std::size_t i = begin; i < end; ++i) {
      indices.push_back(i);
      images.push_back(policy != nullptr
                           ? augment::apply_subpolicy(*policy, split.images[i], stats, *rng, magnitudes)
                           : augment::normalize(split.images[i], stats));
    }
    const auto labels = nn::gather_labels(split, indices);
    const auto result = nn::forward_loss(spec, store, nn::to_batch<float>(images), labels, task);
    loss_sum += result.loss * static_cast<double>(end - begin);
    out.scores.data.insert(out.scores.data.end(), result.scores.data.begin(),
                           result.scores.data.end());
  }
  out.scores.rows = static_cast<int>(split.size());
  out.loss = split.size() > 0 ? loss_sum / static_cast<double>(split.size()) : 0.0;
  out.fitness.auc = auc_task(out.scores, split.labels, task);
  out.fitness.acc = accuracy_task(out.scores, split.labels, task);
  return out;
}

}  // namespace usaa
