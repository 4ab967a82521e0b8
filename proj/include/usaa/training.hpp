#pragma once

#include <optional>
#include <span>
#include <vector>

#include "usaa/augment.hpp"
#include "usaa/dataset.hpp"
#include "usaa/metrics.hpp"
#include "usaa/network.hpp"
#include "usaa/optim.hpp"

namespace usaa {

// Shuffled mini-batches over [0, n); the last batch may be short.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch, Stream& shuffle);

inline int batches_per_epoch(std::size_t n, int batch) {
  return static_cast<int>((n + static_cast<std::size_t>(batch) - 1) / static_cast<std::size_t>(batch));
}

// One SGD step on already-normalized images. Returns the batch loss.
double train_step(const nn::NetworkSpec& spec, nn::ParamStore<float>& store,
                  std::span<const augment::NormalizedImage> images, const nn::LabelBatch& labels,
                  TaskType task, double lr, const nn::TrainConfig& config);

struct SplitEval {
  double loss = 0.0;
  Fitness fitness;
  ScoreMatrix scores;
};

inline constexpr int kEvalChunk = 128;

// Forward over a whole split, optionally transforming every image with `policy`
// (one sub-policy, per-image randomness from `rng`).
SplitEval evaluate_split(const nn::NetworkSpec& spec, const nn::ParamStore<float>& store,
                         const Split& split, TaskType task, const augment::NormStats& stats,
                         const augment::SubPolicy* policy = nullptr, Stream* rng = nullptr,
                         const augment::Magnitudes& magnitudes = {});

// Converts all images of a split with normalization only.
std::vector<augment::NormalizedImage> normalize_all(std::span<const augment::ImageU8> images,
                                                    const augment::NormStats& stats);

}  // namespace usaa
