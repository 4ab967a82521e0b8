#pragma once

#include <span>
#include <vector>

#include "usaa/dataset.hpp"

namespace usaa {

// Row-major (rows x cols) scores: softmax probabilities or per-label sigmoids.
struct ScoreMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

struct Fitness {
  double auc = 0.0;
  double acc = 0.0;
  bool operator==(const Fitness&) const = default;
};

// Mann-Whitney AUC with midranks. Throws kUndefined unless both classes occur.
double auc_binary(std::span<const double> scores, std::span<const int> labels);

// `labels` holds one entry per row, or rows x cols 0/1 entries for multi-label.
// Multi-class and ordinal use the unweighted one-vs-rest mean over classes that
// occur both as positives and negatives; multi-label averages per-label AUC.
double auc_task(const ScoreMatrix& scores, std::span<const int> labels, TaskType task);

// Arg-max match rate (lowest index wins ties); multi-label counts cells where
// (score >= 0.5) equals the label.
double accuracy_task(const ScoreMatrix& scores, std::span<const int> labels, TaskType task);

struct ModelRecord {
  double val_auc = 0.0;
  double val_loss = 0.0;
  double train_loss = 0.0;
};

inline constexpr double kSelectionTolerance = 0.001;

// Highest val_auc; candidates within kSelectionTolerance of it are ranked by
// the smaller (val_loss - train_loss), then by index.
std::size_t select_model(std::span<const ModelRecord> candidates);

}  // namespace usaa
