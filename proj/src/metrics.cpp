#include "usaa/metrics.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <numeric>

#include "usaa/error.hpp"

namespace usaa {

double auc_binary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kShape, "scores and labels differ in length");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        positive_rank_sum += midrank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::kUndefined, "AUC undefined: labels contain a single class");
  }
  const double np = static_cast<double>(positives);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(negatives));
}

namespace {

void check_shape(const ScoreMatrix& scores, std::size_t label_count, TaskType task) {
  const auto rows = static_cast<std::size_t>(scores.rows);
  const std::size_t expected =
      task == TaskType::kMultiLabel ? rows * static_cast<std::size_t>(scores.cols) : rows;
  if (label_count != expected || scores.data.size() != rows * static_cast<std::size_t>(scores.cols)) {
    throw Error(ErrorCode::kShape, "score matrix and labels disagree in size");
  }
}

}  // namespace

double auc_task(const ScoreMatrix& scores, std::span<const int> labels, TaskType task) {
  check_shape(scores, labels.size(), task);
  const auto rows = static_cast<std::size_t>(scores.rows);
  std::vector<double> column(rows);
  std::vector<int> target(rows);

  if (task == TaskType::kBinary) {
    if (scores.cols != 2) throw Error(ErrorCode::kShape, "binary task expects two score columns");
    for (std::size_t r = 0; r < rows; ++r) {
      column[r] = scores.at(static_cast<int>(r), 1);
      target[r] = labels[r] == 1 ? 1 : 0;
    }
    return auc_binary(column, target);
  }

  double total = 0.0;
  int used = 0;
  for (int c = 0; c < scores.cols; ++c) {
    std::size_t positives = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      column[r] = scores.at(static_cast<int>(r), c);
      const int label = task == TaskType::kMultiLabel
                            ? labels[r * static_cast<std::size_t>(scores.cols) + static_cast<std::size_t>(c)]
                            : (labels[r] == c ? 1 : 0);
      target[r] = label;
      positives += static_cast<std::size_t>(label);
    }
    if (positives == 0 || positives == rows) continue;
    total += auc_binary(column, target);
    ++used;
  }
  if (used == 0) {
    throw Error(ErrorCode::kUndefined, "AUC undefined: no class has both positives and negatives");
  }
  return total / used;
}

double accuracy_task(const ScoreMatrix& scores, std::span<const int> labels, TaskType task) {
  check_shape(scores, labels.size(), task);
  if (scores.rows == 0) return 0.0;
  if (task == TaskType::kMultiLabel) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < scores.data.size(); ++i) {
      hits += (scores.data[i] >= 0.5 ? 1 : 0) == labels[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(scores.data.size());
  }
  std::size_t hits = 0;
  for (int r = 0; r < scores.rows; ++r) {
    int best = 0;
    for (int c = 1; c < scores.cols; ++c) {
      if (scores.at(r, c) > scores.at(r, best)) best = c;
    }
    hits += best == labels[static_cast<std::size_t>(r)] ? 1 : 0;
  }
  return static_cast<double>(hits) / scores.rows;
}

std::size_t select_model(std::span<const ModelRecord> candidates) {
  if (candidates.empty()) throw Error(ErrorCode::kParameter, "no candidate models");
  double best_auc = candidates.front().val_auc;
  for (const auto& c : candidates) best_auc = std::max(best_auc, c.val_auc);
  std::size_t chosen = candidates.size();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    // Inclusive boundary; the slack absorbs decimal rounding of the tolerance.
    if (candidates[i].val_auc < best_auc - kSelectionTolerance - 1e-12) continue;
    if (chosen == candidates.size()) {
      chosen = i;
      continue;
    }
    const double gap = candidates[i].val_loss - candidates[i].train_loss;
    const double chosen_gap = candidates[chosen].val_loss - candidates[chosen].train_loss;
    if (gap < chosen_gap) chosen = i;
  }
  return chosen;
}

}  // namespace usaa
