#include "doctest.h"

#include <cmath>

#include "usaa/error.hpp"
#include "usaa/metrics.hpp"
#include "usaa/rng.hpp"

using namespace usaa;

namespace {

double pairwise_auc(const std::vector<double>& s, const std::vector<int>& positive) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (positive[j]) continue;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      pairs += 1;
    }
  }
  return wins / pairs;
}

// Coarse scores so that ties are frequent.
ScoreMatrix random_scores(int rows, int cols, Stream& rng) {
  ScoreMatrix m{rows, cols, {}};
  for (int i = 0; i < rows * cols; ++i) m.data.push_back(rng.uniform_int(0, 20) / 20.0);
  return m;
}

std::vector<double> column(const ScoreMatrix& m, int c) {
  std::vector<double> out;
  for (int r = 0; r < m.rows; ++r) out.push_back(m.at(r, c));
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kUsage;
}

}  // namespace

TEST_CASE("binary auc equals the pairwise count") {
  Stream rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.uniform_int(2, 200);
    auto m = random_scores(n, 2, rng);
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) labels.push_back(rng.uniform_int(0, 1));
    labels[0] = 0;
    labels[1] = 1;
    const std::vector<int> pos(labels.begin(), labels.end());
    CHECK(std::abs(auc_task(m, labels, TaskType::kBinary) - pairwise_auc(column(m, 1), pos)) <= 1e-12);
  }
}

TEST_CASE("multi-class auc is the macro one-vs-rest mean") {
  Stream rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 200;
    auto m = random_scores(n, 5, rng);
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) labels.push_back(rng.uniform_int(0, 4));
    double sum = 0;
    for (int c = 0; c < 5; ++c) {
      std::vector<int> pos;
      for (int l : labels) pos.push_back(l == c);
      sum += pairwise_auc(column(m, c), pos);
    }
    CHECK(std::abs(auc_task(m, labels, TaskType::kMultiClass) - sum / 5) <= 1e-12);
    CHECK(std::abs(auc_task(m, labels, TaskType::kOrdinal) - sum / 5) <= 1e-12);
  }
  // A class that never occurs is skipped.
  ScoreMatrix m{4, 3, {0.1, 0.2, 0.7, 0.8, 0.1, 0.1, 0.3, 0.3, 0.4, 0.6, 0.2, 0.2}};
  const std::vector<int> labels{0, 0, 1, 1};
  const double a0 = pairwise_auc(column(m, 0), {1, 1, 0, 0});
  const double a1 = pairwise_auc(column(m, 1), {0, 0, 1, 1});
  CHECK(auc_task(m, labels, TaskType::kMultiClass) == doctest::Approx((a0 + a1) / 2).epsilon(1e-12));
}

TEST_CASE("multi-label auc averages per-label auc") {
  Stream rng(3);
  const int n = 150, k = 14;
  auto m = random_scores(n, k, rng);
  std::vector<int> labels;
  for (int i = 0; i < n * k; ++i) labels.push_back(rng.uniform(0, 1) < 0.3);
  double sum = 0;
  for (int c = 0; c < k; ++c) {
    std::vector<int> pos;
    for (int r = 0; r < n; ++r) pos.push_back(labels[static_cast<std::size_t>(r * k + c)]);
    sum += pairwise_auc(column(m, c), pos);
  }
  CHECK(std::abs(auc_task(m, labels, TaskType::kMultiLabel) - sum / k) <= 1e-12);
}

TEST_CASE("auc edge cases") {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  CHECK(auc_binary(s, std::vector<int>{0, 0, 1, 1}) == doctest::Approx(0.75));
  CHECK(auc_binary(std::vector<double>(4, 0.5), std::vector<int>{0, 1, 0, 1}) == 0.5);
  CHECK(code_of([&] { auc_binary(s, std::vector<int>{1, 1, 1, 1}); }) == ErrorCode::kUndefined);
  ScoreMatrix one{2, 1, {0.1, 0.9}};
  CHECK(code_of([&] { auc_task(one, std::vector<int>{0, 1}, TaskType::kBinary); }) == ErrorCode::kShape);
}

TEST_CASE("accuracy") {
  ScoreMatrix m{3, 3, {0.2, 0.5, 0.3, 0.4, 0.4, 0.2, 0.1, 0.1, 0.8}};
  // Row 1 ties between 0 and 1: lowest index wins.
  CHECK(accuracy_task(m, std::vector<int>{1, 0, 2}, TaskType::kMultiClass) == doctest::Approx(1.0));
  CHECK(accuracy_task(m, std::vector<int>{1, 1, 2}, TaskType::kMultiClass) == doctest::Approx(2.0 / 3));
  ScoreMatrix ml{2, 2, {0.5, 0.49, 0.9, 0.1}};
  CHECK(accuracy_task(ml, std::vector<int>{1, 0, 0, 0}, TaskType::kMultiLabel) == doctest::Approx(0.75));
}

TEST_CASE("model selection tolerance") {
  // Gaps 0.3 and 0.1: the second is within 0.001 of the best and wins.
  const std::vector<ModelRecord> a{{0.9005, 0.5, 0.2}, {0.9000, 0.4, 0.3}};
  CHECK(select_model(a) == 1);
  // Outside the tolerance the higher AUC wins regardless of its gap.
  const std::vector<ModelRecord> b{{0.9020, 0.9, 0.1}, {0.9000, 0.3, 0.3}};
  CHECK(select_model(b) == 0);
  // Exactly at the tolerance boundary counts as within.
  const std::vector<ModelRecord> c{{0.901, 0.9, 0.1}, {0.900, 0.3, 0.3}};
  CHECK(select_model(c) == 1);
  // Equal gaps: lowest index.
  const std::vector<ModelRecord> d{{0.8, 0.5, 0.4}, {0.8, 0.6, 0.5}, {0.7995, 0.1, 0.0}};
  CHECK(select_model(d) == 0);
  const std::vector<ModelRecord> single{{0.5, 1, 1}};
  CHECK(select_model(single) == 0);
  CHECK_THROWS_AS(select_model({}), Error);
}
