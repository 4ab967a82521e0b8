#include "usaa/nsga2.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace usaa {

bool dominates(const Fitness& a, const Fitness& b) {
  return a.auc >= b.auc && a.acc >= b.acc && (a.auc > b.auc || a.acc > b.acc);
}

std::vector<std::vector<std::size_t>> non_dominated_sort(std::span<const Fitness> points) {
  const std::size_t n = points.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> domination_count(n, 0);
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> current;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      if (p == q) continue;
      if (dominates(points[p], points[q])) {
        dominated[p].push_back(q);
      } else if (dominates(points[q], points[p])) {
        ++domination_count[p];
      }
    }
    if (domination_count[p] == 0) current.push_back(p);
  }
  while (!current.empty()) {
    fronts.push_back(current);
    std::vector<std::size_t> next;
    for (std::size_t p : current) {
      for (std::size_t q : dominated[p]) {
        if (--domination_count[q] == 0) next.push_back(q);
      }
    }
    std::sort(next.begin(), next.end());
    current = std::move(next);
  }
  return fronts;
}

namespace {

// Dense rank of each front member on one objective (0 = smallest).
std::vector<double> dense_ranks(std::span<const Fitness> points,
                                std::span<const std::size_t> front, double Fitness::*field) {
  std::vector<double> values;
  for (std::size_t i : front) values.push_back(points[i].*field);
  std::vector<double> distinct = values;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<double> ranks;
  for (double v : values) {
    ranks.push_back(static_cast<double>(
        std::lower_bound(distinct.begin(), distinct.end(), v) - distinct.begin()));
  }
  return ranks;
}

}  // namespace

std::vector<double> crowding_distance(std::span<const Fitness> points,
                                      std::span<const std::size_t> front) {
  const std::size_t m = front.size();
  std::vector<double> distance(m, 0.0);
  if (m <= 2) {
    std::fill(distance.begin(), distance.end(), std::numeric_limits<double>::infinity());
    return distance;
  }
  for (double Fitness::*field : {&Fitness::auc, &Fitness::acc}) {
    const auto ranks = dense_ranks(points, front, field);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ranks[a] < ranks[b]; });
    const double lo = ranks[order.front()];
    const double hi = ranks[order.back()];
    if (hi == lo) continue;
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = order[k];
      if (ranks[i] == lo || ranks[i] == hi) {
        distance[i] = std::numeric_limits<double>::infinity();
      } else {
        distance[i] += (ranks[order[k + 1]] - ranks[order[k - 1]]) / (hi - lo);
      }
    }
  }
  return distance;
}

std::vector<std::size_t> nsga2_select(std::span<const Fitness> points, std::size_t target) {
  std::vector<std::size_t> survivors;
  if (target == 0) return survivors;
  for (const auto& front : non_dominated_sort(points)) {
    if (survivors.size() + front.size() <= target) {
      survivors.insert(survivors.end(), front.begin(), front.end());
      if (survivors.size() == target) break;
      continue;
    }
    const auto distance = crowding_distance(points, front);
    std::vector<std::size_t> order(front.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return distance[a] > distance[b]; });
    for (std::size_t k = 0; survivors.size() < target; ++k) survivors.push_back(front[order[k]]);
    break;
  }
  return survivors;
}

}  // namespace usaa
