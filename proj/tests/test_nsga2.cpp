#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "usaa/nsga2.hpp"
#include "usaa/rng.hpp"

using namespace usaa;

namespace {

// Peel fronts by repeatedly taking the points nobody left dominates.
std::vector<std::vector<std::size_t>> brute_fronts(const std::vector<Fitness>& p) {
  std::vector<std::vector<std::size_t>> fronts;
  std::set<std::size_t> left;
  for (std::size_t i = 0; i < p.size(); ++i) left.insert(i);
  while (!left.empty()) {
    std::vector<std::size_t> front;
    for (auto i : left) {
      bool dominated = false;
      for (auto j : left) {
        const bool geq = p[j].auc >= p[i].auc && p[j].acc >= p[i].acc;
        const bool gt = p[j].auc > p[i].auc || p[j].acc > p[i].acc;
        dominated |= geq && gt;
      }
      if (!dominated) front.push_back(i);
    }
    for (auto i : front) left.erase(i);
    fronts.push_back(front);
  }
  return fronts;
}

std::vector<Fitness> random_points(int n, Stream& rng, int levels) {
  std::vector<Fitness> p;
  for (int i = 0; i < n; ++i)
    p.push_back({rng.uniform_int(0, levels) / double(levels), rng.uniform_int(0, levels) / double(levels)});
  return p;
}

}  // namespace

TEST_CASE("dominance") {
  CHECK(dominates({0.9, 0.8}, {0.8, 0.8}));
  CHECK_FALSE(dominates({0.9, 0.8}, {0.9, 0.8}));
  CHECK_FALSE(dominates({0.9, 0.7}, {0.8, 0.8}));
}

TEST_CASE("fronts match brute force") {
  Stream rng(42);
  for (int levels : {10, 1000}) {
    const auto p = random_points(200, rng, levels);
    CHECK(non_dominated_sort(p) == brute_fronts(p));
  }
}

TEST_CASE("crowding distance") {
  const std::vector<Fitness> p{{0.1, 0.9}, {0.5, 0.5}, {0.9, 0.1}, {0.3, 0.7}};
  const std::vector<std::size_t> front{0, 1, 2, 3};
  const auto d = crowding_distance(p, front);
  CHECK(std::isinf(d[0]));
  CHECK(std::isinf(d[2]));
  // Dense ranks 0..3 on both objectives: interior gaps are 2/3 each.
  CHECK(d[1] == doctest::Approx(4.0 / 3));
  CHECK(d[3] == doctest::Approx(4.0 / 3));
}

TEST_CASE("selection sizes and order") {
  Stream rng(7);
  const auto p = random_points(49, rng, 20);
  const auto s = nsga2_select(p, 7);
  CHECK(s.size() == 7);
  CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 7);
  // The first front is admitted first when it fits.
  const auto fronts = non_dominated_sort(p);
  if (fronts[0].size() <= 7) {
    for (std::size_t i = 0; i < fronts[0].size(); ++i) CHECK(s[i] == fronts[0][i]);
  }
  CHECK(nsga2_select(p, 100).size() == 49);
  // Identical points keep insertion order.
  const std::vector<Fitness> same(6, Fitness{0.5, 0.5});
  CHECK(nsga2_select(same, 3) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("selection is invariant under monotone rescaling") {
  Stream rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_points(60, rng, 15);
    std::vector<Fitness> q;
    for (const auto& f : p) q.push_back({std::pow(f.auc, 3.0) * 7.0 - 2.0, std::exp(5.0 * f.acc)});
    CHECK(non_dominated_sort(p) == non_dominated_sort(q));
    for (std::size_t target : {std::size_t{7}, std::size_t{30}}) CHECK(nsga2_select(p, target) == nsga2_select(q, target));
  }
}
