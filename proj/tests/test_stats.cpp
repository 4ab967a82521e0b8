#include "doctest.h"

#include <cmath>

#include "toy_data.hpp"
#include "usaa/error.hpp"
#include "usaa/sampling_stats.hpp"

using namespace usaa;
using namespace usaa::stats;

TEST_CASE("theoretical delta std") {
  CHECK(delta_theoretical_std(1.0, 50, 50) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(delta_theoretical_std(2.0, 100, 300) == doctest::Approx(2.0 * std::sqrt(1.0 / 100 + 1.0 / 300)));
  CHECK_THROWS_AS(delta_theoretical_std(0.0, 1, 1), Error);
  CHECK_THROWS_AS(delta_theoretical_std(1.0, 0, 1), Error);
}

TEST_CASE("monte carlo agrees with theory") {
  Stream rng(12);
  const auto r = monte_carlo_delta_std(1.0, 50, 50, 20000, rng, 3.0);
  CHECK(r.trials == 20000);
  CHECK(std::abs(r.stddev - 0.2) / 0.2 < 0.03);
  CHECK(std::abs(r.mean) < 0.01);
  CHECK_THROWS_AS(monte_carlo_delta_std(1.0, 50, 50, 999, rng), Error);
}

TEST_CASE("spearman with ties") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> down{9, 7, 5, 3, 1};
  CHECK(spearman(x, down) == doctest::Approx(-1.0));
  CHECK(spearman(x, x) == doctest::Approx(1.0));
  // Ranks of y: 1.5 1.5 3 4 5 -> Pearson on ranks by hand.
  const std::vector<double> tied{2, 2, 3, 4, 5};
  const double rx[] = {1, 2, 3, 4, 5};
  const double ry[] = {1.5, 1.5, 3, 4, 5};
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < 5; ++i) {
    sxy += (rx[i] - 3) * (ry[i] - 3);
    sxx += (rx[i] - 3) * (rx[i] - 3);
    syy += (ry[i] - 3) * (ry[i] - 3);
  }
  CHECK(spearman(x, tied) == doctest::Approx(sxy / std::sqrt(sxx * syy)).epsilon(1e-14));
  CHECK(spearman(x, std::vector<double>(5, 1.0)) == 0.0);
  CHECK_THROWS_AS(spearman(std::vector<double>{1}, std::vector<double>{1}), Error);
}

TEST_CASE("split bias") {
  Stream rng(3);
  const auto s = toy::noise_split(20, 1, 2, rng);
  const auto same = split_bias("same", s, s);
  CHECK(same.delta_scalar == 0.0);
  CHECK(same.delta_l2 == 0.0);

  Split a, b;
  a.images = {augment::ImageU8(28, 28, 1, 0)};
  a.labels = {0};
  b.images = {augment::ImageU8(28, 28, 1, 51)};
  b.labels = {0};
  const auto r = split_bias("ab", a, b);
  CHECK(r.delta_scalar == doctest::Approx(0.2));
  CHECK(r.delta_l2 == doctest::Approx(0.2 * 28));
  CHECK(r.scale() == 2);
}

TEST_CASE("bias report sorts by scale") {
  std::vector<DatasetBundle> bundles;
  Stream rng(9);
  for (int n : {40, 10, 20}) {
    DatasetBundle b;
    b.name = "n" + std::to_string(n);
    b.train = toy::noise_split(n, 1, 2, rng);
    b.val = toy::noise_split(n / 2, 1, 2, rng);
    bundles.push_back(std::move(b));
  }
  const auto report = bias_report(bundles);
  REQUIRE(report.records.size() == 3);
  CHECK(report.records[0].name == "n10");
  CHECK(report.records[2].name == "n40");
  CHECK(report.spearman.has_value());
  const auto csv = bias_csv(report);
  CHECK(csv.rfind("name,n_train,n_val,delta_scalar,delta_l2\nn10,10,5,", 0) == 0);

  const auto two = bias_report(std::span(bundles).first(2));
  CHECK_FALSE(two.spearman.has_value());
}
