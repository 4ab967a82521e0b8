#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "usaa/dataset.hpp"
#include "usaa/rng.hpp"

namespace usaa::stats {

// Standard deviation of the difference of two independent sample means:
// sigma * sqrt(1/n_train + 1/n_val).
double delta_theoretical_std(double sigma, long long n_train, long long n_val);

struct MonteCarloResult {
  double mean = 0.0;
  double stddev = 0.0;
  long long trials = 0;
};

MonteCarloResult monte_carlo_delta_std(double sigma, long long n_train,
                                       long long n_val, long long trials,
                                       Stream& rng, double mu = 0.0);

struct BiasRecord {
  std::string name;
  long long n_train = 0;
  long long n_val = 0;
  double delta_scalar = 0.0;  // |grand mean(train) - grand mean(val)|, [0,1] units
  double delta_l2 = 0.0;      // L2 norm of the per-pixel mean difference

  long long scale() const { return n_train + n_val; }
};

BiasRecord split_bias(const std::string& name, const Split& train,
                      const Split& val);

struct BiasReport {
  std::vector<BiasRecord> records;  // ascending by scale
  std::optional<double> spearman;   // corr(scale, delta_scalar), >= 3 bundles
};

BiasReport bias_report(std::span<const DatasetBundle> bundles);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

std::string bias_csv(const BiasReport& report);

}  // namespace usaa::stats
