#include "usaa/sampling_stats.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <spdlog/spdlog.h>

#include "usaa/error.hpp"

namespace usaa::stats {
namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double midrank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = midrank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double delta_theoretical_std(double sigma, long long n_train, long long n_val) {
  if (!(sigma > 0.0) || n_train < 1 || n_val < 1) {
    throw Error(ErrorCode::kParameter,
                "delta_theoretical_std needs sigma > 0 and counts >= 1");
  }
  return sigma * std::sqrt(1.0 / static_cast<double>(n_train) +
                           1.0 / static_cast<double>(n_val));
}

MonteCarloResult monte_carlo_delta_std(double sigma, long long n_train,
                                       long long n_val, long long trials,
                                       Stream& rng, double mu) {
  if (trials < 1000) {
    throw Error(ErrorCode::kParameter, "monte_carlo_delta_std needs >= 1000 trials");
  }
  if (!(sigma > 0.0) || n_train < 1 || n_val < 1) {
    throw Error(ErrorCode::kParameter, "monte_carlo_delta_std needs sigma > 0 and counts >= 1");
  }
  std::normal_distribution<double> draw(mu, sigma);
  // Welford accumulation of the per-trial difference.
  double mean = 0.0;
  double m2 = 0.0;
  for (long long t = 0; t < trials; ++t) {
    double train = 0.0;
    for (long long i = 0; i < n_train; ++i) train += draw(rng.engine());
    double val = 0.0;
    for (long long i = 0; i < n_val; ++i) val += draw(rng.engine());
    const double delta = train / static_cast<double>(n_train) - val / static_cast<double>(n_val);
    const double d = delta - mean;
    mean += d / static_cast<double>(t + 1);
    m2 += d * (delta - mean);
  }
  return {mean, std::sqrt(m2 / static_cast<double>(trials)), trials};
}

BiasRecord split_bias(const std::string& name, const Split& train, const Split& val) {
  if (train.empty() || val.empty()) {
    throw Error(ErrorCode::kParameter, "split_bias needs non-empty splits");
  }
  const std::size_t pixels = train.images.front().data.size();
  auto per_pixel_mean = [pixels](const Split& s) {
    std::vector<double> sum(pixels, 0.0);
    for (const auto& img : s.images) {
      if (img.data.size() != pixels) {
        throw Error(ErrorCode::kShape, "split_bias needs equally shaped images");
      }
      for (std::size_t p = 0; p < pixels; ++p) sum[p] += img.data[p] / 255.0;
    }
    for (double& v : sum) v /= static_cast<double>(s.size());
    return sum;
  };
  const auto mt = per_pixel_mean(train);
  const auto mv = per_pixel_mean(val);
  double grand_t = 0.0, grand_v = 0.0, sq = 0.0;
  for (std::size_t p = 0; p < pixels; ++p) {
    grand_t += mt[p];
    grand_v += mv[p];
    sq += (mt[p] - mv[p]) * (mt[p] - mv[p]);
  }
  BiasRecord r;
  r.name = name;
  r.n_train = static_cast<long long>(train.size());
  r.n_val = static_cast<long long>(val.size());
  r.delta_scalar = std::abs(grand_t - grand_v) / static_cast<double>(pixels);
  r.delta_l2 = std::sqrt(sq);
  return r;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorCode::kParameter, "spearman needs two equally sized samples (n >= 2)");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

BiasReport bias_report(std::span<const DatasetBundle> bundles) {
  BiasReport report;
  for (const auto& b : bundles) {
    report.records.push_back(split_bias(b.name, b.train, b.val));
  }
  std::stable_sort(report.records.begin(), report.records.end(),
                   [](const BiasRecord& a, const BiasRecord& b) { return a.scale() < b.scale(); });
  if (report.records.size() < 3) {
    spdlog::warn("bias report over {} bundles: rank correlation needs at least 3",
                 report.records.size());
    return report;
  }
  std::vector<double> scale, delta;
  for (const auto& r : report.records) {
    scale.push_back(static_cast<double>(r.scale()));
    delta.push_back(r.delta_scalar);
  }
  report.spearman = spearman(scale, delta);
  return report;
}

std::string bias_csv(const BiasReport& report) {
  std::string out = "name,n_train,n_val,delta_scalar,delta_l2\n";
  for (const auto& r : report.records) {
    out += fmt::format("{},{},{},{:.9g},{:.9g}\n", r.name, r.n_train, r.n_val, r.delta_scalar,
                       r.delta_l2);
  }
  return out;
}

}  // namespace usaa::stats
