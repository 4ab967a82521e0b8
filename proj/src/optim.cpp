#include "usaa/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "usaa/error.hpp"

namespace usaa::nn {

double cosine_lr(double t, double horizon, double lr0) {
  if (horizon <= 0.0) return lr0;
  const double ratio = std::clamp(t / horizon, 0.0, 1.0);
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * ratio));
}

template <typename Real>
double norm_of(const std::map<ParamKey, Tensor<Real>>& grads) {
  double sq = 0.0;
  for (const auto& [key, g] : grads) {
    for (Real v : g.data) sq += static_cast<double>(v) * static_cast<double>(v);
  }
  return std::sqrt(sq);
}

double global_norm(const std::map<ParamKey, Tensor<float>>& grads) { return norm_of(grads); }
double global_norm(const std::map<ParamKey, Tensor<double>>& grads) { return norm_of(grads); }

template <typename Real>
void sgd_step(ParamStore<Real>& store, const std::map<ParamKey, Tensor<Real>>& grads, double lr,
              const TrainConfig& config) {
  const auto m = static_cast<Real>(config.momentum);
  const auto wd = static_cast<Real>(config.weight_decay);
  const auto step = static_cast<Real>(lr);
  Real scale = 1;
  if (config.grad_clip > 0.0) {
    const double norm = norm_of(grads);
    if (norm > config.grad_clip) scale = static_cast<Real>(config.grad_clip / norm);
  }
  for (const auto& [key, g] : grads) {
    auto& entry = store.ensure(key, g.shape);
    if (entry.value.shape != g.shape) {
      throw Error(ErrorCode::kShape, "gradient shape differs from " + key.describe());
    }
    auto& w = entry.value.data;
    auto& v = entry.momentum.data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = m * v[i] + scale * g.data[i] + wd * w[i];
      w[i] -= step * v[i];
    }
  }
}

template void sgd_step(ParamStore<float>&, const std::map<ParamKey, Tensor<float>>&, double,
                       const TrainConfig&);
template void sgd_step(ParamStore<double>&, const std::map<ParamKey, Tensor<double>>&, double,
                       const TrainConfig&);

}  // namespace usaa::nn
