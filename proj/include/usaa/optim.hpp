#pragma once

#include <map>

#include "usaa/param_store.hpp"

namespace usaa::nn {

struct TrainConfig {
  double lr0 = 0.025;
  double momentum = 0.9;
  double weight_decay = 3e-4;
  int batch = 128;
  int epochs = 100;
  // Global gradient-norm ceiling; 0 disables clipping.
  double grad_clip = 5.0;
};

// 0.5 * lr0 * (1 + cos(pi * t / T)); t is clamped to [0, T].
double cosine_lr(double t, double horizon, double lr0);

// v <- m v + g + wd w ; w <- w - lr v, only for keys present in `grads`.
// Gradients are first rescaled so their global L2 norm is at most grad_clip.
template <typename Real>
void sgd_step(ParamStore<Real>& store, const std::map<ParamKey, Tensor<Real>>& grads, double lr,
              const TrainConfig& config);

double global_norm(const std::map<ParamKey, Tensor<float>>& grads);
double global_norm(const std::map<ParamKey, Tensor<double>>& grads);

}  // namespace usaa::nn
