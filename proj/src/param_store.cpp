#include "usaa/param_store.hpp"

#include <cmath>
#include <fmt/format.h>
#include <random>

#include "usaa/error.hpp"
#include "usaa/rng.hpp"

namespace usaa::nn {

std::string ParamKey::describe() const {
  return fmt::format("({},{},{},{})", cell, edge, op, role);
}

template <typename Real>
Tensor<Real> ParamStore<Real>::initial_value(const ParamKey& key, Shape shape,
                                             std::uint64_t seed) {
  Tensor<Real> t(shape);
  if (key.role == static_cast<int>(ParamRole::kBias)) return t;
  std::uint64_t h = splitmix64(seed);
  for (int part : {key.cell, key.edge, key.op, key.role}) {
    h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(part)));
  }
  std::mt19937_64 engine(h);
  const double fan_in = static_cast<double>(shape.c) * shape.h * shape.w;
  // Variance 1/fan_in: node sums and concatenation already amplify activations
  // in the absence of normalization layers.
  std::normal_distribution<double> draw(0.0, std::sqrt(1.0 / fan_in));
  for (auto& v : t.data) v = static_cast<Real>(draw(engine));
  return t;
}

template <typename Real>
Tensor<Real> ParamStore<Real>::fetch(const ParamKey& key, Shape shape) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return initial_value(key, shape, init_seed_);
  if (!(it->second.value.shape == shape)) {
    const auto& s = it->second.value.shape;
    throw Error(ErrorCode::kShape,
                fmt::format("parameter {} stored as ({},{},{},{}) but requested ({},{},{},{})",
                            key.describe(), s.n, s.c, s.h, s.w, shape.n, shape.c, shape.h,
                            shape.w));
  }
  return it->second.value;
}

template <typename Real>
ParamEntry<Real>& ParamStore<Real>::ensure(const ParamKey& key, Shape shape) {
  auto it = entries_.find(key);
  if (it != entries_.end()) {
    if (!(it->second.value.shape == shape)) {
      throw Error(ErrorCode::kShape,
                  fmt::format("parameter {} shape is immutable", key.describe()));
    }
    return it->second;
  }
  ParamEntry<Real> entry{initial_value(key, shape, init_seed_), Tensor<Real>(shape)};
  return entries_.emplace(key, std::move(entry)).first->second;
}

template <typename Real>
bool ParamStore<Real>::operator==(const ParamStore& other) const {
  if (init_seed_ != other.init_seed_ || entries_.size() != other.entries_.size()) return false;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  for (; a != entries_.end(); ++a, ++b) {
    if (a->first != b->first || !(a->second.value.shape == b->second.value.shape) ||
        a->second.value.data != b->second.value.data ||
        a->second.momentum.data != b->second.momentum.data) {
      return false;
    }
  }
  return true;
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace usaa::nn
