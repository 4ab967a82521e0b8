#pragma once

// Central finite differences against the tape's reverse pass, in double.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

#include "usaa/network.hpp"
#include "usaa/rng.hpp"

namespace usaa::gradcheck {

using nn::ParamFeed;
using nn::ParamKey;
using nn::ParamStore;
using nn::Tape;
using nn::Tensor;
using nn::Var;

using Builder = std::function<Var(Tape<double>&, const ParamFeed<double>&, Var)>;

inline Tensor<double> random_tensor(nn::Shape s, Stream& rng, double scale = 1.0) {
  Tensor<double> t(s);
  for (auto& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

// Gradients below kFloor in magnitude are compared absolutely.
inline constexpr double kFloor = 1e-4;

inline double relative_error(double a, double n) {
  const double denom = std::max({std::abs(a), std::abs(n), kFloor});
  return std::abs(a - n) / denom;
}

struct Result {
  double max_rel = 0.0;
  std::size_t checked = 0;
};

// Checks d(sum(out * probe))/d(input) and /d(every parameter). `scalar_out`
// builders already return a scalar and get probe 1. At most `max_coords`
// coordinates per tensor are perturbed.
inline Result check(const Builder& build, Tensor<double> input, std::uint64_t seed,
                    bool scalar_out = false, std::size_t max_coords = 64, double h = 1e-6) {
  Stream rng(seed);
  ParamStore<double> store(seed);
  Tensor<double> probe;
  std::map<ParamKey, Tensor<double>> pgrads;
  Tensor<double> xgrad;
  {
    Tape<double> tape(true);
    Var x = tape.variable(input);
    Var out = build(tape, ParamFeed<double>(store), x);
    const auto& value = tape.value(out);
    if (scalar_out) {
      tape.backward(out);
    } else {
      probe = random_tensor(value.shape, rng);
      tape.backward(out, probe);
    }
    xgrad = tape.grad(x);
    pgrads = tape.parameter_grads();
  }
  for (const auto& [key, g] : pgrads) store.ensure(key, g.shape);

  auto objective = [&](const Tensor<double>& in) {
    Tape<double> tape(false);
    Var x = tape.constant(in);
    Var out = build(tape, ParamFeed<double>(store), x);
    const auto& v = tape.value(out);
    if (scalar_out) return v.data[0];
    double s = 0.0;
    for (std::size_t i = 0; i < v.data.size(); ++i) s += v.data[i] * probe.data[i];
    return s;
  };

  Result r;
  auto coords = [&](std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    idx.resize(std::min(n, max_coords));
    return idx;
  };
  auto record = [&](double analytic, double plus, double minus) {
    const double numeric = (plus - minus) / (2 * h);
    r.max_rel = std::max(r.max_rel, relative_error(analytic, numeric));
    ++r.checked;
  };

  if (!xgrad.empty()) {
    for (auto i : coords(input.data.size())) {
      Tensor<double> p = input, m = input;
      p.data[i] += h;
      m.data[i] -= h;
      record(xgrad.data[i], objective(p), objective(m));
    }
  }
  for (const auto& [key, g] : pgrads) {
    auto& w = store.mutable_entries().at(key).value;
    for (auto i : coords(w.data.size())) {
      const double saved = w.data[i];
      w.data[i] = saved + h;
      const double plus = objective(input);
      w.data[i] = saved - h;
      const double minus = objective(input);
      w.data[i] = saved;
      record(g.data[i], plus, minus);
    }
  }
  return r;
}

// Whole network: loss gradient w.r.t. sampled parameters of every tensor.
inline Result check_network(const nn::NetworkSpec& spec, const Tensor<double>& batch,
                            const nn::LabelBatch& labels, TaskType task, std::uint64_t seed,
                            std::size_t per_tensor = 3, double h = 1e-6) {
  ParamStore<double> store(seed);
  const auto grads = nn::backward(spec, store, batch, labels, task).grads;
  for (const auto& [key, g] : grads) store.ensure(key, g.shape);
  Stream rng(seed + 1);
  Result r;
  for (const auto& [key, g] : grads) {
    auto& w = store.mutable_entries().at(key).value;
    for (std::size_t k = 0; k < std::min(per_tensor, w.data.size()); ++k) {
      const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(w.data.size()) - 1));
      const double saved = w.data[i];
      w.data[i] = saved + h;
      const double plus = nn::forward_loss(spec, store, batch, labels, task).loss;
      w.data[i] = saved - h;
      const double minus = nn::forward_loss(spec, store, batch, labels, task).loss;
      w.data[i] = saved;
      r.max_rel = std::max(r.max_rel, relative_error(g.data[i], (plus - minus) / (2 * h)));
      ++r.checked;
    }
  }
  return r;
}

}  // namespace usaa::gradcheck
