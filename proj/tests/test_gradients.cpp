#include "doctest.h"

#include "gradcheck.hpp"

using namespace usaa;
using namespace usaa::nn;
using gradcheck::check;
using gradcheck::random_tensor;

namespace {

constexpr double kTolerance = 1e-4;

Tensor<double> input(Shape s, std::uint64_t seed) {
  Stream rng(seed);
  return random_tensor(s, rng);
}

}  // namespace

TEST_CASE("neural ops") {
  for (int op = 1; op <= kNumNeuralOps; ++op) {
    for (int stride : {1, 2}) {
      CAPTURE(op);
      CAPTURE(stride);
      auto build = [op, stride](Tape<double>& t, const ParamFeed<double>& p, Var x) {
        return op_forward(t, static_cast<NeuralOp>(op), x, stride, 0, 5, p);
      };
      const auto r = check(build, input({2, 3, 7, 7}, 10 + op), 100 + op);
      CHECK(r.checked > 0);
      CHECK(r.max_rel <= kTolerance);
    }
  }
}

TEST_CASE("stem") {
  auto build = [](Tape<double>& t, const ParamFeed<double>& p, Var x) {
    return ops::conv2d(t, x, p.get(t, ParamKey::stem(), {4, 3, 3, 3}), ConvGeometry{3, 1, 1, 1, 1});
  };
  CHECK(check(build, input({2, 3, 6, 6}, 1), 2).max_rel <= kTolerance);
}

TEST_CASE("head") {
  auto build = [](Tape<double>& t, const ParamFeed<double>& p, Var x) {
    Var pooled = ops::global_avg_pool(t, x);
    return ops::linear(t, pooled, p.get(t, ParamKey::head(ParamRole::kWeight), {5, 4, 1, 1}),
                       p.get(t, ParamKey::head(ParamRole::kBias), {5, 1, 1, 1}));
  };
  CHECK(check(build, input({3, 4, 3, 3}, 3), 4).max_rel <= kTolerance);
}

TEST_CASE("cell plumbing") {
  auto build = [](Tape<double>& t, const ParamFeed<double>&, Var x) {
    Var r = ops::relu(t, x);
    Var s = ops::add(t, r, x);
    const Var parts[] = {s, r, x};
    return ops::concat_channels(t, std::span<const Var>(parts));
  };
  CHECK(check(build, input({2, 2, 3, 3}, 5), 6).max_rel <= kTolerance);
}

TEST_CASE("softmax cross-entropy") {
  const std::vector<int> labels{0, 4, 2, 2};
  auto build = [&](Tape<double>& t, const ParamFeed<double>&, Var x) {
    return ops::softmax_cross_entropy(t, x, std::span<const int>(labels));
  };
  CHECK(check(build, input({4, 5, 1, 1}, 7), 8, true).max_rel <= kTolerance);
}

TEST_CASE("sigmoid binary cross-entropy") {
  const std::vector<int> labels{1, 0, 1, 0, 0, 1, 1, 1, 0, 0, 1, 0};
  auto build = [&](Tape<double>& t, const ParamFeed<double>&, Var x) {
    return ops::sigmoid_bce(t, x, std::span<const int>(labels));
  };
  Stream rng(9);
  CHECK(check(build, random_tensor({4, 3, 1, 1}, rng, 4.0), 10, true).max_rel <= kTolerance);
}

TEST_CASE("whole network, both losses") {
  Stream rng(31);
  Individual open{{1}, CellEncoding::random_codes(), CellEncoding::random_codes()};
  for (int trial = 0; trial < 3; ++trial) {
    const auto concrete = sample_concrete(open, rng);
    const auto spec = build_network(concrete, 3, 2, 3, 1);
    const auto batch = random_tensor({2, 1, 8, 8}, rng);
    const auto r1 = gradcheck::check_network(spec, batch, {{0, 2}, 1}, TaskType::kMultiClass, 40 + trial);
    CHECK(r1.max_rel <= kTolerance);
    const auto r2 = gradcheck::check_network(spec, batch, {{1, 0, 1, 0, 0, 1}, 3},
                                             TaskType::kMultiLabel, 50 + trial);
    CHECK(r2.max_rel <= kTolerance);
  }
}
