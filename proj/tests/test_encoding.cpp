#include "doctest.h"

#include <map>
#include <set>

#include "usaa/encoding.hpp"
#include "usaa/error.hpp"

using namespace usaa;

namespace {

// Ordered op tuples with pairwise distinct entries, by brute force.
long long count_distinct_tuples(int layers) {
  long long count = 0;
  std::vector<int> t(static_cast<std::size_t>(layers), 1);
  while (true) {
    std::set<int> s(t.begin(), t.end());
    if (static_cast<int>(s.size()) == layers) ++count;
    int i = 0;
    while (i < layers && ++t[static_cast<std::size_t>(i)] > kNumAugOps) t[static_cast<std::size_t>(i++)] = 1;
    if (i == layers) break;
  }
  return count;
}

// Sequences of K sub-policies, enumerated one by one.
long long count_policies(int layers, int k) {
  const long long sp = count_distinct_tuples(layers);
  long long total = 0;
  std::vector<long long> idx(static_cast<std::size_t>(k), 0);
  while (true) {
    ++total;
    int i = 0;
    while (i < k && ++idx[static_cast<std::size_t>(i)] >= sp) idx[static_cast<std::size_t>(i++)] = 0;
    if (i == k) break;
  }
  return total;
}

// (edge mask with 1 or 2 bits) x (op per active edge), by enumeration.
long long count_node_configs(int sources) {
  long long total = 0;
  for (int mask = 1; mask < (1 << sources); ++mask) {
    const int bits = __builtin_popcount(static_cast<unsigned>(mask));
    if (bits > 2) continue;
    long long ops = 1;
    for (int b = 0; b < bits; ++b) ops *= kNumNeuralOps;
    total += ops;
  }
  return total;
}

Individual concrete_individual() {
  Individual ind;
  ind.aug = {2, 3};
  for (auto* c : {&ind.normal, &ind.reduce}) {
    c->ops.fill(4);
    c->edges.fill(0);
    for (int node = 1; node <= kIntermediateNodes; ++node) {
      c->edges[node_edge_offset(node)] = 1;
      c->edges[node_edge_offset(node) + 1] = 1;
    }
  }
  return ind;
}

}  // namespace

TEST_CASE("augmentation space matches enumeration") {
  for (int la = 1; la <= 2; ++la)
    for (int k = 1; k <= 2; ++k)
      CHECK(aug_space_size(la, k) == BigInt(count_policies(la, k)));
  CHECK(aug_space_size(2, 10) == BigInt("17080198121677824"));
  CHECK(aug_space_size(3, 1) == 210);
  CHECK_THROWS_AS(aug_space_size(0, 1), Error);
  CHECK_THROWS_AS(aug_space_size(4, 1), Error);
  CHECK_THROWS_AS(aug_space_size(1, 0), Error);
}

TEST_CASE("node factors match enumeration") {
  CHECK(arch_node_factor(3) == 168);
  CHECK(arch_node_factor(4) == 322);
  CHECK(arch_node_factor(5) == 525);
  for (int n = 2; n <= 5; ++n) CHECK(arch_node_factor(n) == BigInt(count_node_configs(n)));
}

TEST_CASE("architecture space under both readings") {
  // 49 + 168*322*525 and 49 * 168*322*525, squared for two cells.
  CHECK(arch_space_size(ArchSpaceFormula::kAdditive) == BigInt("806585503401601"));
  CHECK(arch_space_size(ArchSpaceFormula::kMultiplicative) == BigInt("1936605111104160000"));
}

TEST_CASE("schedule visits every slot once") {
  for (int la = 1; la <= 3; ++la) {
    const auto s = generation_schedule(la);
    REQUIRE(s.size() == static_cast<std::size_t>(la + 34));
    std::set<std::string> names;
    for (const auto& slot : s) names.insert(slot.describe());
    CHECK(names.size() == s.size());
    CHECK(s.front() == Slot{Slot::Kind::kOp, CellKind::kNormal, 13});
    CHECK(s[14] == Slot{Slot::Kind::kEdgeGroup, CellKind::kNormal, 4});
    CHECK(s[16] == Slot{Slot::Kind::kEdgeGroup, CellKind::kNormal, 2});
    CHECK(s[17] == Slot{Slot::Kind::kOp, CellKind::kReduce, 13});
    CHECK(s.back() == Slot{Slot::Kind::kAug, CellKind::kNormal, 0});
    for (int i = 0; i < la; ++i) CHECK(s[34 + static_cast<std::size_t>(i)].index == la - 1 - i);
  }
  CHECK_THROWS_AS(generation_schedule(0), Error);
  CHECK_THROWS_AS(generation_schedule(4), Error);
}

TEST_CASE("edge group choices") {
  const auto c = edge_group_choices(3);
  REQUIRE(c.size() == 6);
  CHECK(c[0] == std::vector<int>{1, 0, 0});
  CHECK(c[3] == std::vector<int>{1, 1, 0});
  CHECK(c[5] == std::vector<int>{0, 1, 1});
  CHECK(edge_group_choices(4).size() == 10);
  CHECK(edge_group_choices(5).size() == 15);
}

TEST_CASE("validation") {
  auto ind = concrete_individual();
  CHECK(validate(ind, 2).ok());
  CHECK_FALSE(validate(ind, 1).ok());

  auto dup = ind;
  dup.aug = {3, 3};
  CHECK_FALSE(validate(dup, 2).ok());
  dup.aug = {1, 1};
  CHECK(validate(dup, 2).ok());
  dup.aug = {8, 1};
  CHECK_FALSE(validate(dup, 2).ok());

  auto bad = ind;
  bad.normal.edges[0] = 0;
  CHECK_FALSE(validate(bad, 2).ok());
  bad = ind;
  bad.normal.edges[2] = bad.normal.edges[3] = 0;
  CHECK_FALSE(validate(bad, 2).ok());
  bad = ind;
  bad.reduce.edges[9] = bad.reduce.edges[10] = bad.reduce.edges[11] = 1;
  CHECK_FALSE(validate(bad, 2).ok());
  bad = ind;
  bad.reduce.ops[4] = 0;
  CHECK_FALSE(validate(bad, 2).ok());

  Individual open;
  open.aug = {-1, -1};
  open.normal = CellEncoding::random_codes();
  open.reduce = CellEncoding::random_codes();
  CHECK(validate(open, 2).ok());
}

TEST_CASE("sample_concrete keeps fixed slots and yields valid individuals") {
  Individual open;
  open.aug = {-1, 6, -1};
  open.normal = CellEncoding::random_codes();
  open.reduce = CellEncoding::random_codes();
  open.normal.ops[3] = 7;
  open.reduce.edges[9] = 1;
  Stream rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto c = sample_concrete(open, rng);
    REQUIRE(c.concrete());
    CHECK(validate(c, 3).ok());
    CHECK(c.aug[1] == 6);
    CHECK(c.normal.ops[3] == 7);
    CHECK(c.reduce.edges[9] == 1);
    CHECK(c.normal.edges[0] == 1);
    CHECK(c.normal.edges[1] == 1);
  }
  const auto fixed = concrete_individual();
  CHECK(sample_concrete(fixed, rng) == fixed);
}

TEST_CASE("sample_concrete is uniform over feasible values") {
  Individual open;
  open.aug = {-1, -1};
  open.normal = CellEncoding::random_codes();
  open.reduce = CellEncoding::random_codes();
  Stream rng(11);
  const int n = 42000;
  std::map<std::vector<int>, int> sub;
  std::map<int, int> ops;
  std::map<std::vector<int>, int> node3;
  for (int i = 0; i < n; ++i) {
    const auto c = sample_concrete(open, rng);
    ++sub[c.aug];
    ++ops[c.normal.ops[0]];
    ++node3[{c.normal.edges.begin() + 5, c.normal.edges.begin() + 9}];
  }
  CHECK(sub.size() == 42);
  for (auto& [k, v] : sub) CHECK(std::abs(v - n / 42) < 250);  // ~5 sigma
  CHECK(ops.size() == 7);
  for (auto& [k, v] : ops) CHECK(std::abs(v - n / 7) < 600);
  CHECK(node3.size() == 10);
  for (auto& [k, v] : node3) CHECK(std::abs(v - n / 10) < 700);
}

TEST_CASE("sample_concrete reports an infeasible edge group") {
  Individual ind = concrete_individual();
  ind.normal.edges = {1, 1, 1, 0, 0, 1, 1, 1, -1, 1, 1, 0, 0, 0};
  Stream rng(1);
  try {
    sample_concrete(ind, rng);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kExhausted);
  }
}

TEST_CASE("json round trip") {
  Individual ind = concrete_individual();
  ind.aug = {-1, 5};
  ind.reduce.ops[2] = -1;
  const auto j = to_json(ind);
  CHECK(j["augment"][1] == "RandomRotate");
  CHECK(individual_from_json(j) == ind);
  CHECK(cell_from_json(to_json(ind.normal)) == ind.normal);
}

TEST_CASE("op names") {
  CHECK(aug_op_name(4) == "VerticalFlip");
  CHECK(aug_op_from_name("Cutout") == 6);
  CHECK_FALSE(aug_op_from_name("Mixup").has_value());
  CHECK(neural_op_name(7) == "DilConv5x5");
  CHECK_THROWS_AS(aug_op_name(0), Error);
  CHECK_THROWS_AS(neural_op_name(8), Error);
}
