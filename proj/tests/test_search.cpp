#include "doctest.h"

#include <filesystem>

#include "toy_data.hpp"
#include "usaa/error.hpp"
#include "usaa/search.hpp"

using namespace usaa;
namespace fs = std::filesystem;

namespace {

SearchConfig tiny_config() {
  SearchConfig c;
  c.aug_layers = 1;
  c.cells = 1;
  c.c_init = 4;
  c.num_subpolicies = 3;
  c.population_arch = 2;
  c.population_aug = 4;
  c.warmup_epochs = 1;
  c.generation_epochs = 1;
  c.eval_repeats = 2;
  c.train.batch = 16;
  return c;
}

Individual open_parent() {
  return {{kRandomCode, 3}, CellEncoding::random_codes(), CellEncoding::random_codes()};
}

}  // namespace

TEST_CASE("initial population") {
  const auto p = init_population(2);
  REQUIRE(p.size() == 1);
  CHECK(p[0].aug == std::vector<int>{1, 1});
  CHECK(p[0].normal == CellEncoding::random_codes());
  CHECK(validate(p[0], 2).ok());
}

TEST_CASE("children per slot kind") {
  const std::vector<Individual> one{open_parent()};
  CHECK(generate_children(one, {Slot::Kind::kOp, CellKind::kNormal, 13}).size() == 7);
  CHECK(generate_children(one, {Slot::Kind::kEdgeGroup, CellKind::kReduce, 4}).size() == 15);
  CHECK(generate_children(one, {Slot::Kind::kEdgeGroup, CellKind::kNormal, 3}).size() == 10);
  CHECK(generate_children(one, {Slot::Kind::kEdgeGroup, CellKind::kNormal, 2}).size() == 6);
  // Slot 0 may take any op but the HorizontalFlip held by slot 1.
  const auto aug = generate_children(one, {Slot::Kind::kAug, CellKind::kNormal, 0});
  CHECK(aug.size() == 6);
  for (const auto& c : aug) CHECK(c.aug[0] != 3);

  // Children are merged across parents.
  auto other = open_parent();
  other.normal.ops[13] = 2;
  const std::vector<Individual> two{one[0], other};
  CHECK(generate_children(two, {Slot::Kind::kOp, CellKind::kNormal, 13}).size() == 7);
  CHECK(generate_children(two, {Slot::Kind::kOp, CellKind::kNormal, 12}).size() == 14);
  for (const auto& c : generate_children(two, {Slot::Kind::kEdgeGroup, CellKind::kNormal, 4}))
    CHECK(validate(c, 2).ok());
}

TEST_CASE("opening augmentation slots") {
  std::vector<Individual> pop{open_parent(), open_parent()};
  pop[0].aug = {1, 1};
  pop[1].aug = {1, 5};
  open_augmentation_slots(pop);
  CHECK(pop[0].aug == std::vector<int>{-1, -1});
  CHECK(pop[1].aug == std::vector<int>{-1, 5});
}

TEST_CASE("ranking by auc") {
  const std::vector<Fitness> f{{0.8, 0.5}, {0.9, 0.1}, {0.9, 0.3}, {0.8, 0.5}};
  CHECK(best_by_auc(f) == 2);
  CHECK(top_by_auc(f, 3) == std::vector<std::size_t>{2, 1, 0});
  CHECK(top_by_auc(f, 10).size() == 4);
  CHECK_THROWS_AS(best_by_auc({}), Error);
}

TEST_CASE("config validation") {
  auto c = tiny_config();
  CHECK_NOTHROW(validate_config(c));
  c.cells = 13;
  CHECK_THROWS_AS(validate_config(c), Error);
  c = tiny_config();
  c.aug_layers = 0;
  CHECK_THROWS_AS(validate_config(c), Error);
  c = tiny_config();
  c.train.batch = 0;
  CHECK_THROWS_AS(validate_config(c), Error);
}

TEST_CASE("log digest ignores wall time") {
  std::vector<nlohmann::json> a{{{"generation", 0}, {"wall_time", 1.0}}};
  std::vector<nlohmann::json> b{{{"generation", 0}, {"wall_time", 2.5}}};
  std::vector<nlohmann::json> c{{{"generation", 1}, {"wall_time", 1.0}}};
  CHECK(log_digest(a) == log_digest(b));
  CHECK(log_digest(a) != log_digest(c));
}

TEST_CASE("a full tiny search") {
  const auto data = toy::bar_bundle(32, 12, 8, 1);
  const auto config = tiny_config();
  std::size_t generations = 0;
  const auto r = run_search(config, data, 5, [&](const nlohmann::json& rec) {
    CHECK(rec["generation"] == generations);
    ++generations;
  });
  CHECK(generations == 35);
  CHECK(r.log.size() == 35);
  CHECK(r.outputs.size() == 3);
  CHECK(r.policy.size() == 3);
  CHECK(r.architecture.arch_concrete());
  CHECK(validate(r.architecture, 1).ok());
  for (const auto& o : r.outputs) {
    CHECK(o.normal == r.architecture.normal);
    CHECK(o.reduce == r.architecture.reduce);
    CHECK(o.concrete());
  }
  // Population sizes of the arch and augmentation phases.
  CHECK(r.log[5]["survivors"].size() == 2);
  CHECK(r.log[33]["survivors"].size() == 1);
  CHECK(r.log[34]["evaluated"].size() == 7);
  // Output sub-policies are the best by AUC among the evaluated children.
  double worst_kept = 1.0;
  for (const auto& f : r.output_fitness) worst_kept = std::min(worst_kept, f.auc);
  int better = 0;
  for (const auto& e : r.log[34]["evaluated"]) better += e["auc"].get<double>() > worst_kept;
  CHECK(better <= 2);
  CHECK(r.digest == log_digest(r.log));
}

TEST_CASE("same seed, same digest; resume is bit-identical") {
  const auto data = toy::bar_bundle(32, 12, 8, 2);
  const auto config = tiny_config();
  SearchSession full(config, data, 9);
  while (!full.done()) full.step();
  const auto a = full.result();
  const auto b = run_search(config, data, 9);
  CHECK(a.digest == b.digest);

  const auto dir = fs::temp_directory_path() / "usaa-search-resume";
  fs::create_directories(dir);
  SearchSession part(config, data, 9);
  for (int i = 0; i < 12; ++i) part.step();
  part.save(dir / "state.ckpt");
  auto resumed = SearchSession::resume(dir / "state.ckpt", config, data);
  CHECK(resumed.cursor() == 12);
  while (!resumed.done()) resumed.step();
  const auto c = resumed.result();
  CHECK(c.digest == a.digest);
  CHECK(c.outputs == a.outputs);
  CHECK(resumed.store() == full.store());

  CHECK(run_search(config, data, 10).digest != a.digest);

  auto other = config;
  other.c_init = 5;
  CHECK_THROWS_AS(SearchSession::resume(dir / "state.ckpt", other, data), Error);
  const auto small = toy::bar_bundle(30, 12, 8, 2);
  CHECK_THROWS_AS(SearchSession::resume(dir / "state.ckpt", config, small), Error);
}
