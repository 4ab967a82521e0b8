#include "doctest.h"

#include <filesystem>
#include <set>

#include "toy_data.hpp"
#include "usaa/error.hpp"
#include "usaa/pipeline.hpp"

using namespace usaa;
namespace fs = std::filesystem;

namespace {

Individual fixed_arch() {
  Individual ind;
  ind.aug = {1};
  for (auto* c : {&ind.normal, &ind.reduce}) {
    c->ops = {4, 2, 1, 3, 6, 4, 5, 7, 1, 2, 4, 3, 6, 5};
    c->edges = {1, 1, 1, 0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 0};
  }
  return ind;
}

PipelineConfig tiny_pipeline() {
  PipelineConfig p;
  p.search.aug_layers = 1;
  p.search.c_init = 4;
  p.search.num_subpolicies = 2;
  p.search.population_arch = 2;
  p.search.population_aug = 3;
  p.search.warmup_epochs = 1;
  p.search.generation_epochs = 1;
  p.search.eval_repeats = 1;
  p.search.train.batch = 16;
  p.budget = 1;
  p.selection_epochs = 2;
  p.final_epochs = 3;
  return p;
}

}  // namespace

TEST_CASE("coarse grid order") {
  const auto s = stage_one_schedule();
  REQUIRE(s.size() == 9);
  CHECK(s[0] == TrialSpec{1, 2});
  CHECK(s[1] == TrialSpec{1, 6});
  CHECK(s[3] == TrialSpec{2, 2});
  CHECK(s[8] == TrialSpec{3, 10});
}

TEST_CASE("refinement direction") {
  std::map<TrialSpec, double> scores{{{2, 2}, 0.80}, {{2, 6}, 0.90}, {{2, 10}, 0.85}};
  CHECK(refinement_trial({2, 6}, scores) == TrialSpec{2, 8});
  scores[{2, 2}] = 0.86;
  CHECK(refinement_trial({2, 6}, scores) == TrialSpec{2, 4});
  scores[{2, 2}] = 0.85;
  CHECK(refinement_trial({2, 6}, scores) == TrialSpec{2, 4});
  // Missing lower neighbour at the grid edge: upper side wins.
  CHECK(refinement_trial({2, 2}, scores) == TrialSpec{2, 4});
  // Missing upper neighbour: lower side.
  CHECK(refinement_trial({2, 10}, scores) == TrialSpec{2, 8});
  // Nothing known: smaller L_n, clamped.
  CHECK(refinement_trial({1, 2}, {}) == TrialSpec{1, 1});
}

TEST_CASE("trial seeds are distinct") {
  std::set<std::uint64_t> seeds;
  for (const auto& t : stage_one_schedule()) seeds.insert(trial_seed(7, t));
  CHECK(seeds.size() == 9);
  CHECK(trial_seed(7, {1, 2}) == trial_seed(7, {1, 2}));
  CHECK(trial_seed(7, {1, 2}) != trial_seed(8, {1, 2}));
}

TEST_CASE("final training selects a recorded epoch") {
  const auto data = toy::bar_bundle(48, 16, 16, 4);
  nn::TrainConfig cfg;
  cfg.batch = 16;
  const augment::Policy policy{{AugOp::kHorizontalFlip}, {AugOp::kCutout}};
  const auto r = final_train(fixed_arch(), 2, 4, policy, data.train, data.val, data.task, 2, 1, 4,
                             cfg, {}, augment::PolicySampling::kPerBatch, 3);
  REQUIRE(r.epochs.size() == 4);
  CHECK(r.selected < 4);
  CHECK(r.val.auc == r.epochs[r.selected].record.val_auc);
  // The kept snapshot reproduces the selected epoch's validation AUC.
  CHECK(evaluate_model(r.model, data.val).fitness.auc == r.val.auc);
  const auto again = final_train(fixed_arch(), 2, 4, policy, data.train, data.val, data.task, 2, 1,
                                 4, cfg, {}, augment::PolicySampling::kPerBatch, 3);
  CHECK(again.model.store == r.model.store);
  CHECK_THROWS_AS(final_train(fixed_arch(), 2, 4, {}, data.train, data.val, data.task, 2, 1, 4, cfg,
                              {}, augment::PolicySampling::kPerBatch, 3),
                  Error);
}

TEST_CASE("model files round trip") {
  const auto data = toy::bar_bundle(32, 16, 16, 5);
  nn::TrainConfig cfg;
  cfg.batch = 16;
  const augment::Policy policy{{AugOp::kIdentity}};
  const auto r = final_train(fixed_arch(), 3, 4, policy, data.train, data.val, data.task, 2, 1, 2,
                             cfg, {}, augment::PolicySampling::kPerBatch, 1);
  const auto dir = fs::temp_directory_path() / "usaa-model";
  fs::create_directories(dir);
  save_model(dir / "m.ckpt", r.model, {{"note", "x"}});
  const auto back = load_model(dir / "m.ckpt");
  CHECK(back.spec.cells == 3);
  CHECK(back.architecture == r.model.architecture);
  CHECK(back.policy == policy);
  CHECK(back.stats.mean == r.model.stats.mean);
  CHECK(back.store == r.model.store);
  const auto t1 = evaluate_model(r.model, data.test);
  const auto t2 = evaluate_model(back, data.test);
  CHECK(t1.fitness == t2.fitness);
  CHECK(t1.loss == t2.loss);
  CHECK(policy_from_json(policy_to_json(policy)) == policy);
}

TEST_CASE("pipeline with a one-trial budget") {
  const auto data = toy::bar_bundle(32, 12, 12, 6);
  const auto config = tiny_pipeline();
  int trials = 0;
  const auto r = run_pipeline(config, data, 3, [&](const TrialResult& t) {
    CHECK(t.spec == TrialSpec{1, 2});
    ++trials;
  });
  CHECK(trials == 1);
  CHECK(r.best == 0);
  CHECK(r.final.epochs.size() == 3);
  CHECK(r.test.fitness.auc >= 0.0);
  const auto report = pipeline_report(config, 3, r);
  CHECK(report["trials"].size() == 1);
  CHECK(report["searched"]["cells"] == 2);
  CHECK(report["final"]["epochs"].size() == 3);
  CHECK(report.contains("environment"));

  auto zero = config;
  zero.budget = 0;
  CHECK_THROWS_AS(run_pipeline(zero, data, 3), Error);
}
