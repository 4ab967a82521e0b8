#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "json.hpp"
#include "usaa/augment.hpp"
#include "usaa/dataset.hpp"
#include "usaa/metrics.hpp"
#include "usaa/network.hpp"
#include "usaa/search.hpp"

namespace usaa {

struct PipelineConfig {
  SearchConfig search;
  int budget = 10;
  int selection_epochs = 30;
  int final_epochs = 100;
  augment::PolicySampling sampling = augment::PolicySampling::kPerBatch;
};

struct TrialSpec {
  int aug_layers = 1;
  int cells = 2;
  auto operator<=>(const TrialSpec&) const = default;
};

inline constexpr int kStageOneTrials = 9;
inline constexpr int kMaxTrials = 10;

// The 3 x 3 coarse grid, L_a outer, L_n in {2, 6, 10} inner.
std::vector<TrialSpec> stage_one_schedule();
// (best L_a, best L_n +- 2): towards the better-scoring stage-one neighbour in
// L_n, ties (and missing neighbours) towards the smaller L_n.
TrialSpec refinement_trial(const TrialSpec& best, const std::map<TrialSpec, double>& scores);

// Everything needed to rebuild and run a trained network.
struct TrainedModel {
  nn::NetworkSpec spec;
  Individual architecture;
  augment::Policy policy;
  augment::NormStats stats;
  TaskType task = TaskType::kMultiClass;
  nn::ParamStore<float> store;
};

struct EpochRecord {
  int epoch = 0;
  ModelRecord record;
  double val_acc = 0.0;
};

struct FinalTrainResult {
  TrainedModel model;
  std::vector<EpochRecord> epochs;
  std::size_t selected = 0;
  Fitness val;
};

// Trains from scratch on `train`, sampling one sub-policy per batch (or per
// image), and keeps the epoch snapshot chosen by select_model on `val`.
FinalTrainResult final_train(const Individual& architecture, int cells, int c_init,
                             const augment::Policy& policy, const Split& train, const Split& val,
                             TaskType task, int num_outputs, int channels, int epochs,
                             const nn::TrainConfig& train_config,
                             const augment::Magnitudes& magnitudes,
                             augment::PolicySampling sampling, std::uint64_t seed);

struct TestReport {
  Fitness fitness;
  double loss = 0.0;
};

TestReport evaluate_model(const TrainedModel& model, const Split& split);

struct TrialResult {
  TrialSpec spec;
  std::uint64_t seed = 0;
  SearchResult search;
  FinalTrainResult selection;
  double wall_time = 0.0;
};

struct PipelineResult {
  std::vector<TrialResult> trials;
  std::size_t best = 0;
  FinalTrainResult final;
  TestReport test;
};

std::uint64_t trial_seed(std::uint64_t seed, const TrialSpec& spec);

using TrialCallback = std::function<void(const TrialResult&)>;

// Grid search over (L_a, L_n), then full training of the winner and one test pass.
PipelineResult run_pipeline(const PipelineConfig& config, const DatasetBundle& data,
                            std::uint64_t seed, const TrialCallback& on_trial = {},
                            const GenerationCallback& on_generation = {});

void save_model(const std::filesystem::path& path, const TrainedModel& model,
                const nlohmann::json& extra = {});
TrainedModel load_model(const std::filesystem::path& path);

nlohmann::json policy_to_json(const augment::Policy& policy);
augment::Policy policy_from_json(const nlohmann::json& j);

nlohmann::json environment_fingerprint();
nlohmann::json pipeline_report(const PipelineConfig& config, std::uint64_t seed,
                               const PipelineResult& result);

}  // namespace usaa
