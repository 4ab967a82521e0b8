#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"
#include "usaa/augment.hpp"
#include "usaa/dataset.hpp"
#include "usaa/encoding.hpp"
#include "usaa/metrics.hpp"
#include "usaa/optim.hpp"
#include "usaa/param_store.hpp"
#include "usaa/rng.hpp"

namespace usaa {

struct SearchConfig {
  int aug_layers = 2;
  int cells = 2;
  int c_init = 16;
  int num_subpolicies = 10;
  int population_arch = 7;
  int population_aug = 30;
  int warmup_epochs = 20;
  int generation_epochs = 5;
  int eval_repeats = 4;
  nn::TrainConfig train;
  augment::Magnitudes magnitudes;
};

nlohmann::json to_json(const SearchConfig& config);
void validate_config(const SearchConfig& config);

// One individual: aug = Identity x L_a, every op and edge slot random.
std::vector<Individual> init_population(int aug_layers);

// One child per feasible concrete value of `slot` for every parent; identical
// children are merged, keeping first occurrence.
std::vector<Individual> generate_children(std::span<const Individual> parents, const Slot& slot);

// Turns unprocessed augmentation slots (still Identity) into random codes.
void open_augmentation_slots(std::vector<Individual>& population);

// Index of the best point by AUC, then ACC, then position.
std::size_t best_by_auc(std::span<const Fitness> points);
// Indices of the `count` best points in that order.
std::vector<std::size_t> top_by_auc(std::span<const Fitness> points, std::size_t count);

struct SearchResult {
  int cells = 0;
  // The shared architecture; its aug vector is that of outputs[0].
  Individual architecture;
  std::vector<Individual> outputs;
  std::vector<Fitness> output_fitness;
  augment::Policy policy;
  std::vector<nlohmann::json> log;
  std::uint64_t digest = 0;
};

// Digest of log records, ignoring wall-clock fields.
std::uint64_t log_digest(std::span<const nlohmann::json> records);

// Algorithm state between generations. A session owns its parameter store.
class SearchSession {
 public:
  SearchSession(const SearchConfig& config, const DatasetBundle& data, std::uint64_t seed);

  bool done() const { return cursor_ >= schedule_.size(); }
  std::size_t cursor() const { return cursor_; }
  std::size_t generations() const { return schedule_.size(); }
  const std::vector<Individual>& population() const { return population_; }
  const std::vector<Fitness>& population_fitness() const { return fitness_; }
  const nn::ParamStore<float>& store() const { return store_; }
  const std::vector<nlohmann::json>& log() const { return log_; }
  const augment::NormStats& norm_stats() const { return stats_; }

  // Runs one generation and returns its log record.
  const nlohmann::json& step();
  SearchResult result() const;

  void save(const std::filesystem::path& path) const;
  // The config and data must match those the checkpoint was written with.
  static SearchSession resume(const std::filesystem::path& path, const SearchConfig& config,
                              const DatasetBundle& data);

 private:
  void train_stage(int epochs);
  std::vector<Fitness> evaluate(std::span<const Individual> individuals);
  nlohmann::json data_fingerprint() const;

  SearchConfig config_;
  const DatasetBundle* data_;
  std::uint64_t seed_;
  StreamSet streams_;
  nn::ParamStore<float> store_;
  augment::NormStats stats_;
  std::vector<Slot> schedule_;
  std::size_t cursor_ = 0;
  std::vector<Individual> population_;
  std::vector<Fitness> fitness_;
  std::int64_t global_step_ = 0;
  std::int64_t horizon_ = 0;
  std::vector<nlohmann::json> log_;
};

using GenerationCallback = std::function<void(const nlohmann::json&)>;

SearchResult run_search(const SearchConfig& config, const DatasetBundle& data, std::uint64_t seed,
                        const GenerationCallback& on_generation = {});

}  // namespace usaa
