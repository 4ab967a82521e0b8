#include "usaa/pipeline.hpp"

#include <chrono>
#include <fmt/format.h>
#include <omp.h>
#include <spdlog/spdlog.h>
#include <sys/utsname.h>

#include "usaa/checkpoint.hpp"
#include "usaa/config.hpp"
#include "usaa/error.hpp"
#include "usaa/kernels.hpp"
#include "usaa/training.hpp"

namespace usaa {

std::vector<TrialSpec> stage_one_schedule() {
  std::vector<TrialSpec> out;
  for (int la : {1, 2, 3}) {
    for (int ln : {2, 6, 10}) out.push_back({la, ln});
  }
  return out;
}

TrialSpec refinement_trial(const TrialSpec& best, const std::map<TrialSpec, double>& scores) {
  auto score = [&](int cells) -> std::optional<double> {
    auto it = scores.find({best.aug_layers, cells});
    if (it == scores.end()) return std::nullopt;
    return it->second;
  };
  constexpr int kGridStep = 4;
  const auto lower = score(best.cells - kGridStep);
  const auto upper = score(best.cells + kGridStep);
  int direction = -1;
  if (upper && (!lower || *upper > *lower)) direction = 1;
  const int cells = std::clamp(best.cells + 2 * direction, nn::kMinCells, nn::kMaxCells);
  return {best.aug_layers, cells};
}

std::uint64_t trial_seed(std::uint64_t seed, const TrialSpec& spec) {
  return splitmix64(seed ^ fnv1a64(fmt::format("trial-{}-{}", spec.aug_layers, spec.cells)));
}

namespace {

std::uint64_t model_init_seed(std::uint64_t seed) {
  return splitmix64(seed ^ fnv1a64("final-train-init"));
}

}  // namespace

FinalTrainResult final_train(const Individual& architecture, int cells, int c_init,
                             const augment::Policy& policy, const Split& train, const Split& val,
                             TaskType task, int num_outputs, int channels, int epochs,
                             const nn::TrainConfig& train_config,
                             const augment::Magnitudes& magnitudes,
                             augment::PolicySampling sampling, std::uint64_t seed) {
  if (epochs < 1) throw Error(ErrorCode::kParameter, "final training needs at least one epoch");
  if (policy.empty()) throw Error(ErrorCode::kParameter, "policy must contain a sub-policy");
  if (train.empty() || val.empty()) throw Error(ErrorCode::kParameter, "train and val must be non-empty");

  StreamSet streams(seed);
  TrainedModel model{nn::build_network(architecture, cells, c_init, num_outputs, channels),
                     architecture,
                     policy,
                     augment::compute_norm_stats(train.images),
                     task,
                     nn::ParamStore<float>(model_init_seed(seed))};
  const int per_epoch = batches_per_epoch(train.size(), train_config.batch);
  const double horizon = static_cast<double>(epochs) * per_epoch;

  FinalTrainResult out;
  // Snapshots that can still win: within the selection tolerance of the best AUC.
  std::vector<std::pair<std::size_t, nn::ParamStore<float>>> kept;
  double best_auc = -1.0;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto& batch : epoch_batches(train.size(), train_config.batch, streams.shuffle)) {
      std::vector<augment::ImageU8> images;
      images.reserve(batch.size());
      for (auto i : batch) images.push_back(train.images[i]);
      const auto normalized = augment::apply_policy_batch(policy, images, model.stats,
                                                          streams.augmentation, magnitudes, sampling);
      const double lr = nn::cosine_lr(static_cast<double>(step), horizon, train_config.lr0);
      const double loss = train_step(model.spec, model.store, normalized,
                                     nn::gather_labels(train, batch), task, lr, train_config);
      loss_sum += loss * static_cast<double>(batch.size());
      ++step;
    }
    const auto eval = evaluate_split(model.spec, model.store, val, task, model.stats);
    EpochRecord rec{epoch, {eval.fitness.auc, eval.loss, loss_sum / static_cast<double>(train.size())},
                    eval.fitness.acc};
    out.epochs.push_back(rec);
    spdlog::debug("epoch {}: train loss {:.4f} val loss {:.4f} val auc {:.4f}", epoch,
                  rec.record.train_loss, rec.record.val_loss, rec.record.val_auc);

    best_auc = std::max(best_auc, rec.record.val_auc);
    const double floor = best_auc - kSelectionTolerance - 1e-12;
    if (rec.record.val_auc >= floor) kept.emplace_back(out.epochs.size() - 1, model.store);
    std::erase_if(kept, [&](const auto& entry) {
      return out.epochs[entry.first].record.val_auc < floor;
    });
  }

  std::vector<ModelRecord> records;
  for (const auto& e : out.epochs) records.push_back(e.record);
  out.selected = select_model(records);
  for (auto& [index, snapshot] : kept) {
    if (index == out.selected) model.store = std::move(snapshot);
  }
  out.val = {out.epochs[out.selected].record.val_auc, out.epochs[out.selected].val_acc};
  out.model = std::move(model);
  return out;
}

TestReport evaluate_model(const TrainedModel& model, const Split& split) {
  const auto eval = evaluate_split(model.spec, model.store, split, model.task, model.stats);
  return {eval.fitness, eval.loss};
}

PipelineResult run_pipeline(const PipelineConfig& config, const DatasetBundle& data,
                            std::uint64_t seed, const TrialCallback& on_trial,
                            const GenerationCallback& on_generation) {
  if (config.budget < 1) throw Error(ErrorCode::kParameter, "trial budget must be at least 1");
  validate_bundle(data);
  if (config.budget < kStageOneTrials) {
    spdlog::warn("budget {} truncates the {}-trial coarse grid", config.budget, kStageOneTrials);
  } else if (config.budget > kMaxTrials) {
    spdlog::warn("budget {} exceeds the {}-trial schedule; extra trials are not used",
                 config.budget, kMaxTrials);
  }
  auto schedule = stage_one_schedule();
  schedule.resize(std::min<std::size_t>(schedule.size(), static_cast<std::size_t>(config.budget)));

  PipelineResult result;
  std::map<TrialSpec, double> scores;
  auto run_trial = [&](const TrialSpec& spec) {
    const auto start = std::chrono::steady_clock::now();
    TrialResult trial;
    trial.spec = spec;
    trial.seed = trial_seed(seed, spec);
    SearchConfig search = config.search;
    search.aug_layers = spec.aug_layers;
    search.cells = spec.cells;
    spdlog::info("trial {}: L_a = {}, L_n = {}", result.trials.size() + 1, spec.aug_layers, spec.cells);
    trial.search = run_search(search, data, trial.seed, on_generation);
    trial.selection = final_train(trial.search.architecture, spec.cells, search.c_init,
                                  trial.search.policy, data.train, data.val, data.task,
                                  data.num_outputs(), data.channels, config.selection_epochs,
                                  search.train, search.magnitudes, config.sampling, trial.seed);
    trial.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    scores[spec] = trial.selection.val.auc;
    if (on_trial) on_trial(trial);
    result.trials.push_back(std::move(trial));
  };

  for (const auto& spec : schedule) run_trial(spec);
  if (config.budget >= kMaxTrials) {
    std::size_t best_stage_one = 0;
    for (std::size_t i = 1; i < result.trials.size(); ++i) {
      if (result.trials[i].selection.val.auc > result.trials[best_stage_one].selection.val.auc) {
        best_stage_one = i;
      }
    }
    run_trial(refinement_trial(result.trials[best_stage_one].spec, scores));
  }

  std::vector<ModelRecord> records;
  for (const auto& t : result.trials) records.push_back(t.selection.epochs[t.selection.selected].record);
  result.best = select_model(records);
  const auto& winner = result.trials[result.best];
  spdlog::info("winner: L_a = {}, L_n = {}; final training for {} epochs", winner.spec.aug_layers,
               winner.spec.cells, config.final_epochs);
  result.final = final_train(winner.search.architecture, winner.spec.cells, config.search.c_init,
                             winner.search.policy, data.train, data.val, data.task,
                             data.num_outputs(), data.channels, config.final_epochs,
                             config.search.train, config.search.magnitudes, config.sampling,
                             splitmix64(winner.seed ^ fnv1a64("final")));
  // The test split is read exactly once, after selection.
  result.test = evaluate_model(result.final.model, data.test);
  return result;
}

nlohmann::json policy_to_json(const augment::Policy& policy) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& sp : policy) {
    nlohmann::json names = nlohmann::json::array();
    for (auto op : sp) names.push_back(std::string(aug_op_name(static_cast<int>(op))));
    out.push_back(names);
  }
  return out;
}

augment::Policy policy_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::kFormat, "policy must be a non-empty list");
  augment::Policy policy;
  for (const auto& sp : j) {
    if (!sp.is_array()) throw Error(ErrorCode::kFormat, "sub-policy must be a list of op names");
    std::vector<int> codes;
    for (const auto& name : sp) {
      const auto id = aug_op_from_name(name.get<std::string>());
      if (!id) throw Error(ErrorCode::kFormat, "unknown augmentation op " + name.dump());
      codes.push_back(*id);
    }
    policy.push_back(augment::subpolicy_from_codes(codes));
  }
  return policy;
}

void save_model(const std::filesystem::path& path, const TrainedModel& model,
                const nlohmann::json& extra) {
  nlohmann::json meta;
  meta["kind"] = "model";
  meta["architecture"] = to_json(model.architecture);
  meta["cells"] = model.spec.cells;
  meta["c_init"] = model.spec.c_init;
  meta["num_outputs"] = model.spec.num_classes;
  meta["input_channels"] = model.spec.input_channels;
  meta["task"] = std::string(task_name(model.task));
  meta["policy"] = policy_to_json(model.policy);
  meta["norm_mean"] = model.stats.mean;
  meta["norm_std"] = model.stats.stddev;
  if (!extra.is_null()) meta["extra"] = extra;
  nn::save_checkpoint(path, model.store, meta);
}

TrainedModel load_model(const std::filesystem::path& path) {
  auto checkpoint = nn::load_checkpoint(path);
  const auto& meta = checkpoint.meta;
  if (meta.value("kind", "") != "model") {
    throw Error(ErrorCode::kFormat, path.string() + " is not a model checkpoint");
  }
  const Individual arch = individual_from_json(meta.at("architecture"));
  return {nn::build_network(arch, meta.at("cells").get<int>(), meta.at("c_init").get<int>(),
                            meta.at("num_outputs").get<int>(), meta.at("input_channels").get<int>()),
          arch,
          policy_from_json(meta.at("policy")),
          {meta.at("norm_mean").get<std::vector<double>>(), meta.at("norm_std").get<std::vector<double>>()},
          task_from_name(meta.at("task").get<std::string>()),
          std::move(checkpoint.store)};
}

nlohmann::json environment_fingerprint() {
  nlohmann::json env;
  env["compiler"] = __VERSION__;
  env["cplusplus"] = __cplusplus;
  env["openmp"] = _OPENMP;
  env["omp_max_threads"] = omp_get_max_threads();
  env["kernel_backend"] = nn::kernel_backend() == nn::KernelBackend::kSerial ? "serial" : "parallel";
#ifdef NDEBUG
  env["assertions"] = false;
#else
  env["assertions"] = true;
#endif
  utsname uts{};
  if (uname(&uts) == 0) {
    env["system"] = uts.sysname;
    env["release"] = uts.release;
    env["machine"] = uts.machine;
  }
  return env;
}

namespace {

nlohmann::json epochs_json(const FinalTrainResult& r) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    out.push_back({{"epoch", e.epoch},
                   {"val_auc", e.record.val_auc},
                   {"val_acc", e.val_acc},
                   {"val_loss", e.record.val_loss},
                   {"train_loss", e.record.train_loss}});
  }
  return out;
}

}  // namespace

nlohmann::json pipeline_report(const PipelineConfig& config, std::uint64_t seed,
                               const PipelineResult& result) {
  nlohmann::json report;
  report["seed"] = seed;
  report["config"] = to_json(config);
  report["trials"] = nlohmann::json::array();
  for (const auto& t : result.trials) {
    nlohmann::json encodings = nlohmann::json::array();
    for (const auto& ind : t.search.outputs) encodings.push_back(to_json(ind));
    report["trials"].push_back({{"aug_layers", t.spec.aug_layers},
                                {"cells", t.spec.cells},
                                {"seed", t.seed},
                                {"encodings", encodings},
                                {"policy", policy_to_json(t.search.policy)},
                                {"search_log_digest", fmt::format("{:016x}", t.search.digest)},
                                {"selection_val_auc", t.selection.val.auc},
                                {"selection_val_acc", t.selection.val.acc},
                                {"selection_epoch", t.selection.selected},
                                {"wall_time", t.wall_time}});
  }
  const auto& winner = result.trials.at(result.best);
  report["best_trial"] = result.best;
  report["searched"] = {{"architecture", to_json(winner.search.architecture)},
                        {"cells", winner.spec.cells},
                        {"aug_layers", winner.spec.aug_layers},
                        {"policy", policy_to_json(winner.search.policy)}};
  report["final"] = {{"epochs", epochs_json(result.final)},
                     {"selected_epoch", result.final.selected},
                     {"val_auc", result.final.val.auc},
                     {"val_acc", result.final.val.acc}};
  report["test"] = {{"auc", result.test.fitness.auc},
                    {"acc", result.test.fitness.acc},
                    {"loss", result.test.loss}};
  report["environment"] = environment_fingerprint();
  return report;
}

}  // namespace usaa
