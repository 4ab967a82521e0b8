#include "usaa/search.hpp"

#include <algorithm>
#include <chrono>
#include <fmt/format.h>
#include <numeric>
#include <set>
#include <spdlog/spdlog.h>

#include "usaa/checkpoint.hpp"
#include "usaa/error.hpp"
#include "usaa/network.hpp"
#include "usaa/nsga2.hpp"
#include "usaa/training.hpp"

namespace usaa {

nlohmann::json to_json(const SearchConfig& c) {
  return {{"aug_layers", c.aug_layers},
          {"cells", c.cells},
          {"c_init", c.c_init},
          {"num_subpolicies", c.num_subpolicies},
          {"population_arch", c.population_arch},
          {"population_aug", c.population_aug},
          {"warmup_epochs", c.warmup_epochs},
          {"generation_epochs", c.generation_epochs},
          {"eval_repeats", c.eval_repeats},
          {"lr0", c.train.lr0},
          {"momentum", c.train.momentum},
          {"weight_decay", c.train.weight_decay},
          {"batch", c.train.batch},
          {"grad_clip", c.train.grad_clip},
          {"crop_padding", c.magnitudes.crop_padding},
          {"rotate_degrees", c.magnitudes.rotate_degrees},
          {"cutout_fraction", c.magnitudes.cutout_fraction},
          {"jitter_contrast", c.magnitudes.jitter_contrast},
          {"jitter_brightness", c.magnitudes.jitter_brightness}};
}

void validate_config(const SearchConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::kParameter, what);
  };
  require(c.aug_layers >= kMinAugLayers && c.aug_layers <= kMaxAugLayers, "L_a must be in [1,3]");
  require(c.cells >= nn::kMinCells && c.cells <= nn::kMaxCells, "L_n must be in [1,12]");
  require(c.c_init >= 1, "c_init must be positive");
  require(c.num_subpolicies >= 1, "K must be positive");
  require(c.population_arch >= 1 && c.population_aug >= 1, "population sizes must be positive");
  require(c.warmup_epochs >= 1 && c.generation_epochs >= 1, "epochs must be positive");
  require(c.eval_repeats >= 1, "eval repeats must be positive");
  require(c.train.lr0 > 0 && c.train.momentum >= 0 && c.train.weight_decay >= 0 && c.train.batch >= 1,
          "invalid optimizer settings");
}

std::vector<Individual> init_population(int aug_layers) {
  if (aug_layers < kMinAugLayers || aug_layers > kMaxAugLayers) {
    throw Error(ErrorCode::kParameter, fmt::format("L_a must be in [1,3], got {}", aug_layers));
  }
  Individual ind;
  ind.aug.assign(static_cast<std::size_t>(aug_layers), static_cast<int>(AugOp::kIdentity));
  ind.normal = CellEncoding::random_codes();
  ind.reduce = CellEncoding::random_codes();
  return {ind};
}

std::vector<Individual> generate_children(std::span<const Individual> parents, const Slot& slot) {
  std::vector<Individual> children;
  std::set<Individual> seen;
  auto emit = [&](Individual child) {
    if (seen.insert(child).second) children.push_back(std::move(child));
  };
  for (const auto& parent : parents) {
    switch (slot.kind) {
      case Slot::Kind::kOp:
        for (int v = 1; v <= kNumNeuralOps; ++v) {
          Individual child = parent;
          child.cell(slot.cell).ops[static_cast<std::size_t>(slot.index)] = v;
          emit(std::move(child));
        }
        break;
      case Slot::Kind::kEdgeGroup: {
        const int offset = node_edge_offset(slot.index);
        for (const auto& mask : edge_group_choices(node_source_count(slot.index))) {
          Individual child = parent;
          auto& edges = child.cell(slot.cell).edges;
          for (std::size_t j = 0; j < mask.size(); ++j) {
            edges[static_cast<std::size_t>(offset) + j] = mask[j];
          }
          emit(std::move(child));
        }
        break;
      }
      case Slot::Kind::kAug:
        for (int v = 1; v <= kNumAugOps; ++v) {
          bool taken = false;
          for (std::size_t i = 0; i < parent.aug.size(); ++i) {
            if (static_cast<int>(i) != slot.index && parent.aug[i] == v) taken = true;
          }
          if (taken) continue;
          Individual child = parent;
          child.aug[static_cast<std::size_t>(slot.index)] = v;
          emit(std::move(child));
        }
        break;
    }
  }
  return children;
}

void open_augmentation_slots(std::vector<Individual>& population) {
  for (auto& ind : population) {
    for (int& v : ind.aug) {
      if (v == static_cast<int>(AugOp::kIdentity)) v = kRandomCode;
    }
  }
}

std::vector<std::size_t> top_by_auc(std::span<const Fitness> points, std::size_t count) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].auc != points[b].auc) return points[a].auc > points[b].auc;
    return points[a].acc > points[b].acc;
  });
  order.resize(std::min(count, order.size()));
  return order;
}

std::size_t best_by_auc(std::span<const Fitness> points) {
  if (points.empty()) throw Error(ErrorCode::kParameter, "no individuals to choose from");
  return top_by_auc(points, 1).front();
}

std::uint64_t log_digest(std::span<const nlohmann::json> records) {
  std::uint64_t h = fnv1a64("");
  for (auto record : records) {
    record.erase("wall_time");
    const std::string line = record.dump() + "\n";
    h = fnv1a64(line, h);
  }
  return h;
}

namespace {

constexpr int kStateVersion = 1;

std::uint64_t init_seed_for(std::uint64_t seed) {
  return splitmix64(seed ^ fnv1a64("parameter-init"));
}

nlohmann::json encode_population(std::span<const Individual> population) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& ind : population) out.push_back(to_json(ind));
  return out;
}

}  // namespace

SearchSession::SearchSession(const SearchConfig& config, const DatasetBundle& data,
                             std::uint64_t seed)
    : config_(config),
      data_(&data),
      seed_(seed),
      streams_(seed),
      store_(init_seed_for(seed)),
      schedule_(generation_schedule(config.aug_layers)),
      population_(init_population(config.aug_layers)) {
  validate_config(config_);
  validate_bundle(data);
  stats_ = augment::compute_norm_stats(data.train.images);
  const int per_epoch = batches_per_epoch(data.train.size(), config_.train.batch);
  const auto epochs = static_cast<std::int64_t>(config_.warmup_epochs) +
                      static_cast<std::int64_t>(schedule_.size() - 1) * config_.generation_epochs;
  horizon_ = epochs * per_epoch;
}

void SearchSession::train_stage(int epochs) {
  const Split& train = data_->train;
  for (int e = 0; e < epochs; ++e) {
    for (const auto& batch : epoch_batches(train.size(), config_.train.batch, streams_.shuffle)) {
      const auto pick = streams_.sampling.uniform_int(0, static_cast<int>(population_.size()) - 1);
      const Individual concrete =
          sample_concrete(population_[static_cast<std::size_t>(pick)], streams_.sampling);
      const auto spec = nn::build_network(concrete, config_.cells, config_.c_init,
                                          data_->num_outputs(), data_->channels);
      const auto sub_policy = augment::subpolicy_from_codes(concrete.aug);
      std::vector<augment::NormalizedImage> images;
      images.reserve(batch.size());
      for (auto i : batch) {
        images.push_back(augment::apply_subpolicy(sub_policy, train.images[i], stats_,
                                                  streams_.augmentation, config_.magnitudes));
      }
      const double lr = nn::cosine_lr(static_cast<double>(global_step_),
                                      static_cast<double>(horizon_), config_.train.lr0);
      train_step(spec, store_, images, nn::gather_labels(train, batch), data_->task, lr,
                 config_.train);
      ++global_step_;
    }
  }
}

std::vector<Fitness> SearchSession::evaluate(std::span<const Individual> individuals) {
  std::vector<Fitness> out;
  out.reserve(individuals.size());
  for (const auto& ind : individuals) {
    const Individual concrete = sample_concrete(ind, streams_.evaluation);
    const auto spec = nn::build_network(concrete, config_.cells, config_.c_init,
                                        data_->num_outputs(), data_->channels);
    const auto sub_policy = augment::subpolicy_from_codes(concrete.aug);
    // A stream-free sub-policy yields the same result on every pass.
    const int repeats = augment::deterministic(sub_policy) ? 1 : config_.eval_repeats;
    Fitness mean;
    for (int r = 0; r < repeats; ++r) {
      const auto eval = evaluate_split(spec, store_, data_->val, data_->task, stats_, &sub_policy,
                                       &streams_.evaluation, config_.magnitudes);
      mean.auc += eval.fitness.auc;
      mean.acc += eval.fitness.acc;
    }
    if (repeats > 1) {
      mean.auc /= repeats;
      mean.acc /= repeats;
    }
    out.push_back(mean);
  }
  return out;
}

const nlohmann::json& SearchSession::step() {
  if (done()) throw Error(ErrorCode::kParameter, "search already finished");
  const auto start = std::chrono::steady_clock::now();
  const Slot slot = schedule_[cursor_];
  const bool first_aug = slot.kind == Slot::Kind::kAug &&
                         (cursor_ == 0 || schedule_[cursor_ - 1].is_arch());
  if (first_aug) open_augmentation_slots(population_);

  train_stage(cursor_ == 0 ? config_.warmup_epochs : config_.generation_epochs);
  const auto children = generate_children(population_, slot);
  const auto fitness = evaluate(children);

  const bool last_arch = slot.is_arch() && !schedule_[cursor_ + 1].is_arch();
  const bool last = cursor_ + 1 == schedule_.size();
  std::vector<std::size_t> survivors;
  if (last_arch) {
    survivors = {best_by_auc(fitness)};
  } else if (last) {
    const auto k = static_cast<std::size_t>(config_.num_subpolicies);
    if (children.size() < k) {
      spdlog::warn("only {} candidate sub-policies for K = {}; emitting all", children.size(), k);
    }
    survivors = top_by_auc(fitness, k);
  } else {
    const int target = slot.is_arch() ? config_.population_arch : config_.population_aug;
    survivors = nsga2_select(fitness, static_cast<std::size_t>(target));
  }

  std::vector<Individual> next;
  std::vector<Fitness> next_fitness;
  for (auto i : survivors) {
    next.push_back(children[i]);
    next_fitness.push_back(fitness[i]);
  }
  if (last_arch) {
    fix_input_node_edges(next.front().normal);
    fix_input_node_edges(next.front().reduce);
  }

  nlohmann::json record;
  record["generation"] = cursor_;
  record["slot"] = slot.to_json();
  record["slot"]["name"] = slot.describe();
  record["evaluated"] = nlohmann::json::array();
  for (std::size_t i = 0; i < children.size(); ++i) {
    record["evaluated"].push_back(
        {{"encoding", to_json(children[i])}, {"auc", fitness[i].auc}, {"acc", fitness[i].acc}});
  }
  record["survivors"] = encode_population(next);
  record["wall_time"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  population_ = std::move(next);
  fitness_ = std::move(next_fitness);
  ++cursor_;
  spdlog::info("generation {}/{} {}: {} evaluated, {} kept, best auc {:.4f}", cursor_,
               schedule_.size(), slot.describe(), children.size(), population_.size(),
               fitness_.empty() ? 0.0 : fitness_[best_by_auc(fitness_)].auc);
  log_.push_back(std::move(record));
  return log_.back();
}

SearchResult SearchSession::result() const {
  if (!done()) throw Error(ErrorCode::kParameter, "search has not finished");
  SearchResult out;
  out.cells = config_.cells;
  out.outputs = population_;
  out.output_fitness = fitness_;
  out.architecture = population_.front();
  for (const auto& ind : population_) out.policy.push_back(augment::subpolicy_from_codes(ind.aug));
  out.log = log_;
  out.digest = log_digest(log_);
  return out;
}

nlohmann::json SearchSession::data_fingerprint() const {
  return {{"name", data_->name},
          {"task", std::string(task_name(data_->task))},
          {"train", data_->train.size()},
          {"val", data_->val.size()}};
}

void SearchSession::save(const std::filesystem::path& path) const {
  nlohmann::json meta;
  meta["kind"] = "search-state";
  meta["state_version"] = kStateVersion;
  meta["seed"] = seed_;
  meta["config"] = to_json(config_);
  meta["data"] = data_fingerprint();
  meta["cursor"] = cursor_;
  meta["global_step"] = global_step_;
  meta["population"] = encode_population(population_);
  meta["fitness"] = nlohmann::json::array();
  for (const auto& f : fitness_) meta["fitness"].push_back({f.auc, f.acc});
  meta["streams"] = streams_.save();
  meta["log"] = log_;
  nn::save_checkpoint(path, store_, meta);
}

SearchSession SearchSession::resume(const std::filesystem::path& path, const SearchConfig& config,
                                    const DatasetBundle& data) {
  auto checkpoint = nn::load_checkpoint(path);
  const auto& meta = checkpoint.meta;
  if (meta.value("kind", "") != "search-state" || meta.value("state_version", 0) != kStateVersion) {
    throw Error(ErrorCode::kVersion, "checkpoint does not hold a resumable search state");
  }
  SearchSession session(config, data, meta.at("seed").get<std::uint64_t>());
  if (meta.at("config") != to_json(config)) {
    throw Error(ErrorCode::kValidation, "checkpoint was written with a different configuration");
  }
  if (meta.at("data") != session.data_fingerprint()) {
    throw Error(ErrorCode::kValidation, "checkpoint was written for a different dataset");
  }
  if (checkpoint.store.init_seed() != session.store_.init_seed()) {
    throw Error(ErrorCode::kValidation, "checkpoint parameter seed does not match");
  }
  session.cursor_ = meta.at("cursor").get<std::size_t>();
  if (session.cursor_ > session.schedule_.size()) {
    throw Error(ErrorCode::kRange, "checkpoint cursor beyond the schedule");
  }
  session.global_step_ = meta.at("global_step").get<std::int64_t>();
  session.population_.clear();
  for (const auto& j : meta.at("population")) session.population_.push_back(individual_from_json(j));
  session.fitness_.clear();
  for (const auto& f : meta.at("fitness")) session.fitness_.push_back({f.at(0).get<double>(), f.at(1).get<double>()});
  session.streams_.restore(meta.at("streams").get<std::map<std::string, std::string>>());
  session.log_ = meta.at("log").get<std::vector<nlohmann::json>>();
  session.store_ = std::move(checkpoint.store);
  return session;
}

SearchResult run_search(const SearchConfig& config, const DatasetBundle& data, std::uint64_t seed,
                        const GenerationCallback& on_generation) {
  SearchSession session(config, data, seed);
  while (!session.done()) {
    const auto& record = session.step();
    if (on_generation) on_generation(record);
  }
  return session.result();
}

}  // namespace usaa
