#include <CLI11.hpp>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <sstream>

#include "usaa/config.hpp"
#include "usaa/dataset.hpp"
#include "usaa/error.hpp"
#include "usaa/idx.hpp"
#include "usaa/pipeline.hpp"
#include "usaa/report.hpp"
#include "usaa/sampling_stats.hpp"

namespace {

constexpr int kUsageExit = 2;
constexpr int kFailureExit = 1;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<std::string> log_level;
};

usaa::Settings resolve_settings(const Globals& g) {
  usaa::Settings s;
  if (!g.config.empty()) s = usaa::load_settings(g.config);
  if (g.seed) s.seed = *g.seed;
  if (g.log_level) s.log_level = *g.log_level;
  return s;
}

void configure_logging(const std::string& level) {
  auto logger = spdlog::stderr_color_mt("usaa");
  spdlog::set_default_logger(logger);
  const auto parsed = spdlog::level::from_str(level);
  if (parsed == spdlog::level::off && level != "off") {
    throw usaa::Error(usaa::ErrorCode::kParameter, "unknown log level " + level);
  }
  spdlog::set_level(parsed);
}

std::filesystem::path prepare_out(const Globals& g) {
  std::filesystem::path out(g.out);
  std::filesystem::create_directories(out);
  return out;
}

// Strips wall-clock fields so that identical runs produce identical digests.
nlohmann::json without_timing(nlohmann::json j) {
  if (j.is_object()) {
    j.erase("wall_time");
    for (auto& [key, value] : j.items()) value = without_timing(value);
  } else if (j.is_array()) {
    for (auto& value : j) value = without_timing(value);
  }
  return j;
}

int cmd_search(const Globals& g, const std::string& data_path, std::optional<int> budget) {
  auto settings = resolve_settings(g);
  if (budget) settings.pipeline.budget = *budget;
  configure_logging(settings.log_level);
  const auto out = prepare_out(g);
  const auto data = usaa::load_manifest(data_path);
  {
    std::ofstream cfg(out / "config.txt");
    cfg << usaa::settings_to_text(settings);
  }
  std::unique_ptr<usaa::JsonLinesWriter> log;
  int trial_index = 0;
  auto open_log = [&] {
    log = std::make_unique<usaa::JsonLinesWriter>(out / fmt::format("trial-{:02d}-search.jsonl", trial_index));
  };
  open_log();
  const auto result = usaa::run_pipeline(
      settings.pipeline, data, settings.seed,
      [&](const usaa::TrialResult&) {
        ++trial_index;
        open_log();
      },
      [&](const nlohmann::json& record) { log->write(record); });
  log.reset();
  std::filesystem::remove(out / fmt::format("trial-{:02d}-search.jsonl", trial_index));

  const auto report = usaa::pipeline_report(settings.pipeline, settings.seed, result);
  usaa::write_json_file(out / "report.json", report);
  usaa::save_model(out / "model.ckpt", result.final.model, report.at("searched"));
  fmt::print("report={}\nreport_digest={}\ntest_auc={:.6f}\ntest_acc={:.6f}\n",
             (out / "report.json").string(), usaa::hex_digest(usaa::json_digest(without_timing(report))),
             result.test.fitness.auc, result.test.fitness.acc);
  return 0;
}

int cmd_train(const Globals& g, const std::string& data_path, const std::string& encodings_path,
              std::optional<int> epochs) {
  auto settings = resolve_settings(g);
  configure_logging(settings.log_level);
  const auto out = prepare_out(g);
  const auto data = usaa::load_manifest(data_path);
  auto spec = usaa::read_json_file(encodings_path);
  if (spec.contains("searched")) spec = spec.at("searched");
  const auto arch = usaa::individual_from_json(spec.at("architecture"));
  const int cells = spec.at("cells").get<int>();
  const auto policy = usaa::policy_from_json(spec.at("policy"));
  const auto& cfg = settings.pipeline;
  const auto trained = usaa::final_train(
      arch, cells, cfg.search.c_init, policy, data.train, data.val, data.task, data.num_outputs(),
      data.channels, epochs.value_or(cfg.final_epochs), cfg.search.train, cfg.search.magnitudes,
      cfg.sampling, settings.seed);
  usaa::save_model(out / "model.ckpt", trained.model, spec);
  nlohmann::json report = {{"selected_epoch", trained.selected},
                           {"val_auc", trained.val.auc},
                           {"val_acc", trained.val.acc},
                           {"epochs", trained.epochs.size()}};
  usaa::write_json_file(out / "train_report.json", report);
  fmt::print("model={}\nselected_epoch={}\nval_auc={:.6f}\nval_acc={:.6f}\n",
             (out / "model.ckpt").string(), trained.selected, trained.val.auc, trained.val.acc);
  return 0;
}

int cmd_evaluate(const Globals& g, const std::string& model_path, const std::string& data_path,
                 const std::string& split_name) {
  auto settings = resolve_settings(g);
  configure_logging(settings.log_level);
  const auto model = usaa::load_model(model_path);
  const auto data = usaa::load_manifest(data_path);
  const usaa::Split* split = &data.test;
  if (split_name == "train") split = &data.train;
  if (split_name == "val") split = &data.val;
  const auto report = usaa::evaluate_model(model, *split);
  fmt::print("{}\n", nlohmann::json{{"split", split_name},
                                    {"auc", report.fitness.auc},
                                    {"acc", report.fitness.acc},
                                    {"loss", report.loss},
                                    {"samples", split->size()}}
                         .dump());
  return 0;
}

int cmd_bias(const Globals& g, const std::vector<std::string>& manifests) {
  auto settings = resolve_settings(g);
  configure_logging(settings.log_level);
  std::vector<usaa::DatasetBundle> bundles;
  for (const auto& m : manifests) bundles.push_back(usaa::load_manifest(m));
  const auto report = usaa::stats::bias_report(bundles);
  const auto csv = usaa::stats::bias_csv(report);
  fmt::print("{}", csv);
  if (report.spearman) spdlog::info("spearman(scale, delta_scalar) = {:.4f}", *report.spearman);
  if (g.out != ".") {
    const auto out = prepare_out(g);
    std::ofstream(out / "bias.csv") << csv;
  }
  return 0;
}

int cmd_space(int la, int k) {
  fmt::print("augmentation={}\n", usaa::aug_space_size(la, k).str());
  fmt::print("architecture_additive={}\n",
             usaa::arch_space_size(usaa::ArchSpaceFormula::kAdditive).str());
  fmt::print("architecture_multiplicative={}\n",
             usaa::arch_space_size(usaa::ArchSpaceFormula::kMultiplicative).str());
  return 0;
}

std::vector<std::vector<long>> read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw usaa::Error(usaa::ErrorCode::kIo, "cannot open " + path);
  std::vector<std::vector<long>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<long> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stol(cell, &used));
      } catch (const std::exception&) {
        throw usaa::Error(usaa::ErrorCode::kFormat,
                          fmt::format("{} line {}: non-integer cell", path, rows.size() + 1));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::uint8_t to_byte(long v, const std::string& what) {
  if (v < 0 || v > 255) throw usaa::Error(usaa::ErrorCode::kRange, what + " value outside 0..255");
  return static_cast<std::uint8_t>(v);
}

int cmd_convert(const std::string& format, const std::string& images, const std::string& labels,
                int channels, const std::string& out_images, const std::string& out_labels) {
  const std::uint32_t side = usaa::kImageSide;
  const std::size_t per_image = static_cast<std::size_t>(side) * side * static_cast<std::size_t>(channels);
  usaa::io::IdxTensor img;
  if (format == "csv") {
    for (const auto& row : read_csv_rows(images)) {
      if (row.size() != per_image) {
        throw usaa::Error(usaa::ErrorCode::kShape,
                          fmt::format("image row has {} values, expected {}", row.size(), per_image));
      }
      for (long v : row) img.data.push_back(to_byte(v, "pixel"));
    }
  } else {
    std::ifstream in(images, std::ios::binary);
    if (!in) throw usaa::Error(usaa::ErrorCode::kIo, "cannot open " + images);
    img.data.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (img.data.size() % per_image != 0) {
      throw usaa::Error(usaa::ErrorCode::kTruncated, "raw image file is not a whole number of images");
    }
  }
  const auto count = static_cast<std::uint32_t>(img.data.size() / per_image);
  img.dims = channels == 1 ? std::vector<std::uint32_t>{count, side, side}
                           : std::vector<std::uint32_t>{count, side, side, static_cast<std::uint32_t>(channels)};
  usaa::io::IdxTensor lab;
  const auto rows = read_csv_rows(labels);
  if (rows.size() != count) {
    throw usaa::Error(usaa::ErrorCode::kShape,
                      fmt::format("{} label rows for {} images", rows.size(), count));
  }
  std::size_t width = rows.empty() ? 1 : rows.front().size();
  for (const auto& row : rows) {
    if (row.size() != width) throw usaa::Error(usaa::ErrorCode::kShape, "ragged label rows");
    for (long v : row) lab.data.push_back(to_byte(v, "label"));
  }
  lab.dims = width == 1 ? std::vector<std::uint32_t>{count}
                        : std::vector<std::uint32_t>{count, static_cast<std::uint32_t>(width)};
  usaa::io::write_idx(img, out_images);
  usaa::io::write_idx(lab, out_labels);
  fmt::print("images={} samples={} label_width={}\n", out_images, count, width);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"USAA: unified search over augmentation policies and cell architectures"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "flat key = value settings file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "root seed for every random stream");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off");

  std::string data, model, encodings, split = "test";
  std::optional<int> budget, epochs;
  auto* search = app.add_subcommand("search", "grid search over (L_a, L_n), then final training");
  search->add_option("--data", data, "dataset manifest")->required();
  search->add_option("--budget", budget, "number of trials");

  auto* train = app.add_subcommand("train", "final training of saved encodings");
  train->add_option("--data", data, "dataset manifest")->required();
  train->add_option("--encodings", encodings, "JSON with architecture, cells and policy")->required();
  train->add_option("--epochs", epochs, "training epochs");

  auto* evaluate = app.add_subcommand("evaluate", "metrics of a saved model");
  evaluate->add_option("--model", model, "model checkpoint")->required();
  evaluate->add_option("--data", data, "dataset manifest")->required();
  evaluate->add_option("--split", split, "train, val or test")
      ->check(CLI::IsMember({"train", "val", "test"}));

  std::vector<std::string> manifests;
  auto* bias = app.add_subcommand("bias-report", "train/val sample-mean differences per dataset");
  bias->add_option("--data", manifests, "dataset manifests")->required();

  int la = 0, k = 0;
  auto* space = app.add_subcommand("space-size", "closed-form search-space sizes");
  space->add_option("--la", la, "augmentation layers L_a")->required();
  space->add_option("--k", k, "sub-policies per policy")->required();

  std::string format = "csv", images, labels, out_images, out_labels;
  int channels = 1;
  auto* convert = app.add_subcommand("convert", "CSV or raw bytes to IDX");
  convert->add_option("--format", format, "csv or raw")->check(CLI::IsMember({"csv", "raw"}));
  convert->add_option("--images", images, "pixel source")->required();
  convert->add_option("--labels", labels, "label CSV")->required();
  convert->add_option("--channels", channels, "1 or 3")->check(CLI::IsMember({1, 3}));
  convert->add_option("--out-images", out_images, "IDX image output")->required();
  convert->add_option("--out-labels", out_labels, "IDX label output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return kUsageExit;
  }

  try {
    if (*search) return cmd_search(g, data, budget);
    if (*train) return cmd_train(g, data, encodings, epochs);
    if (*evaluate) return cmd_evaluate(g, model, data, split);
    if (*bias) return cmd_bias(g, manifests);
    if (*space) return cmd_space(la, k);
    if (*convert) return cmd_convert(format, images, labels, channels, out_images, out_labels);
  } catch (const std::exception& e) {
    std::cerr << usaa::error_line(e) << "\n";
    return kFailureExit;
  }
  return kUsageExit;
}
