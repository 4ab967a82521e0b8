#include "usaa/config.hpp"

#include <charconv>
#include <functional>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

#include "usaa/error.hpp"

namespace usaa {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kParameter, fmt::format("config key '{}': bad value '{}'", key, value));
  }
  return out;
}

std::string_view sampling_name(augment::PolicySampling s) {
  return s == augment::PolicySampling::kPerImage ? "per-image" : "per-batch";
}

// One table drives parsing and serialization so the two cannot drift apart.
struct Field {
  const char* key;
  std::function<void(Settings&, std::string_view, std::string_view)> set;
  std::function<std::string(const Settings&)> get;
};

#define USAA_INT(key, expr)                                                              \
  Field {                                                                                \
    key, [](Settings& s, std::string_view k, std::string_view v) { expr = parse_number<int>(k, v); }, \
        [](const Settings& s) { return fmt::format("{}", expr); }                        \
  }
#define USAA_REAL(key, expr)                                                             \
  Field {                                                                                \
    key, [](Settings& s, std::string_view k, std::string_view v) { expr = parse_number<double>(k, v); }, \
        [](const Settings& s) { return fmt::format("{}", expr); }                        \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"seed",
            [](Settings& s, std::string_view k, std::string_view v) {
              s.seed = parse_number<std::uint64_t>(k, v);
            },
            [](const Settings& s) { return fmt::format("{}", s.seed); }},
      Field{"log_level", [](Settings& s, std::string_view, std::string_view v) { s.log_level = std::string(v); },
            [](const Settings& s) { return s.log_level; }},
      USAA_INT("aug_layers", s.pipeline.search.aug_layers),
      USAA_INT("cells", s.pipeline.search.cells),
      USAA_INT("c_init", s.pipeline.search.c_init),
      USAA_INT("num_subpolicies", s.pipeline.search.num_subpolicies),
      USAA_INT("population_arch", s.pipeline.search.population_arch),
      USAA_INT("population_aug", s.pipeline.search.population_aug),
      USAA_INT("warmup_epochs", s.pipeline.search.warmup_epochs),
      USAA_INT("generation_epochs", s.pipeline.search.generation_epochs),
      USAA_INT("eval_repeats", s.pipeline.search.eval_repeats),
      USAA_REAL("lr0", s.pipeline.search.train.lr0),
      USAA_REAL("momentum", s.pipeline.search.train.momentum),
      USAA_REAL("weight_decay", s.pipeline.search.train.weight_decay),
      USAA_INT("batch", s.pipeline.search.train.batch),
      USAA_REAL("grad_clip", s.pipeline.search.train.grad_clip),
      USAA_INT("crop_padding", s.pipeline.search.magnitudes.crop_padding),
      USAA_REAL("rotate_degrees", s.pipeline.search.magnitudes.rotate_degrees),
      USAA_REAL("cutout_fraction", s.pipeline.search.magnitudes.cutout_fraction),
      USAA_REAL("jitter_contrast", s.pipeline.search.magnitudes.jitter_contrast),
      USAA_REAL("jitter_brightness", s.pipeline.search.magnitudes.jitter_brightness),
      USAA_INT("budget", s.pipeline.budget),
      USAA_INT("selection_epochs", s.pipeline.selection_epochs),
      USAA_INT("final_epochs", s.pipeline.final_epochs),
      Field{"policy_sampling",
            [](Settings& s, std::string_view k, std::string_view v) {
              if (v == "per-batch") {
                s.pipeline.sampling = augment::PolicySampling::kPerBatch;
              } else if (v == "per-image") {
                s.pipeline.sampling = augment::PolicySampling::kPerImage;
              } else {
                throw Error(ErrorCode::kParameter,
                            fmt::format("config key '{}': expected per-batch or per-image", k));
              }
            },
            [](const Settings& s) { return std::string(sampling_name(s.pipeline.sampling)); }},
  };
  return table;
}

#undef USAA_INT
#undef USAA_REAL

}  // namespace

bool Settings::operator==(const Settings& other) const {
  return settings_to_text(*this) == settings_to_text(other);
}

void apply_setting(Settings& settings, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(settings, key, value);
      return;
    }
  }
  throw Error(ErrorCode::kParameter, fmt::format("unknown config key '{}'", key));
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kFormat, fmt::format("config line {}: expected key = value", line_no));
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error(ErrorCode::kFormat, fmt::format("config line {}: empty key", line_no));
    if (!out.emplace(std::string(key), std::string(value)).second) {
      throw Error(ErrorCode::kFormat, fmt::format("config line {}: duplicate key '{}'", line_no, key));
    }
  }
  return out;
}

Settings settings_from_text(std::string_view text, Settings base) {
  for (const auto& [key, value] : parse_key_values(text)) apply_setting(base, key, value);
  return base;
}

std::string settings_to_text(const Settings& settings) {
  std::string out;
  for (const auto& f : fields()) out += fmt::format("{} = {}\n", f.key, f.get(settings));
  return out;
}

Settings load_settings(const std::filesystem::path& path, Settings base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return settings_from_text(buffer.str(), std::move(base));
}

nlohmann::json to_json(const PipelineConfig& config) {
  auto j = to_json(config.search);
  j.erase("aug_layers");
  j.erase("cells");
  j["budget"] = config.budget;
  j["selection_epochs"] = config.selection_epochs;
  j["final_epochs"] = config.final_epochs;
  j["policy_sampling"] = std::string(sampling_name(config.sampling));
  return j;
}

}  // namespace usaa
