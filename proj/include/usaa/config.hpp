#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "json.hpp"
#include "usaa/pipeline.hpp"

namespace usaa {

// Every tunable of a run. The text form is flat "key = value" lines; '#'
// starts a comment.
struct Settings {
  PipelineConfig pipeline;
  std::uint64_t seed = 0;
  std::string log_level = "info";

  bool operator==(const Settings& other) const;
};

// Throws kParameter for unknown keys or unparsable values.
void apply_setting(Settings& settings, std::string_view key, std::string_view value);

std::map<std::string, std::string> parse_key_values(std::string_view text);
Settings settings_from_text(std::string_view text, Settings base = {});
std::string settings_to_text(const Settings& settings);
Settings load_settings(const std::filesystem::path& path, Settings base = {});

nlohmann::json to_json(const PipelineConfig& config);

}  // namespace usaa
