#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

namespace usaa {

// Appends one compact JSON document per line.
class JsonLinesWriter {
 public:
  explicit JsonLinesWriter(const std::filesystem::path& path);
  void write(const nlohmann::json& record);

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

void write_json_file(const std::filesystem::path& path, const nlohmann::json& value);
nlohmann::json read_json_file(const std::filesystem::path& path);

std::string hex_digest(std::uint64_t digest);
std::uint64_t json_digest(const nlohmann::json& value);

// Single-line, machine-parseable: `error code=<name> message="<text>"`.
std::string error_line(const std::exception& e);

}  // namespace usaa
