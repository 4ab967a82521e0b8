#include "usaa/report.hpp"

#include <fmt/format.h>

#include "usaa/error.hpp"
#include "usaa/rng.hpp"

namespace usaa {

JsonLinesWriter::JsonLinesWriter(const std::filesystem::path& path)
    : out_(path, std::ios::trunc), path_(path) {
  if (!out_) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

void JsonLinesWriter::write(const nlohmann::json& record) {
  out_ << record.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorCode::kIo, "write failed on " + path_.string());
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& value) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << value.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed on " + path.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string hex_digest(std::uint64_t digest) { return fmt::format("{:016x}", digest); }

std::uint64_t json_digest(const nlohmann::json& value) { return fnv1a64(value.dump()); }

std::string error_line(const std::exception& e) {
  std::string code = "internal";
  if (const auto* err = dynamic_cast<const Error*>(&e)) code = std::string(error_code_name(err->code()));
  // json string escaping keeps the message on one line.
  return fmt::format("error code={} message={}", code, nlohmann::json(std::string(e.what())).dump());
}

}  // namespace usaa
