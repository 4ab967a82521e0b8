#include "usaa/rng.hpp"

#include <sstream>

#include "usaa/error.hpp"

namespace usaa {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kParameter: return "parameter";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kUnsupported: return "unsupported";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kRange: return "range";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kVersion: return "version";
    case ErrorCode::kUndefined: return "undefined";
    case ErrorCode::kExhausted: return "exhausted";
    case ErrorCode::kUsage: return "usage";
  }
  return "unknown";
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) noexcept {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Stream Stream::derive(std::uint64_t root_seed, std::string_view name) {
  return Stream(splitmix64(root_seed ^ fnv1a64(name)));
}

int Stream::uniform_int(int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(engine_);
}

double Stream::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double Stream::normal(double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(engine_);
}

std::string Stream::state() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void Stream::restore(const std::string& state) {
  std::istringstream in(state);
  in >> engine_;
  if (in.fail()) {
    throw Error(ErrorCode::kFormat, "corrupt random stream state");
  }
}

StreamSet::StreamSet(std::uint64_t seed)
    : shuffle(Stream::derive(seed, "data-shuffle")),
      augmentation(Stream::derive(seed, "augmentation")),
      sampling(Stream::derive(seed, "sampling")),
      evolution(Stream::derive(seed, "evolution")),
      evaluation(Stream::derive(seed, "evaluation")) {}

std::map<std::string, std::string> StreamSet::save() const {
  return {{"data-shuffle", shuffle.state()},
          {"augmentation", augmentation.state()},
          {"sampling", sampling.state()},
          {"evolution", evolution.state()},
          {"evaluation", evaluation.state()}};
}

void StreamSet::restore(const std::map<std::string, std::string>& states) {
  auto get = [&](const char* name) -> const std::string& {
    auto it = states.find(name);
    if (it == states.end()) {
      throw Error(ErrorCode::kFormat,
                  std::string("missing random stream state: ") + name);
    }
    return it->second;
  };
  shuffle.restore(get("data-shuffle"));
  augmentation.restore(get("augmentation"));
  sampling.restore(get("sampling"));
  evolution.restore(get("evolution"));
  evaluation.restore(get("evaluation"));
}

}  // namespace usaa
