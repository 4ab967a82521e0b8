#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>

namespace usaa {

std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;
std::uint64_t splitmix64(std::uint64_t x) noexcept;

// A seeded random stream. All randomness in the project flows through one of
// these so that runs are reproducible and checkpointable.
class Stream {
 public:
  explicit Stream(std::uint64_t seed = 0) : engine_(seed) {}

  // Independent stream for `name` under `root_seed`.
  static Stream derive(std::uint64_t root_seed, std::string_view name);

  std::uint64_t next() { return engine_(); }
  // Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi);
  // Uniform real in [lo, hi).
  double uniform(double lo, double hi);
  double normal(double mean = 0.0, double stddev = 1.0);

  std::mt19937_64& engine() noexcept { return engine_; }

  std::string state() const;
  void restore(const std::string& state);

  bool operator==(const Stream& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

// The named sub-streams every subcommand derives from the single --seed.
struct StreamSet {
  explicit StreamSet(std::uint64_t seed = 0);

  Stream shuffle;
  Stream augmentation;
  Stream sampling;
  Stream evolution;
  Stream evaluation;

  std::map<std::string, std::string> save() const;
  void restore(const std::map<std::string, std::string>& states);
};

}  // namespace usaa
