#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>

#include "usaa/tensor.hpp"

namespace usaa::nn {

enum class ParamRole : int {
  kWeight = 0,
  kBias = 1,
  kDepthwise = 2,
  kPointwise = 3,
  kProjection = 4,
};

// Identifies one shared tensor of the supernet. Edge-op parameters are keyed
// by (cell index, edge index, op id, role); stem, head and the per-cell
// preprocessing convolutions use the reserved values below.
struct ParamKey {
  int cell = 0;
  int edge = 0;
  int op = 0;
  int role = 0;

  static constexpr int kStemCell = -1;
  static constexpr int kHeadCell = -2;
  static constexpr int kPreprocess0 = -1;
  static constexpr int kPreprocess1 = -2;

  static ParamKey stem() { return {kStemCell, 0, 0, static_cast<int>(ParamRole::kWeight)}; }
  static ParamKey head(ParamRole role) { return {kHeadCell, 0, 0, static_cast<int>(role)}; }
  static ParamKey preprocess(int cell, int which) {
    return {cell, which == 0 ? kPreprocess0 : kPreprocess1, 0, static_cast<int>(ParamRole::kWeight)};
  }
  static ParamKey edge_op(int cell, int edge, int op, ParamRole role) {
    return {cell, edge, op, static_cast<int>(role)};
  }

  std::string describe() const;
  auto operator<=>(const ParamKey&) const = default;
};

template <typename Real>
struct ParamEntry {
  Tensor<Real> value;
  Tensor<Real> momentum;
};

// Shared weight store. Entries are created lazily on first update; values of
// missing keys are a pure function of (init_seed, key, shape), so a network
// evaluated on a read-only store sees exactly the weights training would
// have created.
template <typename Real>
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t init_seed = 0) : init_seed_(init_seed) {}

  std::uint64_t init_seed() const { return init_seed_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(const ParamKey& key) const { return entries_.count(key) > 0; }

  // Stored value, or the deterministic initial value when absent.
  Tensor<Real> fetch(const ParamKey& key, Shape shape) const;
  // Creates the entry (initialized) if absent.
  ParamEntry<Real>& ensure(const ParamKey& key, Shape shape);

  const std::map<ParamKey, ParamEntry<Real>>& entries() const { return entries_; }
  std::map<ParamKey, ParamEntry<Real>>& mutable_entries() { return entries_; }

  static Tensor<Real> initial_value(const ParamKey& key, Shape shape, std::uint64_t seed);

  bool operator==(const ParamStore& other) const;

 private:
  std::uint64_t init_seed_;
  std::map<ParamKey, ParamEntry<Real>> entries_;
};

}  // namespace usaa::nn
