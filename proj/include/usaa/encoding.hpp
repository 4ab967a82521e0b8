#pragma once

// Joint augmentation + cell-architecture search space.
//
// An Individual holds an augmentation vector of L_a slots and two DARTS cell
// encodings (normal, reduction). Every slot may carry the random code -1,
// which is resolved uniformly whenever a concrete network is sampled.

#include <array>
#include <boost/multiprecision/cpp_int.hpp>
#include "json.hpp"
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "usaa/rng.hpp"

namespace usaa {

inline constexpr int kRandomCode = -1;
inline constexpr int kNumAugOps = 7;
inline constexpr int kNumNeuralOps = 7;
inline constexpr int kCellEdges = 14;
inline constexpr int kIntermediateNodes = 4;
inline constexpr int kMinAugLayers = 1;
inline constexpr int kMaxAugLayers = 3;

enum class AugOp : int {
  kIdentity = 1,
  kRandomCrop = 2,
  kHorizontalFlip = 3,
  kVerticalFlip = 4,
  kRandomRotate = 5,
  kCutout = 6,
  kColorJitter = 7,
};

enum class NeuralOp : int {
  kSkipConnection = 1,
  kAvgPool3x3 = 2,
  kMaxPool3x3 = 3,
  kSepConv3x3 = 4,
  kSepConv5x5 = 5,
  kDilConv3x3 = 6,
  kDilConv5x5 = 7,
};

std::string_view aug_op_name(int id);
std::optional<int> aug_op_from_name(std::string_view name);
std::string_view neural_op_name(int id);

// Edge slots are grouped by target intermediate node: node k (1-based) owns
// k+1 consecutive slots whose sources are input0, input1, node1, ..., node(k-1).
constexpr int node_edge_offset(int node) {
  constexpr std::array<int, 5> offsets{0, 0, 2, 5, 9};
  return offsets[static_cast<std::size_t>(node)];
}
constexpr int node_source_count(int node) { return node + 1; }

struct CellEncoding {
  std::array<int, kCellEdges> ops{};
  std::array<int, kCellEdges> edges{};

  static CellEncoding random_codes();
  bool concrete() const;
  bool operator==(const CellEncoding&) const = default;
  auto operator<=>(const CellEncoding&) const = default;
};

enum class CellKind { kNormal, kReduce };

struct Individual {
  std::vector<int> aug;
  CellEncoding normal;
  CellEncoding reduce;

  const CellEncoding& cell(CellKind kind) const {
    return kind == CellKind::kNormal ? normal : reduce;
  }
  CellEncoding& cell(CellKind kind) {
    return kind == CellKind::kNormal ? normal : reduce;
  }

  bool concrete() const;
  bool arch_concrete() const;
  bool operator==(const Individual&) const = default;
  auto operator<=>(const Individual&) const = default;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate(const Individual& ind, int aug_layers);

// Resolves every random code. Concrete slots are never touched.
Individual sample_concrete(const Individual& ind, Stream& rng);

// Node-1 edges are never searched; this fixes them to active.
void fix_input_node_edges(CellEncoding& cell);

// Subsets of size one or two over `sources` candidates, as 0/1 masks in
// enumeration order (singletons first, then pairs in lexicographic order).
std::vector<std::vector<int>> edge_group_choices(int sources);

using BigInt = boost::multiprecision::cpp_int;

BigInt aug_space_size(int aug_layers, int num_subpolicies);

enum class ArchSpaceFormula { kAdditive, kMultiplicative };

// Number of (edge subset, op assignment) combinations for a node with
// `sources` incoming candidates: C(n,1)*7 + C(n,2)*7^2.
BigInt arch_node_factor(int sources);
BigInt arch_space_size(ArchSpaceFormula formula);

struct Slot {
  enum class Kind { kOp, kEdgeGroup, kAug };
  Kind kind = Kind::kOp;
  CellKind cell = CellKind::kNormal;
  // Op slot index (0..13), target node (2..4) or augmentation index (0-based).
  int index = 0;

  bool is_arch() const { return kind != Kind::kAug; }
  std::string describe() const;
  nlohmann::json to_json() const;
  bool operator==(const Slot&) const = default;
};

// Hierarchically-ordered generation schedule: normal ops 13..0, normal edge
// groups node4..node2, the same for the reduction cell, then augmentation
// slots from the last to the first. Length is L_a + (14 + 3) * 2.
std::vector<Slot> generation_schedule(int aug_layers);

nlohmann::json to_json(const CellEncoding& cell);
nlohmann::json to_json(const Individual& ind);
CellEncoding cell_from_json(const nlohmann::json& j);
Individual individual_from_json(const nlohmann::json& j);

}  // namespace usaa
