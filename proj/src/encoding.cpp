#include "usaa/encoding.hpp"

#include <algorithm>
#include <fmt/format.h>

#include "usaa/error.hpp"

namespace usaa {
namespace {

constexpr std::array<std::string_view, kNumAugOps> kAugNames{
    "Identity", "RandomCrop", "HorizontalFlip", "VerticalFlip",
    "RandomRotate", "Cutout", "ColorJitter"};

constexpr std::array<std::string_view, kNumNeuralOps> kNeuralNames{
    "SkipConnection", "AvgPool3x3", "MaxPool3x3", "SepConv3x3",
    "SepConv5x5", "DilConv3x3", "DilConv5x5"};

std::string_view cell_name(CellKind kind) {
  return kind == CellKind::kNormal ? "normal" : "reduce";
}

void validate_cell(const CellEncoding& cell, CellKind kind,
                   std::vector<std::string>& out) {
  const auto name = cell_name(kind);
  for (int i = 0; i < kCellEdges; ++i) {
    const int op = cell.ops[i];
    if (op != kRandomCode && (op < 1 || op > kNumNeuralOps)) {
      out.push_back(fmt::format("{} op[{}] out of range: {}", name, i, op));
    }
    const int e = cell.edges[i];
    if (e != kRandomCode && e != 0 && e != 1) {
      out.push_back(fmt::format("{} edge[{}] out of range: {}", name, i, e));
    }
  }
  for (int node = 1; node <= kIntermediateNodes; ++node) {
    const int begin = node_edge_offset(node);
    const int n = node_source_count(node);
    bool concrete = true;
    int active = 0;
    for (int j = 0; j < n; ++j) {
      const int e = cell.edges[begin + j];
      if (e == kRandomCode) concrete = false;
      if (e == 1) ++active;
    }
    if (!concrete) continue;
    if (node == 1) {
      if (active != 2) {
        out.push_back(fmt::format("{} node1 edges not both active", name));
      }
    } else if (active == 0) {
      out.push_back(fmt::format("{} node{} has no active edge", name, node));
    } else if (active > 2) {
      out.push_back(
          fmt::format("{} node{} has more than two active edges", name, node));
    }
  }
}

void resolve_cell(CellEncoding& cell, Stream& rng) {
  for (int node = 1; node <= kIntermediateNodes; ++node) {
    const int begin = node_edge_offset(node);
    const int n = node_source_count(node);
    const bool unresolved =
        std::any_of(cell.edges.begin() + begin, cell.edges.begin() + begin + n,
                    [](int e) { return e == kRandomCode; });
    if (!unresolved) continue;
    if (node == 1) {
      cell.edges[0] = 1;
      cell.edges[1] = 1;
      continue;
    }
    std::vector<std::vector<int>> feasible;
    for (auto& choice : edge_group_choices(n)) {
      bool consistent = true;
      for (int j = 0; j < n; ++j) {
        const int fixed = cell.edges[begin + j];
        if (fixed != kRandomCode && fixed != choice[j]) consistent = false;
      }
      if (consistent) feasible.push_back(std::move(choice));
    }
    if (feasible.empty()) {
      throw Error(ErrorCode::kExhausted,
                  fmt::format("no feasible edge subset for node{}", node));
    }
    const auto& pick =
        feasible[rng.uniform_int(0, static_cast<int>(feasible.size()) - 1)];
    std::copy(pick.begin(), pick.end(), cell.edges.begin() + begin);
  }
  for (int& op : cell.ops) {
    if (op == kRandomCode) op = rng.uniform_int(1, kNumNeuralOps);
  }
}

BigInt binomial(int n, int k) {
  BigInt r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
  }
  return r;
}

}  // namespace

std::string_view aug_op_name(int id) {
  if (id < 1 || id > kNumAugOps) {
    throw Error(ErrorCode::kRange, fmt::format("augmentation op id {}", id));
  }
  return kAugNames[static_cast<std::size_t>(id - 1)];
}

std::optional<int> aug_op_from_name(std::string_view name) {
  for (int i = 0; i < kNumAugOps; ++i) {
    if (kAugNames[static_cast<std::size_t>(i)] == name) return i + 1;
  }
  return std::nullopt;
}

std::string_view neural_op_name(int id) {
  if (id < 1 || id > kNumNeuralOps) {
    throw Error(ErrorCode::kRange, fmt::format("neural op id {}", id));
  }
  return kNeuralNames[static_cast<std::size_t>(id - 1)];
}

CellEncoding CellEncoding::random_codes() {
  CellEncoding cell;
  cell.ops.fill(kRandomCode);
  cell.edges.fill(kRandomCode);
  return cell;
}

bool CellEncoding::concrete() const {
  auto is_random = [](int v) { return v == kRandomCode; };
  return std::none_of(ops.begin(), ops.end(), is_random) &&
         std::none_of(edges.begin(), edges.end(), is_random);
}

bool Individual::arch_concrete() const {
  return normal.concrete() && reduce.concrete();
}

bool Individual::concrete() const {
  return arch_concrete() &&
         std::none_of(aug.begin(), aug.end(),
                      [](int v) { return v == kRandomCode; });
}

ValidationReport validate(const Individual& ind, int aug_layers) {
  ValidationReport report;
  auto& out = report.violations;
  if (aug_layers < kMinAugLayers || aug_layers > kMaxAugLayers) {
    out.push_back(fmt::format("L_a out of range: {}", aug_layers));
  }
  if (static_cast<int>(ind.aug.size()) != aug_layers) {
    out.push_back(fmt::format("augmentation length {} != L_a {}",
                              ind.aug.size(), aug_layers));
  }
  std::array<int, kNumAugOps + 1> seen{};
  bool duplicate = false;
  for (std::size_t i = 0; i < ind.aug.size(); ++i) {
    const int v = ind.aug[i];
    if (v == kRandomCode) continue;
    if (v < 1 || v > kNumAugOps) {
      out.push_back(fmt::format("augmentation slot {} out of range: {}", i, v));
      continue;
    }
    // Identity may repeat: it is the placeholder of unsearched slots.
    if (v != static_cast<int>(AugOp::kIdentity) && seen[static_cast<std::size_t>(v)]++ > 0) {
      duplicate = true;
    }
  }
  if (duplicate) out.push_back("duplicate augmentation op");
  validate_cell(ind.normal, CellKind::kNormal, out);
  validate_cell(ind.reduce, CellKind::kReduce, out);
  return report;
}

Individual sample_concrete(const Individual& ind, Stream& rng) {
  Individual out = ind;
  std::vector<int> remaining;
  for (int op = 1; op <= kNumAugOps; ++op) {
    if (std::find(ind.aug.begin(), ind.aug.end(), op) == ind.aug.end()) {
      remaining.push_back(op);
    }
  }
  for (int& slot : out.aug) {
    if (slot != kRandomCode) continue;
    if (remaining.empty()) {
      throw Error(ErrorCode::kExhausted, "augmentation slots exhausted");
    }
    const int pick = rng.uniform_int(0, static_cast<int>(remaining.size()) - 1);
    slot = remaining[static_cast<std::size_t>(pick)];
    remaining.erase(remaining.begin() + pick);
  }
  resolve_cell(out.normal, rng);
  resolve_cell(out.reduce, rng);
  return out;
}

void fix_input_node_edges(CellEncoding& cell) {
  cell.edges[0] = 1;
  cell.edges[1] = 1;
}

std::vector<std::vector<int>> edge_group_choices(int sources) {
  std::vector<std::vector<int>> out;
  for (int a = 0; a < sources; ++a) {
    std::vector<int> mask(static_cast<std::size_t>(sources), 0);
    mask[static_cast<std::size_t>(a)] = 1;
    out.push_back(std::move(mask));
  }
  for (int a = 0; a < sources; ++a) {
    for (int b = a + 1; b < sources; ++b) {
      std::vector<int> mask(static_cast<std::size_t>(sources), 0);
      mask[static_cast<std::size_t>(a)] = 1;
      mask[static_cast<std::size_t>(b)] = 1;
      out.push_back(std::move(mask));
    }
  }
  return out;
}

BigInt aug_space_size(int aug_layers, int num_subpolicies) {
  if (aug_layers < kMinAugLayers || aug_layers > kMaxAugLayers) {
    throw Error(ErrorCode::kParameter,
                fmt::format("L_a must be in [1,3], got {}", aug_layers));
  }
  if (num_subpolicies < 1) {
    throw Error(ErrorCode::kParameter,
                fmt::format("K must be >= 1, got {}", num_subpolicies));
  }
  BigInt permutations = 1;
  for (int i = 0; i < aug_layers; ++i) permutations *= (kNumAugOps - i);
  return boost::multiprecision::pow(permutations,
                                    static_cast<unsigned>(num_subpolicies));
}

BigInt arch_node_factor(int sources) {
  return binomial(sources, 1) * kNumNeuralOps +
         binomial(sources, 2) * kNumNeuralOps * kNumNeuralOps;
}

BigInt arch_space_size(ArchSpaceFormula formula) {
  const BigInt first_node = kNumNeuralOps * kNumNeuralOps;
  BigInt product = 1;
  for (int n = 3; n <= 5; ++n) product *= arch_node_factor(n);
  const BigInt per_cell = formula == ArchSpaceFormula::kAdditive
                              ? BigInt(first_node + product)
                              : BigInt(first_node * product);
  return per_cell * per_cell;
}

std::string Slot::describe() const {
  switch (kind) {
    case Kind::kOp:
      return fmt::format("{}.op[{}]", cell_name(cell), index);
    case Kind::kEdgeGroup:
      return fmt::format("{}.edge[node{}]", cell_name(cell), index);
    case Kind::kAug:
      return fmt::format("aug[{}]", index);
  }
  return "?";
}

nlohmann::json Slot::to_json() const {
  nlohmann::json j;
  switch (kind) {
    case Kind::kOp: j["kind"] = "op"; break;
    case Kind::kEdgeGroup: j["kind"] = "edge"; break;
    case Kind::kAug: j["kind"] = "aug"; break;
  }
  if (kind != Kind::kAug) j["cell"] = cell_name(cell);
  j["index"] = index;
  return j;
}

std::vector<Slot> generation_schedule(int aug_layers) {
  if (aug_layers < kMinAugLayers || aug_layers > kMaxAugLayers) {
    throw Error(ErrorCode::kParameter,
                fmt::format("L_a must be in [1,3], got {}", aug_layers));
  }
  std::vector<Slot> schedule;
  for (CellKind cell : {CellKind::kNormal, CellKind::kReduce}) {
    for (int i = kCellEdges - 1; i >= 0; --i) {
      schedule.push_back({Slot::Kind::kOp, cell, i});
    }
    for (int node = kIntermediateNodes; node >= 2; --node) {
      schedule.push_back({Slot::Kind::kEdgeGroup, cell, node});
    }
  }
  for (int i = aug_layers - 1; i >= 0; --i) {
    schedule.push_back({Slot::Kind::kAug, CellKind::kNormal, i});
  }
  return schedule;
}

nlohmann::json to_json(const CellEncoding& cell) {
  return {{"op", cell.ops}, {"edge", cell.edges}};
}

nlohmann::json to_json(const Individual& ind) {
  nlohmann::json aug = nlohmann::json::array();
  for (int v : ind.aug) {
    if (v == kRandomCode) {
      aug.push_back(kRandomCode);
    } else {
      aug.push_back(std::string(aug_op_name(v)));
    }
  }
  return {{"augment", aug},
          {"normal", to_json(ind.normal)},
          {"reduce", to_json(ind.reduce)}};
}

CellEncoding cell_from_json(const nlohmann::json& j) {
  CellEncoding cell;
  const auto& ops = j.at("op");
  const auto& edges = j.at("edge");
  if (!ops.is_array() || ops.size() != kCellEdges || !edges.is_array() ||
      edges.size() != kCellEdges) {
    throw Error(ErrorCode::kFormat, "cell encoding needs 14 op and 14 edge entries");
  }
  for (int i = 0; i < kCellEdges; ++i) {
    cell.ops[i] = ops[static_cast<std::size_t>(i)].get<int>();
    cell.edges[i] = edges[static_cast<std::size_t>(i)].get<int>();
  }
  return cell;
}

Individual individual_from_json(const nlohmann::json& j) {
  Individual ind;
  try {
    for (const auto& v : j.at("augment")) {
      if (v.is_number_integer()) {
        ind.aug.push_back(v.get<int>());
      } else {
        const auto name = v.get<std::string>();
        const auto id = aug_op_from_name(name);
        if (!id) {
          throw Error(ErrorCode::kFormat, "unknown augmentation op: " + name);
        }
        ind.aug.push_back(*id);
      }
    }
    ind.normal = cell_from_json(j.at("normal"));
    ind.reduce = cell_from_json(j.at("reduce"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat,
                std::string("malformed individual encoding: ") + e.what());
  }
  return ind;
}

}  // namespace usaa
