#include "usaa/dataset.hpp"

#include <fmt/format.h>
#include <fstream>
#include "json.hpp"

#include "usaa/error.hpp"
#include "usaa/idx.hpp"

namespace usaa {
namespace {

constexpr std::array<std::string_view, 3> kSplitNames{"train", "val", "test"};

Split load_split(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, int channels,
                 TaskType task, int num_classes, std::string_view split_name) {
  const auto images = io::read_idx(images_path);
  const auto labels = io::read_idx(labels_path);
  const auto& d = images.dims;
  const bool shape_ok =
      (d.size() == 3 && channels == 1) || (d.size() == 4 && d[3] == static_cast<std::uint32_t>(channels));
  if (!shape_ok || d[1] != kImageSide || d[2] != kImageSide) {
    throw Error(ErrorCode::kShape,
                fmt::format("{} images must be (N, 28, 28{}), got {} dims", split_name,
                            channels == 1 ? "" : ", C", d.size()));
  }
  const std::size_t n = d[0];
  if (labels.dims.empty() || labels.dims[0] != n) {
    throw Error(ErrorCode::kShape,
                fmt::format("{} labels count does not match {} images", split_name, n));
  }
  Split split;
  split.label_width = task == TaskType::kMultiLabel ? num_classes : 1;
  const std::size_t width = labels.element_count() / std::max<std::size_t>(n, 1);
  if (n > 0 && width != static_cast<std::size_t>(split.label_width)) {
    throw Error(ErrorCode::kShape,
                fmt::format("{} labels have width {}, expected {}", split_name, width,
                            split.label_width));
  }
  const std::size_t pixels = static_cast<std::size_t>(kImageSide) * kImageSide * channels;
  for (std::size_t i = 0; i < n; ++i) {
    augment::ImageU8 img(kImageSide, kImageSide, channels);
    std::copy_n(images.data.begin() + static_cast<std::ptrdiff_t>(i * pixels), pixels,
                img.data.begin());
    split.images.push_back(std::move(img));
  }
  split.labels.assign(labels.data.begin(), labels.data.end());
  return split;
}

void validate_split(const Split& split, const DatasetBundle& b,
                    std::string_view name) {
  if (split.empty()) {
    throw Error(ErrorCode::kValidation, fmt::format("{} split is empty", name));
  }
  const int width = b.task == TaskType::kMultiLabel ? b.num_classes : 1;
  if (split.label_width != width ||
      split.labels.size() != split.size() * static_cast<std::size_t>(width)) {
    throw Error(ErrorCode::kShape, fmt::format("{} labels have the wrong shape", name));
  }
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto& img = split.images[i];
    if (img.height != kImageSide || img.width != kImageSide ||
        img.channels != b.channels || !img.valid()) {
      throw Error(ErrorCode::kShape,
                  fmt::format("{} sample {} is not a 28x28x{} image", name, i, b.channels));
    }
    for (int v : split.label_row(i)) {
      const bool ok = b.task == TaskType::kMultiLabel ? (v == 0 || v == 1)
                                                      : (v >= 0 && v < b.num_classes);
      if (!ok) {
        throw Error(ErrorCode::kRange,
                    fmt::format("{} sample {} has label {} outside [0, {})", name, i, v,
                                b.task == TaskType::kMultiLabel ? 2 : b.num_classes));
      }
    }
  }
}

}  // namespace

std::string_view task_name(TaskType task) {
  switch (task) {
    case TaskType::kBinary: return "binary-class";
    case TaskType::kMultiClass: return "multi-class";
    case TaskType::kMultiLabel: return "multi-label";
    case TaskType::kOrdinal: return "ordinal-regression";
  }
  return "?";
}

TaskType task_from_name(std::string_view name) {
  for (auto t : {TaskType::kBinary, TaskType::kMultiClass, TaskType::kMultiLabel,
                 TaskType::kOrdinal}) {
    if (task_name(t) == name) return t;
  }
  throw Error(ErrorCode::kValidation, fmt::format("unknown task_type '{}'", name));
}

Split Split::subset(std::span<const std::size_t> indices) const {
  Split out;
  out.label_width = label_width;
  for (auto i : indices) {
    out.images.push_back(images[i]);
    auto row = label_row(i);
    out.labels.insert(out.labels.end(), row.begin(), row.end());
  }
  return out;
}

void validate_bundle(const DatasetBundle& b) {
  if (b.channels != 1 && b.channels != 3) {
    throw Error(ErrorCode::kValidation, fmt::format("channels must be 1 or 3, got {}", b.channels));
  }
  if (b.num_classes < (b.task == TaskType::kMultiLabel ? 1 : 2)) {
    throw Error(ErrorCode::kValidation,
                fmt::format("num_classes must be >= 2, got {}", b.num_classes));
  }
  if (b.task == TaskType::kBinary && b.num_classes != 2) {
    throw Error(ErrorCode::kValidation, "binary-class bundles need num_classes = 2");
  }
  validate_split(b.train, b, "train");
  validate_split(b.val, b, "val");
  validate_split(b.test, b, "test");
}

DatasetBundle load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("manifest is not valid JSON: ") + e.what());
  }
  auto field = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) {
      throw Error(ErrorCode::kValidation, fmt::format("manifest missing field '{}'", key));
    }
    return j.at(key);
  };
  DatasetBundle b;
  try {
    b.name = field("name").get<std::string>();
    b.task = task_from_name(field("task_type").get<std::string>());
    b.channels = field("channels").get<int>();
    b.num_classes = field("num_classes").get<int>();
    const auto& splits = field("splits");
    const auto base = path.parent_path();
    Split* targets[] = {&b.train, &b.val, &b.test};
    for (std::size_t s = 0; s < kSplitNames.size(); ++s) {
      const std::string name(kSplitNames[s]);
      if (!splits.contains(name)) {
        throw Error(ErrorCode::kValidation, fmt::format("manifest missing split '{}'", name));
      }
      const auto& entry = splits.at(name);
      if (!entry.contains("images") || !entry.contains("labels")) {
        throw Error(ErrorCode::kValidation,
                    fmt::format("split '{}' needs 'images' and 'labels'", name));
      }
      *targets[s] = load_split(base / entry.at("images").get<std::string>(),
                               base / entry.at("labels").get<std::string>(), b.channels,
                               b.task, b.num_classes, name);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kValidation, std::string("malformed manifest: ") + e.what());
  }
  validate_bundle(b);
  return b;
}

std::filesystem::path write_bundle(const DatasetBundle& b,
                                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json j{{"name", b.name},
                   {"task_type", task_name(b.task)},
                   {"channels", b.channels},
                   {"num_classes", b.num_classes}};
  const Split* sources[] = {&b.train, &b.val, &b.test};
  for (std::size_t s = 0; s < kSplitNames.size(); ++s) {
    const Split& split = *sources[s];
    const std::string name(kSplitNames[s]);
    io::IdxTensor images;
    const auto n = static_cast<std::uint32_t>(split.size());
    images.dims = {n, kImageSide, kImageSide};
    if (b.channels != 1) images.dims.push_back(static_cast<std::uint32_t>(b.channels));
    for (const auto& img : split.images) {
      images.data.insert(images.data.end(), img.data.begin(), img.data.end());
    }
    io::IdxTensor labels;
    labels.dims = {n};
    if (split.label_width > 1 || b.task == TaskType::kMultiLabel) {
      labels.dims.push_back(static_cast<std::uint32_t>(split.label_width));
    }
    for (int v : split.labels) labels.data.push_back(static_cast<std::uint8_t>(v));
    io::write_idx(images, dir / (name + "_images.idx"));
    io::write_idx(labels, dir / (name + "_labels.idx"));
    j["splits"][name] = {{"images", name + "_images.idx"}, {"labels", name + "_labels.idx"}};
  }
  const auto manifest = dir / "manifest.json";
  std::ofstream out(manifest);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + manifest.string());
  return manifest;
}

}  // namespace usaa
