#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "usaa/augment.hpp"

namespace usaa {

enum class TaskType { kBinary, kMultiClass, kMultiLabel, kOrdinal };

std::string_view task_name(TaskType task);
TaskType task_from_name(std::string_view name);

// Images plus labels. Single-label tasks store one label per sample; the
// multi-label task stores `label_width` 0/1 entries per sample.
struct Split {
  std::vector<augment::ImageU8> images;
  std::vector<int> labels;
  int label_width = 1;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  int label(std::size_t i) const { return labels[i * static_cast<std::size_t>(label_width)]; }
  std::span<const int> label_row(std::size_t i) const {
    return {labels.data() + i * static_cast<std::size_t>(label_width),
            static_cast<std::size_t>(label_width)};
  }
  Split subset(std::span<const std::size_t> indices) const;
};

struct DatasetBundle {
  std::string name;
  TaskType task = TaskType::kMultiClass;
  int channels = 1;
  int num_classes = 2;  // label count for the multi-label task
  Split train;
  Split val;
  Split test;

  // Width of the network head.
  int num_outputs() const { return num_classes; }
};

inline constexpr int kImageSide = 28;

// Throws usaa::Error naming the first violated invariant.
void validate_bundle(const DatasetBundle& bundle);

DatasetBundle load_manifest(const std::filesystem::path& path);

// Writes IDX files plus a manifest.json into `dir`; returns the manifest path.
std::filesystem::path write_bundle(const DatasetBundle& bundle,
                                   const std::filesystem::path& dir);

}  // namespace usaa
