#pragma once

// Synthetic 28x28 sets shared by the tests and the acceptance run.

#include <cstdint>

#include "usaa/dataset.hpp"
#include "usaa/rng.hpp"

namespace usaa::toy {

// Class 0: a bright 3-row bar starting in rows 3..8; class 1: rows 17..22.
// A vertical flip maps one band onto the other, a horizontal flip keeps it.
inline Split bar_split(int n, Stream& rng, int noise = 40) {
  Split s;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    augment::ImageU8 img(kImageSide, kImageSide, 1);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, noise));
    const int start = label == 0 ? rng.uniform_int(3, 8) : rng.uniform_int(17, 22);
    for (int y = start; y < start + 3; ++y)
      for (int x = 0; x < kImageSide; ++x)
        img.at(y, x, 0) = static_cast<std::uint8_t>(rng.uniform_int(200, 240));
    s.images.push_back(std::move(img));
    s.labels.push_back(label);
  }
  return s;
}

inline DatasetBundle bar_bundle(int n_train, int n_val, int n_test, std::uint64_t seed) {
  Stream rng(splitmix64(seed ^ 0xba5eba11ULL));
  DatasetBundle b;
  b.name = "bars";
  b.task = TaskType::kBinary;
  b.channels = 1;
  b.num_classes = 2;
  b.train = bar_split(n_train, rng);
  b.val = bar_split(n_val, rng);
  b.test = bar_split(n_test, rng);
  return b;
}

// Class 0: a horizontal bar, class 1: a vertical one, anywhere in the image.
inline Split orientation_split(int n, Stream& rng) {
  Split s;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    augment::ImageU8 img(kImageSide, kImageSide, 1);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 40));
    const int start = rng.uniform_int(2, 23);
    for (int a = start; a < start + 3; ++a)
      for (int b = 0; b < kImageSide; ++b) {
        auto& px = label == 0 ? img.at(a, b, 0) : img.at(b, a, 0);
        px = static_cast<std::uint8_t>(rng.uniform_int(200, 240));
      }
    s.images.push_back(std::move(img));
    s.labels.push_back(label);
  }
  return s;
}

// Uniform noise images with labels cycling over `classes`.
inline Split noise_split(int n, int channels, int classes, Stream& rng) {
  Split s;
  for (int i = 0; i < n; ++i) {
    augment::ImageU8 img(kImageSide, kImageSide, channels);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    s.images.push_back(std::move(img));
    s.labels.push_back(i % classes);
  }
  return s;
}

}  // namespace usaa::toy
