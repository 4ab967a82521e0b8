#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "usaa/encoding.hpp"
#include "usaa/rng.hpp"

namespace usaa::augment {

struct ImageU8 {
  int height = 0;
  int width = 0;
  int channels = 1;
  // Row-major, channel-last.
  std::vector<std::uint8_t> data;

  ImageU8() = default;
  ImageU8(int h, int w, int c, std::uint8_t fill = 0)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  std::uint8_t& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool valid() const {
    return height > 0 && width > 0 && (channels == 1 || channels == 3) &&
           data.size() == static_cast<std::size_t>(height) * width * channels;
  }
  bool operator==(const ImageU8&) const = default;
};

struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

inline constexpr double kMinStd = 1e-6;

// Fixed magnitudes; the search never tunes these.
struct Magnitudes {
  int crop_padding = 4;
  double rotate_degrees = 15.0;
  double cutout_fraction = 0.3;
  double jitter_contrast = 0.1;
  double jitter_brightness = 25.5;
};

using SubPolicy = std::vector<AugOp>;
using Policy = std::vector<SubPolicy>;

SubPolicy subpolicy_from_codes(std::span<const int> codes);

// Normalized image in channel-first layout (c, h, w).
struct NormalizedImage {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;
};

// Deterministic primitives the stochastic operations are built from.
ImageU8 horizontal_flip(const ImageU8& img);
ImageU8 vertical_flip(const ImageU8& img);
ImageU8 crop_padded(const ImageU8& img, int padding, int offset_y, int offset_x);
ImageU8 rotate(const ImageU8& img, double degrees);
ImageU8 cutout_at(const ImageU8& img, int center_y, int center_x, int side);
ImageU8 color_jitter_with(const ImageU8& img, double contrast, double brightness);
std::vector<double> channel_means(const ImageU8& img);
int cutout_side(const ImageU8& img, const Magnitudes& m);

ImageU8 apply_op(AugOp op, const ImageU8& img, Stream& rng,
                 const Magnitudes& m = {});

NormalizedImage normalize(const ImageU8& img, const NormStats& stats);

NormalizedImage apply_subpolicy(const SubPolicy& sp, const ImageU8& img,
                                const NormStats& stats, Stream& rng,
                                const Magnitudes& m = {});

enum class PolicySampling { kPerBatch, kPerImage };

std::vector<NormalizedImage> apply_policy_batch(
    const Policy& policy, std::span<const ImageU8> batch,
    const NormStats& stats, Stream& rng, const Magnitudes& m = {},
    PolicySampling sampling = PolicySampling::kPerBatch);

NormStats compute_norm_stats(std::span<const ImageU8> images);

// True when every op in the sub-policy ignores the random stream.
bool deterministic(const SubPolicy& sp);

}  // namespace usaa::augment
