#include "usaa/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>

#include "usaa/error.hpp"

namespace usaa::augment {
namespace {

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

SubPolicy subpolicy_from_codes(std::span<const int> codes) {
  SubPolicy sp;
  for (int code : codes) {
    if (code < 1 || code > kNumAugOps) {
      throw Error(ErrorCode::kValidation,
                  fmt::format("sub-policy needs concrete ops, got {}", code));
    }
    const auto op = static_cast<AugOp>(code);
    if (op != AugOp::kIdentity && std::find(sp.begin(), sp.end(), op) != sp.end()) {
      throw Error(ErrorCode::kValidation, "duplicate augmentation op");
    }
    sp.push_back(op);
  }
  return sp;
}

ImageU8 horizontal_flip(const ImageU8& img) {
  ImageU8 out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

ImageU8 vertical_flip(const ImageU8& img) {
  ImageU8 out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
  return out;
}

ImageU8 crop_padded(const ImageU8& img, int padding, int offset_y,
                    int offset_x) {
  ImageU8 out(img.height, img.width, img.channels, 0);
  for (int y = 0; y < img.height; ++y) {
    const int sy = y + offset_y - padding;
    if (sy < 0 || sy >= img.height) continue;
    for (int x = 0; x < img.width; ++x) {
      const int sx = x + offset_x - padding;
      if (sx < 0 || sx >= img.width) continue;
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

std::vector<double> channel_means(const ImageU8& img) {
  std::vector<double> sum(static_cast<std::size_t>(img.channels), 0.0);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    sum[i % static_cast<std::size_t>(img.channels)] += img.data[i];
  }
  const double count = static_cast<double>(img.height) * img.width;
  for (double& s : sum) s /= count;
  return sum;
}

ImageU8 rotate(const ImageU8& img, double degrees) {
  const auto fill = channel_means(img);
  ImageU8 out(img.height, img.width, img.channels);
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double cy = (img.height - 1) / 2.0;
  const double cx = (img.width - 1) / 2.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      // Inverse mapping from output pixel to source location.
      const double dx = x - cx;
      const double dy = y - cy;
      const double sx = cos_t * dx + sin_t * dy + cx;
      const double sy = -sin_t * dx + cos_t * dy + cy;
      const bool inside = sx >= 0.0 && sy >= 0.0 && sx <= img.width - 1 &&
                          sy <= img.height - 1;
      if (!inside) {
        for (int c = 0; c < img.channels; ++c) {
          out.at(y, x, c) = to_u8(fill[static_cast<std::size_t>(c)]);
        }
        continue;
      }
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const int y1 = std::min(y0 + 1, img.height - 1);
      const double fx = sx - x0;
      const double fy = sy - y0;
      for (int c = 0; c < img.channels; ++c) {
        const double top = (1 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c);
        const double bottom =
            (1 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c);
        out.at(y, x, c) = to_u8((1 - fy) * top + fy * bottom);
      }
    }
  }
  return out;
}

int cutout_side(const ImageU8& img, const Magnitudes& m) {
  return std::max(
      1, static_cast<int>(std::lround(m.cutout_fraction *
                                      std::min(img.height, img.width))));
}

ImageU8 cutout_at(const ImageU8& img, int center_y, int center_x, int side) {
  const auto fill = channel_means(img);
  ImageU8 out = img;
  const int y_begin = std::max(0, center_y - side / 2);
  const int y_end = std::min(img.height, center_y - side / 2 + side);
  const int x_begin = std::max(0, center_x - side / 2);
  const int x_end = std::min(img.width, center_x - side / 2 + side);
  for (int y = y_begin; y < y_end; ++y)
    for (int x = x_begin; x < x_end; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = to_u8(fill[static_cast<std::size_t>(c)]);
  return out;
}

ImageU8 color_jitter_with(const ImageU8& img, double contrast,
                          double brightness) {
  ImageU8 out = img;
  for (auto& v : out.data) {
    v = to_u8(contrast * (static_cast<double>(v) - 128.0) + 128.0 + brightness);
  }
  return out;
}

ImageU8 apply_op(AugOp op, const ImageU8& img, Stream& rng,
                 const Magnitudes& m) {
  switch (op) {
    case AugOp::kIdentity:
      return img;
    case AugOp::kRandomCrop: {
      const int oy = rng.uniform_int(0, 2 * m.crop_padding);
      const int ox = rng.uniform_int(0, 2 * m.crop_padding);
      return crop_padded(img, m.crop_padding, oy, ox);
    }
    case AugOp::kHorizontalFlip:
      return horizontal_flip(img);
    case AugOp::kVerticalFlip:
      return vertical_flip(img);
    case AugOp::kRandomRotate:
      return rotate(img, rng.uniform(-m.rotate_degrees, m.rotate_degrees));
    case AugOp::kCutout: {
      const int cy = rng.uniform_int(0, img.height - 1);
      const int cx = rng.uniform_int(0, img.width - 1);
      return cutout_at(img, cy, cx, cutout_side(img, m));
    }
    case AugOp::kColorJitter: {
      const double alpha =
          rng.uniform(1.0 - m.jitter_contrast, 1.0 + m.jitter_contrast);
      const double beta = rng.uniform(-m.jitter_brightness, m.jitter_brightness);
      return color_jitter_with(img, alpha, beta);
    }
  }
  throw Error(ErrorCode::kRange,
              fmt::format("augmentation op {}", static_cast<int>(op)));
}

NormalizedImage normalize(const ImageU8& img, const NormStats& stats) {
  if (stats.mean.size() != static_cast<std::size_t>(img.channels) ||
      stats.stddev.size() != static_cast<std::size_t>(img.channels)) {
    throw Error(ErrorCode::kShape, "normalization stats do not match channels");
  }
  NormalizedImage out{img.channels, img.height, img.width, {}};
  const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  out.data.resize(plane * static_cast<std::size_t>(img.channels));
  for (int c = 0; c < img.channels; ++c) {
    const double mean = stats.mean[static_cast<std::size_t>(c)] / 255.0;
    const double scale = 255.0 / stats.stddev[static_cast<std::size_t>(c)];
    for (std::size_t p = 0; p < plane; ++p) {
      const double v = img.data[p * static_cast<std::size_t>(img.channels) +
                                static_cast<std::size_t>(c)] /
                       255.0;
      out.data[static_cast<std::size_t>(c) * plane + p] =
          static_cast<float>((v - mean) * scale);
    }
  }
  return out;
}

NormalizedImage apply_subpolicy(const SubPolicy& sp, const ImageU8& img,
                                const NormStats& stats, Stream& rng,
                                const Magnitudes& m) {
  ImageU8 current = img;
  for (AugOp op : sp) current = apply_op(op, current, rng, m);
  return normalize(current, stats);
}

std::vector<NormalizedImage> apply_policy_batch(const Policy& policy,
                                                std::span<const ImageU8> batch,
                                                const NormStats& stats,
                                                Stream& rng, const Magnitudes& m,
                                                PolicySampling sampling) {
  if (policy.empty()) {
    throw Error(ErrorCode::kParameter, "policy must contain a sub-policy");
  }
  std::vector<NormalizedImage> out;
  if (batch.empty()) return out;
  out.reserve(batch.size());
  const int last = static_cast<int>(policy.size()) - 1;
  const SubPolicy* chosen = &policy[static_cast<std::size_t>(rng.uniform_int(0, last))];
  for (const auto& img : batch) {
    if (sampling == PolicySampling::kPerImage && out.size() > 0) {
      chosen = &policy[static_cast<std::size_t>(rng.uniform_int(0, last))];
    }
    out.push_back(apply_subpolicy(*chosen, img, stats, rng, m));
  }
  return out;
}

NormStats compute_norm_stats(std::span<const ImageU8> images) {
  if (images.empty()) {
    throw Error(ErrorCode::kParameter, "normalization needs at least one image");
  }
  const auto channels = static_cast<std::size_t>(images.front().channels);
  // u8 samples: integer power sums are exact.
  std::vector<std::uint64_t> sum(channels, 0), sum_sq(channels, 0), count(channels, 0);
  for (const auto& img : images) {
    if (static_cast<std::size_t>(img.channels) != channels) {
      throw Error(ErrorCode::kShape, "mixed channel counts in image set");
    }
    for (std::size_t i = 0; i < img.data.size(); ++i) {
      const std::uint64_t v = img.data[i];
      sum[i % channels] += v;
      sum_sq[i % channels] += v * v;
      ++count[i % channels];
    }
  }
  NormStats stats;
  for (std::size_t c = 0; c < channels; ++c) {
    const auto n = static_cast<long double>(count[c]);
    const long double mean = static_cast<long double>(sum[c]) / n;
    const long double var =
        std::max(0.0L, static_cast<long double>(sum_sq[c]) / n - mean * mean);
    stats.mean.push_back(static_cast<double>(mean));
    stats.stddev.push_back(
        std::max(kMinStd, static_cast<double>(std::sqrt(var))));
  }
  return stats;
}

bool deterministic(const SubPolicy& sp) {
  return std::all_of(sp.begin(), sp.end(), [](AugOp op) {
    return op == AugOp::kIdentity || op == AugOp::kHorizontalFlip ||
           op == AugOp::kVerticalFlip;
  });
}

}  // namespace usaa::augment
