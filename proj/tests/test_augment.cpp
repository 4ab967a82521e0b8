#include "doctest.h"

#include <cmath>

#include "usaa/augment.hpp"
#include "usaa/error.hpp"

using namespace usaa;
using namespace usaa::augment;

namespace {

ImageU8 ramp(int h, int w, int c) {
  ImageU8 img(h, w, c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) img.at(y, x, k) = static_cast<std::uint8_t>((7 * y + 3 * x + 50 * k) % 256);
  return img;
}

}  // namespace

TEST_CASE("flips") {
  const auto img = ramp(28, 28, 3);
  const auto h = horizontal_flip(img);
  const auto v = vertical_flip(img);
  CHECK(h.at(4, 0, 2) == img.at(4, 27, 2));
  CHECK(v.at(0, 9, 1) == img.at(27, 9, 1));
  CHECK(horizontal_flip(h) == img);
  CHECK(vertical_flip(v) == img);
}

TEST_CASE("padded crop") {
  const auto img = ramp(28, 28, 1);
  CHECK(crop_padded(img, 4, 4, 4) == img);
  const auto shifted = crop_padded(img, 4, 0, 8);
  // Output (y, x) reads source (y - 4, x + 4).
  CHECK(shifted.at(2, 5, 0) == 0);
  CHECK(shifted.at(10, 5, 0) == img.at(6, 9, 0));
  CHECK(shifted.at(10, 25, 0) == 0);
  Stream rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto out = apply_op(AugOp::kRandomCrop, img, rng);
    CHECK(out.height == 28);
    CHECK(out.width == 28);
  }
}

TEST_CASE("rotation") {
  const auto img = ramp(28, 28, 1);
  CHECK(rotate(img, 0.0) == img);
  const auto r = rotate(img, 90.0);
  int mismatches = 0;
  for (int y = 0; y < 28; ++y)
    for (int x = 0; x < 28; ++x)
      if (r.at(y, x, 0) != img.at(27 - x, y, 0)) ++mismatches;
  CHECK(mismatches == 0);
  // Corners leave the source at 45 degrees and take the channel mean.
  const auto r45 = rotate(img, 45.0);
  const auto mean = channel_means(img);
  CHECK(r45.at(0, 0, 0) == static_cast<std::uint8_t>(std::lround(mean[0])));
}

TEST_CASE("cutout fills a side x side square with the channel mean") {
  ImageU8 img(28, 28, 1, 100);
  img.at(0, 0, 0) = 200;
  const Magnitudes m;
  CHECK(cutout_side(img, m) == 8);
  const auto out = cutout_at(img, 14, 14, 8);
  const double mean = (100.0 * 783 + 200.0) / 784.0;
  int changed = 0;
  for (int y = 0; y < 28; ++y)
    for (int x = 0; x < 28; ++x) {
      const bool inside = y >= 10 && y < 18 && x >= 10 && x < 18;
      if (inside) CHECK(out.at(y, x, 0) == static_cast<std::uint8_t>(std::lround(mean)));
      else CHECK(out.at(y, x, 0) == img.at(y, x, 0));
      changed += inside;
    }
  CHECK(changed == 64);
  // Clipped at the border.
  const auto corner = cutout_at(ImageU8(28, 28, 1, 9), 0, 0, 8);
  CHECK(corner == ImageU8(28, 28, 1, 9));
  ImageU8 two(28, 28, 1, 0);
  two.at(27, 27, 0) = 255;
  const auto clipped = cutout_at(two, 27, 27, 8);
  CHECK(clipped.at(27, 27, 0) == 0);
  CHECK(clipped.at(23, 23, 0) == 0);
}

TEST_CASE("color jitter") {
  ImageU8 img(2, 2, 1);
  img.data = {0, 100, 128, 255};
  const auto out = color_jitter_with(img, 1.1, 10.0);
  CHECK(out.data[0] == 0);    // 1.1 * -128 + 138 = -2.8 -> clamp
  CHECK(out.data[1] == 107);  // 1.1 * -28 + 138 = 107.2
  CHECK(out.data[2] == 138);
  CHECK(out.data[3] == 255);
  Stream rng(4);
  const Magnitudes m;
  for (int i = 0; i < 20; ++i) {
    const auto j = apply_op(AugOp::kColorJitter, ImageU8(4, 4, 1, 128), rng, m);
    CHECK(std::abs(j.data[0] - 128) <= 26);
  }
}

TEST_CASE("normalization matches a two-pass reference") {
  Stream rng(8);
  std::vector<ImageU8> imgs;
  for (int i = 0; i < 13; ++i) {
    ImageU8 img(28, 28, 3);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    imgs.push_back(img);
  }
  const auto stats = compute_norm_stats(imgs);
  for (int c = 0; c < 3; ++c) {
    double s = 0, n = 0;
    for (auto& img : imgs)
      for (int p = 0; p < 784; ++p) s += img.data[static_cast<std::size_t>(p) * 3 + c], ++n;
    const double mean = s / n;
    double ss = 0;
    for (auto& img : imgs)
      for (int p = 0; p < 784; ++p) {
        const double d = img.data[static_cast<std::size_t>(p) * 3 + c] - mean;
        ss += d * d;
      }
    CHECK(stats.mean[static_cast<std::size_t>(c)] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(stats.stddev[static_cast<std::size_t>(c)] == doctest::Approx(std::sqrt(ss / n)).epsilon(1e-10));
  }
  const auto z = normalize(imgs[0], stats);
  CHECK(z.channels == 3);
  const double expect = (imgs[0].at(3, 5, 1) - stats.mean[1]) / stats.stddev[1];
  CHECK(z.data[784 + 3 * 28 + 5] == doctest::Approx(expect).epsilon(1e-5));

  const auto flat = compute_norm_stats(std::vector<ImageU8>{ImageU8(28, 28, 1, 7)});
  CHECK(flat.stddev[0] == kMinStd);
  CHECK_THROWS_AS(compute_norm_stats({}), Error);
  CHECK_THROWS_AS(normalize(imgs[0], flat), Error);
}

TEST_CASE("sub-policies") {
  const int ok[] = {3, 6};
  CHECK(subpolicy_from_codes(ok) == SubPolicy{AugOp::kHorizontalFlip, AugOp::kCutout});
  const int ids[] = {1, 1};
  CHECK(subpolicy_from_codes(ids).size() == 2);
  const int dup[] = {4, 4};
  CHECK_THROWS_AS(subpolicy_from_codes(dup), Error);
  const int random[] = {-1, 2};
  CHECK_THROWS_AS(subpolicy_from_codes(random), Error);
  CHECK(deterministic({AugOp::kIdentity, AugOp::kVerticalFlip}));
  CHECK_FALSE(deterministic({AugOp::kHorizontalFlip, AugOp::kRandomCrop}));
}

TEST_CASE("policy batches") {
  const auto img = ramp(28, 28, 1);
  const std::vector<ImageU8> batch(16, img);
  const auto stats = compute_norm_stats(batch);
  const Policy policy{{AugOp::kHorizontalFlip}, {AugOp::kVerticalFlip}};
  Stream rng(2);
  const auto h = normalize(horizontal_flip(img), stats).data;
  bool saw_mixed = false;
  for (int trial = 0; trial < 10; ++trial) {
    const auto out = apply_policy_batch(policy, batch, stats, rng);
    for (const auto& o : out) CHECK(o.data == out.front().data);
    const auto mixed = apply_policy_batch(policy, batch, stats, rng, {}, PolicySampling::kPerImage);
    for (const auto& o : mixed) saw_mixed |= o.data != mixed.front().data;
  }
  CHECK(saw_mixed);
  CHECK(apply_policy_batch(Policy{{AugOp::kHorizontalFlip}}, batch, stats, rng).front().data == h);
  CHECK_THROWS_AS(apply_policy_batch({}, batch, stats, rng), Error);
}

TEST_CASE("augmentation is reproducible from the stream") {
  const auto img = ramp(28, 28, 3);
  for (int op = 1; op <= kNumAugOps; ++op) {
    Stream a(77), b(77);
    CHECK(apply_op(static_cast<AugOp>(op), img, a) == apply_op(static_cast<AugOp>(op), img, b));
  }
}
