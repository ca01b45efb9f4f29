#pragma once

// Seeded data augmentation. Geometric ops (flip, rotation, random resized
// crop, elastic) move image and mask together, the mask resampled with
// nearest neighbour; photometric ops touch the image only. Ops always run
// in the order flip, rotation, brightness/contrast, gamma, RGB shift, blur,
// Gaussian noise, random resized crop, elastic.

#include <algorithm>
#include <array>
#include <bitset>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "neurocount/image.hpp"

namespace neurocount::augment {

enum class Op {
  Flip,
  Rotation,
  BrightnessContrast,
  Gamma,
  RgbShift,
  Blur,
  GaussianNoise,
  RandomResizedCrop,
  Elastic,
};
inline constexpr std::size_t kOpCount = 9;

inline constexpr std::array<std::string_view, kOpCount> kOpNames = {
    "Flip", "Rotation", "BrightnessContrast", "Gamma", "RGBShift",
    "Blur", "GaussianNoise", "RandomResizedCrop", "Elastic"};

using OpSet = std::bitset<kOpCount>;

inline OpSet ops_of(std::initializer_list<Op> ops) {
  OpSet set;
  for (Op op : ops) set.set(static_cast<std::size_t>(op));
  return set;
}

/// Op sets of augmentation modes 1..7.
inline OpSet mode_ops(int mode) {
  using enum Op;
  switch (mode) {
    case 1: return {};
    case 2: return ops_of({Flip, Rotation, BrightnessContrast, Gamma});
    case 3: return ops_of({Flip, Rotation, RgbShift, Blur, GaussianNoise});
    case 4: return ops_of({Flip, Rotation, RgbShift, Blur, GaussianNoise, RandomResizedCrop});
    case 5: return ops_of({Flip, Rotation, RgbShift, Blur, GaussianNoise, RandomResizedCrop, Elastic});
    case 6: return ops_of({Flip, Rotation, BrightnessContrast, Gamma, RgbShift, Blur, GaussianNoise, RandomResizedCrop});
    case 7:
      return ops_of({Flip, Rotation, BrightnessContrast, Gamma, RgbShift, Blur, GaussianNoise, RandomResizedCrop, Elastic});
    default:
      throw Error(ErrorCode::InvalidMode, "augmentation mode must be 1..7, got " + std::to_string(mode));
  }
}

struct Params {
  double flip_probability = 0.5;  // independently for each axis
  double rotation_min_deg = -180.0;
  double rotation_max_deg = 180.0;
  double rotation_step_deg = 0.0;  // > 0 snaps angles to multiples
  double brightness_limit = 0.2;
  double contrast_limit = 0.2;
  double gamma_min = 0.8;
  double gamma_max = 1.25;
  double rgb_shift_limit = 25.0 / 255.0;
  int blur_radius_max = 3;
  double noise_sigma_max = 0.05;
  double crop_scale_min = 0.5;
  double crop_scale_max = 1.0;
  double crop_ratio_min = 3.0 / 4.0;
  double crop_ratio_max = 4.0 / 3.0;
  int crop_size = 512;
  double elastic_alpha = 34.0;
  double elastic_sigma = 4.0;
};

struct AugmentSpec {
  OpSet ops;
  std::uint64_t seed = 0;
  Params params;

  static AugmentSpec from_mode(int mode, std::uint64_t seed, Params params = {}) {
    return {mode_ops(mode), seed, params};
  }
};

struct SamplePair {
  FloatImage image;
  std::optional<BinaryMask> mask;
};

/// SplitMix64 stream; portable, so sampled parameters are identical on
/// every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  /// Uniform in [0, 1).
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi) noexcept {
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

/// Per-sample seed so parallel pipelines reproduce serial output.
inline std::uint64_t sample_seed(std::uint64_t base, std::uint64_t index) {
  Rng rng(base ^ (0xd1b54a32d192ed03ull * (index + 1)));
  return rng.next();
}

namespace detail {

/// Reflect-101 border (…2 1 | 0 1 2 … n-1 | n-2 …).
inline int reflect101(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

inline float sample_bilinear(const FloatImage& img, double sx, double sy, int c) noexcept {
  const double fx = std::floor(sx);
  const double fy = std::floor(sy);
  const double ax = sx - fx;
  const double ay = sy - fy;
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int w = img.width();
  const int h = img.height();
  const int xa = reflect101(x0, w), xb = reflect101(x0 + 1, w);
  const int ya = reflect101(y0, h), yb = reflect101(y0 + 1, h);
  const double top = (1.0 - ax) * img(xa, ya, c) + ax * img(xb, ya, c);
  const double bottom = (1.0 - ax) * img(xa, yb, c) + ax * img(xb, yb, c);
  return static_cast<float>((1.0 - ay) * top + ay * bottom);
}

inline std::uint8_t sample_nearest(const BinaryMask& mask, double sx, double sy) noexcept {
  const int x = reflect101(static_cast<int>(std::lround(sx)), mask.width());
  const int y = reflect101(static_cast<int>(std::lround(sy)), mask.height());
  return mask(x, y);
}

/// Resamples image (bilinear) and mask (nearest) through `source(x, y)`,
/// which maps output pixel centres to input coordinates.
template <typename SourceFn>
void warp(SamplePair& pair, int out_w, int out_h, SourceFn&& source) {
  FloatImage image(out_w, out_h);
  std::optional<BinaryMask> mask;
  if (pair.mask) mask.emplace(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const auto [sx, sy] = source(x, y);
      for (int c = 0; c < 3; ++c) image(x, y, c) = sample_bilinear(pair.image, sx, sy, c);
      if (mask) (*mask)(x, y) = sample_nearest(*pair.mask, sx, sy);
    }
  }
  pair.image = std::move(image);
  pair.mask = std::move(mask);
}

/// Exact pixel permutation: output(x, y) = input(map(x, y)).
template <typename ImageT, typename MapFn>
ImageT permute(const ImageT& in, int out_w, int out_h, MapFn&& map) {
  ImageT out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const auto [sx, sy] = map(x, y);
      for (int c = 0; c < ImageT::kChannels; ++c) out(x, y, c) = in(sx, sy, c);
    }
  }
  return out;
}

inline void clamp_unit(FloatImage& img) {
  for (auto& v : img.data()) v = std::clamp(v, 0.0f, 1.0f);
}

/// Separable 1-D convolution along x then y with reflect-101 borders.
inline std::vector<double> separable_filter(const std::vector<double>& src, int w, int h,
                                            const std::vector<double>& kernel) {
  const int r = static_cast<int>(kernel.size() / 2);
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) acc += kernel[static_cast<std::size_t>(k + r)] * src[static_cast<std::size_t>(y) * w + reflect101(x + k, w)];
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) acc += kernel[static_cast<std::size_t>(k + r)] * tmp[static_cast<std::size_t>(reflect101(y + k, h)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

inline std::vector<double> gaussian_kernel(double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[static_cast<std::size_t>(i + r)];
  }
  for (auto& v : k) v /= total;
  return k;
}

}  // namespace detail

enum class Axis { Horizontal, Vertical };

/// Horizontal mirrors left-right, vertical mirrors top-bottom.
inline void flip(SamplePair& pair, Axis axis) {
  const int w = pair.image.width();
  const int h = pair.image.height();
  auto map = [&](int x, int y) {
    return axis == Axis::Horizontal ? std::pair{w - 1 - x, y} : std::pair{x, h - 1 - y};
  };
  pair.image = detail::permute(pair.image, w, h, map);
  if (pair.mask) pair.mask = detail::permute(*pair.mask, w, h, map);
}

/// Rotates about the image centre, keeping the extent. Quarter turns that
/// keep the pixel grid (any multiple of 180, or 90 on square images) are
/// exact permutations; other angles resample with reflect-101 borders.
inline void rotate(SamplePair& pair, double degrees) {
  const int w = pair.image.width();
  const int h = pair.image.height();
  const double quarter = degrees / 90.0;
  if (quarter == std::round(quarter)) {
    const int k = ((static_cast<int>(std::lround(quarter)) % 4) + 4) % 4;
    if (k == 0) return;
    if (k == 2 || w == h) {
      auto map = [&](int x, int y) -> std::pair<int, int> {
        switch (k) {
          case 1: return {y, w - 1 - x};
          case 2: return {w - 1 - x, h - 1 - y};
          default: return {h - 1 - y, x};
        }
      };
      pair.image = detail::permute(pair.image, w, h, map);
      if (pair.mask) pair.mask = detail::permute(*pair.mask, w, h, map);
      return;
    }
  }
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  const double cx = 0.5 * (w - 1);
  const double cy = 0.5 * (h - 1);
  detail::warp(pair, w, h, [&](int x, int y) {
    const double dx = x - cx;
    const double dy = y - cy;
    return std::pair{cx + cs * dx + sn * dy, cy - sn * dx + cs * dy};
  });
}

/// v * (1 + contrast) + brightness.
inline void brightness_contrast(SamplePair& pair, double brightness, double contrast) {
  if (brightness == 0.0 && contrast == 0.0) return;
  for (auto& v : pair.image.data()) v = static_cast<float>(v * (1.0 + contrast) + brightness);
  detail::clamp_unit(pair.image);
}

inline void gamma(SamplePair& pair, double g) {
  if (g == 1.0) return;
  for (auto& v : pair.image.data()) v = static_cast<float>(std::pow(static_cast<double>(v), g));
  detail::clamp_unit(pair.image);
}

inline void rgb_shift(SamplePair& pair, double dr, double dg, double db) {
  if (dr == 0.0 && dg == 0.0 && db == 0.0) return;
  const double shift[3] = {dr, dg, db};
  auto data = pair.image.data();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(data[i] + shift[i % 3]);
  detail::clamp_unit(pair.image);
}

/// Box blur with a (2r+1)^2 window.
inline void blur(SamplePair& pair, int radius) {
  if (radius <= 0) return;
  const int w = pair.image.width();
  const int h = pair.image.height();
  const std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1), 1.0 / (2 * radius + 1));
  std::vector<double> plane(pair.image.pixel_count());
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = pair.image.data()[i * 3 + c];
    const auto out = detail::separable_filter(plane, w, h, kernel);
    for (std::size_t i = 0; i < plane.size(); ++i) pair.image.data()[i * 3 + c] = static_cast<float>(out[i]);
  }
  detail::clamp_unit(pair.image);
}

inline void gaussian_noise(SamplePair& pair, double sigma, Rng& rng) {
  if (sigma <= 0.0) return;
  for (auto& v : pair.image.data()) v = static_cast<float>(v + sigma * rng.normal());
  detail::clamp_unit(pair.image);
}

/// Crops a random region covering `scale` of the area with aspect ratio in
/// the given range, then resizes it to out x out.
inline void random_resized_crop(SamplePair& pair, Rng& rng, double scale_min, double scale_max,
                                double ratio_min, double ratio_max, int out) {
  const int w = pair.image.width();
  const int h = pair.image.height();
  double cw = w, ch = h, x0 = 0.0, y0 = 0.0;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double area = rng.uniform(scale_min, scale_max) * w * h;
    const double ratio = std::exp(rng.uniform(std::log(ratio_min), std::log(ratio_max)));
    const int tw = static_cast<int>(std::lround(std::sqrt(area * ratio)));
    const int th = static_cast<int>(std::lround(std::sqrt(area / ratio)));
    if (tw >= 1 && th >= 1 && tw <= w && th <= h) {
      cw = tw;
      ch = th;
      x0 = rng.uniform_int(0, w - tw);
      y0 = rng.uniform_int(0, h - th);
      break;
    }
  }
  const double sx = cw / out;
  const double sy = ch / out;
  detail::warp(pair, out, out, [&](int x, int y) {
    return std::pair{x0 + (x + 0.5) * sx - 0.5, y0 + (y + 0.5) * sy - 0.5};
  });
}

/// Displaces pixels by a Gaussian-smoothed uniform random field scaled by alpha.
inline void elastic(SamplePair& pair, Rng& rng, double alpha, double sigma) {
  const int w = pair.image.width();
  const int h = pair.image.height();
  std::vector<double> dx(pair.image.pixel_count()), dy(pair.image.pixel_count());
  for (auto& v : dx) v = rng.uniform(-1.0, 1.0);
  for (auto& v : dy) v = rng.uniform(-1.0, 1.0);
  const auto kernel = detail::gaussian_kernel(sigma);
  dx = detail::separable_filter(dx, w, h, kernel);
  dy = detail::separable_filter(dy, w, h, kernel);
  detail::warp(pair, w, h, [&](int x, int y) {
    const std::size_t i = static_cast<std::size_t>(y) * w + x;
    return std::pair{x + alpha * dx[i], y + alpha * dy[i]};
  });
}

/// Applies the active ops of `spec`. Output is a pure function of the pair and the spec.
inline SamplePair apply(SamplePair pair, const AugmentSpec& spec) {
  if (pair.mask) require_same_extent(pair.image, *pair.mask, "augment: image and mask differ in size");
  const Params& p = spec.params;
  Rng rng(spec.seed);
  auto active = [&](Op op) { return spec.ops.test(static_cast<std::size_t>(op)); };

  if (active(Op::Flip)) {
    if (rng.uniform() < p.flip_probability) flip(pair, Axis::Horizontal);
    if (rng.uniform() < p.flip_probability) flip(pair, Axis::Vertical);
  }
  if (active(Op::Rotation)) {
    double angle = rng.uniform(p.rotation_min_deg, p.rotation_max_deg);
    if (p.rotation_step_deg > 0.0) angle = std::round(angle / p.rotation_step_deg) * p.rotation_step_deg;
    rotate(pair, angle);
  }
  if (active(Op::BrightnessContrast)) {
    const double b = rng.uniform(-p.brightness_limit, p.brightness_limit);
    const double c = rng.uniform(-p.contrast_limit, p.contrast_limit);
    brightness_contrast(pair, b, c);
  }
  if (active(Op::Gamma)) gamma(pair, rng.uniform(p.gamma_min, p.gamma_max));
  if (active(Op::RgbShift)) {
    const double dr = rng.uniform(-p.rgb_shift_limit, p.rgb_shift_limit);
    const double dg = rng.uniform(-p.rgb_shift_limit, p.rgb_shift_limit);
    const double db = rng.uniform(-p.rgb_shift_limit, p.rgb_shift_limit);
    rgb_shift(pair, dr, dg, db);
  }
  if (active(Op::Blur)) blur(pair, rng.uniform_int(0, p.blur_radius_max));
  if (active(Op::GaussianNoise)) gaussian_noise(pair, rng.uniform(0.0, p.noise_sigma_max), rng);
  if (active(Op::RandomResizedCrop)) {
    random_resized_crop(pair, rng, p.crop_scale_min, p.crop_scale_max, p.crop_ratio_min, p.crop_ratio_max,
                        p.crop_size);
  }
  if (active(Op::Elastic)) elastic(pair, rng, p.elastic_alpha, p.elastic_sigma);
  return pair;
}

}  // namespace neurocount::augment
