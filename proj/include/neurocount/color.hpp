#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "neurocount/image.hpp"

namespace neurocount {

enum class GrayRule {
  Mean,      // (R+G+B)/3, the ImageJ default
  Weighted,  // 0.299 R + 0.587 G + 0.114 B
};

inline GrayRule parse_gray_rule(std::string_view name) {
  if (name == "mean") return GrayRule::Mean;
  if (name == "weighted") return GrayRule::Weighted;
  throw Error(ErrorCode::InvalidArgument, "unknown grayscale rule: " + std::string(name));
}

inline std::string_view to_string(GrayRule rule) {
  return rule == GrayRule::Mean ? "mean" : "weighted";
}

inline std::uint8_t gray_value(std::uint8_t r, std::uint8_t g, std::uint8_t b,
                               GrayRule rule = GrayRule::Mean) noexcept {
  if (rule == GrayRule::Mean) {
    // sum = 3q + rem; rem 2 rounds up, rem 1 rounds down, never a tie.
    const unsigned sum = unsigned{r} + g + b;
    return static_cast<std::uint8_t>((sum + 1) / 3);
  }
  const double v = 0.299 * r + 0.587 * g + 0.114 * b;
  return static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
}

inline GrayImage to_gray(const RgbSlide& slide, GrayRule rule = GrayRule::Mean) {
  GrayImage out(slide.width(), slide.height());
  auto src = slide.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = gray_value(src[3 * i], src[3 * i + 1], src[3 * i + 2], rule);
  }
  return out;
}

inline FloatImage normalize(const RgbSlide& slide) {
  FloatImage out(slide.width(), slide.height());
  auto src = slide.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = static_cast<float>(src[i]) / 255.0f;
  }
  return out;
}

/// Inverse of normalize, rounding to the nearest 8-bit level.
inline RgbSlide to_rgb8(const FloatImage& image, double resolution_um = kDefaultResolutionUm) {
  RgbSlide out(image.width(), image.height());
  out.resolution_um = resolution_um;
  auto src = image.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = static_cast<std::uint8_t>(std::lround(std::clamp(src[i], 0.0f, 1.0f) * 255.0f));
  }
  return out;
}

inline BinaryMask binarize(const LabelMask& mask) {
  BinaryMask out(mask.width(), mask.height());
  auto src = mask.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] != 0 ? 1 : 0;
  return out;
}

/// Old-to-new label pairs produced by canonicalization, sorted by old label.
using LabelMapping = std::vector<std::pair<std::uint16_t, std::uint16_t>>;

/// Compacts nonzero labels to {1..n} preserving their numeric order and
/// sets n_labels. Returns the mapping of every label present.
inline LabelMapping canonicalize(LabelMask& mask) {
  std::vector<std::uint16_t> remap(65536, 0);
  std::vector<bool> present(65536, false);
  for (auto v : mask.data()) present[v] = true;

  LabelMapping mapping;
  std::uint16_t next = 0;
  for (std::size_t v = 1; v < present.size(); ++v) {
    if (present[v]) {
      remap[v] = ++next;
      mapping.emplace_back(static_cast<std::uint16_t>(v), next);
    }
  }
  for (auto& v : mask.data()) v = remap[v];
  mask.n_labels = next;
  return mapping;
}

}  // namespace neurocount
