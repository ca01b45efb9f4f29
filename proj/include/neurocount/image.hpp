#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neurocount/error.hpp"

namespace neurocount {

/// Scanner resolution of the released slides (20x objective).
inline constexpr double kDefaultResolutionUm = 0.46;

struct Extent {
  int width = 0;
  int height = 0;
  friend bool operator==(const Extent&, const Extent&) = default;
};

/// Row-major interleaved pixel buffer. The tag keeps semantically different
/// images with the same pixel layout (gray vs. binary) from mixing.
template <typename Pixel, int Channels, typename Tag>
class Image {
 public:
  using pixel_type = Pixel;
  static constexpr int kChannels = Channels;

  Image() = default;
  Image(int width, int height, Pixel fill = Pixel{}) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw Error(ErrorCode::InvalidArgument, "image dimensions must be >= 1");
    }
    data_.assign(static_cast<std::size_t>(width) * height * Channels, fill);
  }
  Image(int width, int height, std::vector<Pixel> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1) {
      throw Error(ErrorCode::InvalidArgument, "image dimensions must be >= 1");
    }
    if (data_.size() != static_cast<std::size_t>(width) * height * Channels) {
      throw Error(ErrorCode::DimensionMismatch, "pixel buffer length does not match extent");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return Channels; }
  Extent extent() const noexcept { return {width_, height_}; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const noexcept { return data_.empty(); }

  Pixel& operator()(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
  const Pixel& operator()(int x, int y, int c = 0) const noexcept { return data_[index(x, y, c)]; }

  std::span<Pixel> data() noexcept { return data_; }
  std::span<const Pixel> data() const noexcept { return data_; }

  std::span<Pixel> row(int y) noexcept {
    return std::span<Pixel>(data_).subspan(static_cast<std::size_t>(y) * width_ * Channels,
                                          static_cast<std::size_t>(width_) * Channels);
  }
  std::span<const Pixel> row(int y) const noexcept {
    return std::span<const Pixel>(data_).subspan(static_cast<std::size_t>(y) * width_ * Channels,
                                                static_cast<std::size_t>(width_) * Channels);
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * Channels + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Pixel> data_;
};

struct RgbTag {};
struct GrayTag {};
struct LabelTag {};
struct BinaryTag {};
struct FloatTag {};
struct ProbabilityTag {};

/// 8-bit RGB slide with physical pixel size.
class RgbSlide : public Image<std::uint8_t, 3, RgbTag> {
 public:
  using Image::Image;
  double resolution_um = kDefaultResolutionUm;
};

using GrayImage = Image<std::uint8_t, 1, GrayTag>;

/// Foreground flags stored as 0/1 bytes.
using BinaryMask = Image<std::uint8_t, 1, BinaryTag>;

/// Normalized RGB image, every value in [0,1].
using FloatImage = Image<float, 3, FloatTag>;

/// Single-channel per-pixel foreground probability in [0,1].
using ProbabilityMap = Image<double, 1, ProbabilityTag>;

/// 16-bit instance labels, 0 = background.
class LabelMask : public Image<std::uint16_t, 1, LabelTag> {
 public:
  using Image::Image;
  std::uint32_t n_labels = 0;
};

template <typename A, typename B>
void require_same_extent(const A& a, const B& b, const std::string& what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::DimensionMismatch, what);
  }
}

inline std::size_t count_foreground(const BinaryMask& mask) {
  return static_cast<std::size_t>(
      std::count_if(mask.data().begin(), mask.data().end(), [](std::uint8_t v) { return v != 0; }));
}

}  // namespace neurocount
