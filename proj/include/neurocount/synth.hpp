#pragma once

// Synthetic TH-stained slides with exactly known cells. Cells are hard-edged
// ellipses, brown on a light background. A chosen fraction of cells is placed
// overlapping one earlier cell (its partner); every other pair of cells keeps
// a gap of at least two pixels between bounding circles, so the merged
// components are exactly the connected groups of the partner relation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "neurocount/augment.hpp"
#include "neurocount/color.hpp"
#include "neurocount/image.hpp"
#include "neurocount/labeling.hpp"

namespace neurocount::synth {

struct SynthSpec {
  int width = 1024;
  int height = 1024;
  int n_cells = 50;
  double radius_min = 9.0;
  double radius_max = 12.0;
  double overlap_fraction = 0.0;  // fraction of cells placed touching another
  int intensity_min = 60;
  int intensity_max = 160;
  int background_intensity = 215;
  std::uint64_t seed = 0;
  double resolution_um = kDefaultResolutionUm;
};

struct SynthCell {
  double cx = 0.0, cy = 0.0;
  double rx = 0.0, ry = 0.0;
  double angle = 0.0;  // radians
  int fill = 0;        // gray level of the cell's pixels
  int partner = -1;    // index of the cell it was placed against, -1 if free
  int component = 0;   // merged component id, 1-based in cell order
  std::uint64_t visible_area = 0;

  /// Distance from the centre to the boundary along direction phi.
  double radius_towards(double phi) const noexcept {
    const double c = std::cos(phi - angle) / rx;
    const double s = std::sin(phi - angle) / ry;
    return 1.0 / std::sqrt(c * c + s * s);
  }
  bool contains(double x, double y) const noexcept {
    const double dx = x - cx;
    const double dy = y - cy;
    const double u = (dx * std::cos(angle) + dy * std::sin(angle)) / rx;
    const double v = (-dx * std::sin(angle) + dy * std::cos(angle)) / ry;
    return u * u + v * v <= 1.0;
  }
  double bounding_radius() const noexcept { return std::max(rx, ry); }
};

struct SynthTruth {
  std::uint64_t true_count = 0;
  std::uint64_t n_components = 0;
  std::vector<SynthCell> cells;
};

struct Synthetic {
  RgbSlide slide;
  LabelMask labels;  // cell i carries label i + 1; later cells win overlaps
  SynthTruth truth;
};

/// Brown tint with gray mean exactly `level`: (level + t, level, level - t).
inline std::array<std::uint8_t, 3> tinted(int level, int max_tint) {
  const int t = std::min({max_tint, level, 255 - level});
  return {static_cast<std::uint8_t>(level + t), static_cast<std::uint8_t>(level),
          static_cast<std::uint8_t>(level - t)};
}

inline constexpr double kTouchDistanceMin = 0.65;  // x (r_i + r_j) along the centre line
inline constexpr double kTouchDistanceMax = 0.85;
inline constexpr double kSeparationGap = 2.0;      // px between bounding circles

namespace detail {

class SpatialHash {
 public:
  explicit SpatialHash(double cell) : cell_(cell) {}

  void insert(int index, double x, double y) { buckets_[key(bx(x), by(y))].push_back(index); }

  template <typename Fn>
  bool any_near(double x, double y, Fn&& fn) const {
    const long long gx = bx(x), gy = by(y);
    for (long long j = gy - 1; j <= gy + 1; ++j) {
      for (long long i = gx - 1; i <= gx + 1; ++i) {
        auto it = buckets_.find(key(i, j));
        if (it == buckets_.end()) continue;
        for (int idx : it->second) {
          if (fn(idx)) return true;
        }
      }
    }
    return false;
  }

 private:
  long long bx(double x) const { return static_cast<long long>(std::floor(x / cell_)); }
  long long by(double y) const { return static_cast<long long>(std::floor(y / cell_)); }
  static std::uint64_t key(long long i, long long j) {
    return (static_cast<std::uint64_t>(i) << 32) ^ static_cast<std::uint32_t>(j);
  }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<int>> buckets_;
};

inline void validate(const SynthSpec& s) {
  if (s.width < 1 || s.height < 1) throw Error(ErrorCode::InvalidArgument, "extent must be >= 1");
  if (s.n_cells < 0 || static_cast<std::uint32_t>(s.n_cells) > kMaxLabels) {
    throw Error(ErrorCode::InvalidArgument, "n_cells must be in [0, 65535]");
  }
  if (!(s.radius_min > 0.0) || s.radius_max < s.radius_min) {
    throw Error(ErrorCode::InvalidArgument, "invalid radius range");
  }
  if (2.0 * (s.radius_max + 1.0) > std::min(s.width, s.height)) {
    throw Error(ErrorCode::InvalidArgument, "cells do not fit in the extent");
  }
  if (!(s.overlap_fraction >= 0.0 && s.overlap_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "overlap fraction must be in [0, 1)");
  }
  const bool levels_ok = 0 <= s.intensity_min && s.intensity_min <= s.intensity_max && s.intensity_max <= 255 &&
                         0 <= s.background_intensity && s.background_intensity <= 255;
  if (!levels_ok) throw Error(ErrorCode::InvalidArgument, "intensities must lie in [0, 255]");
}

}  // namespace detail

/// Places cells without rendering them.
inline std::vector<SynthCell> place_cells(const SynthSpec& spec) {
  detail::validate(spec);
  augment::Rng rng(spec.seed);
  const int n = spec.n_cells;
  const int n_touch = n == 0 ? 0 : std::min(n - 1, static_cast<int>(std::lround(spec.overlap_fraction * n)));
  const double margin = spec.radius_max + 1.0;
  detail::SpatialHash hash(2.0 * spec.radius_max + kSeparationGap + 1.0);

  std::vector<SynthCell> cells;
  cells.reserve(static_cast<std::size_t>(n));
  const long long budget = 10LL * std::max(n, 1);
  long long attempts = 0;

  auto separated = [&](const SynthCell& c, int except) {
    return !hash.any_near(c.cx, c.cy, [&](int j) {
      if (j == except) return false;
      const auto& o = cells[static_cast<std::size_t>(j)];
      return std::hypot(c.cx - o.cx, c.cy - o.cy) <= c.bounding_radius() + o.bounding_radius() + kSeparationGap;
    });
  };

  while (static_cast<int>(cells.size()) < n) {
    if (++attempts > budget) {
      throw Error(ErrorCode::PlacementFailure,
                  "placed " + std::to_string(cells.size()) + " of " + std::to_string(n) + " cells");
    }
    SynthCell c;
    c.rx = rng.uniform(spec.radius_min, spec.radius_max);
    c.ry = rng.uniform(spec.radius_min, spec.radius_max);
    c.angle = rng.uniform(0.0, std::numbers::pi);
    c.fill = rng.uniform_int(spec.intensity_min, spec.intensity_max);
    const bool touching = static_cast<int>(cells.size()) >= n - n_touch;
    if (!touching) {
      c.cx = rng.uniform(margin, spec.width - margin);
      c.cy = rng.uniform(margin, spec.height - margin);
      if (!separated(c, -1)) continue;
    } else {
      const int j = rng.uniform_int(0, static_cast<int>(cells.size()) - 1);
      const auto& p = cells[static_cast<std::size_t>(j)];
      const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double reach = c.radius_towards(phi + std::numbers::pi) + p.radius_towards(phi);
      const double d = rng.uniform(kTouchDistanceMin, kTouchDistanceMax) * reach;
      c.cx = p.cx + d * std::cos(phi);
      c.cy = p.cy + d * std::sin(phi);
      if (c.cx < margin || c.cy < margin || c.cx > spec.width - margin || c.cy > spec.height - margin) continue;
      // Neither centre may sit near the other ellipse, so both cells stay visible.
      if (d <= p.radius_towards(phi) + 1.5 || d <= c.radius_towards(phi + std::numbers::pi) + 1.5) continue;
      if (!separated(c, j)) continue;
      c.partner = j;
    }
    hash.insert(static_cast<int>(cells.size()), c.cx, c.cy);
    cells.push_back(c);
  }

  UnionFind uf(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].partner >= 0) uf.unite(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(cells[i].partner));
  }
  std::vector<int> component_of_root(cells.size(), 0);
  int next = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto& id = component_of_root[uf.find(static_cast<std::uint32_t>(i))];
    if (id == 0) id = ++next;
    cells[i].component = id;
  }
  return cells;
}

inline Synthetic generate(const SynthSpec& spec) {
  Synthetic out;
  out.truth.cells = place_cells(spec);
  auto& cells = out.truth.cells;
  out.truth.true_count = cells.size();
  for (const auto& c : cells) {
    out.truth.n_components = std::max<std::uint64_t>(out.truth.n_components, static_cast<std::uint64_t>(c.component));
  }

  out.slide = RgbSlide(spec.width, spec.height);
  out.slide.resolution_um = spec.resolution_um;
  const auto bg = tinted(spec.background_intensity, 10);
  auto px = out.slide.data();
  for (std::size_t i = 0; i < px.size(); i += 3) {
    px[i] = bg[0];
    px[i + 1] = bg[1];
    px[i + 2] = bg[2];
  }
  out.labels = LabelMask(spec.width, spec.height);
  out.labels.n_labels = static_cast<std::uint32_t>(cells.size());

  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    const auto color = tinted(c.fill, 35);
    const double r = c.bounding_radius();
    const int x0 = std::max(0, static_cast<int>(std::floor(c.cx - r)));
    const int x1 = std::min(spec.width - 1, static_cast<int>(std::ceil(c.cx + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(c.cy - r)));
    const int y1 = std::min(spec.height - 1, static_cast<int>(std::ceil(c.cy + r)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (!c.contains(x, y)) continue;
        out.labels(x, y) = static_cast<std::uint16_t>(i + 1);
        out.slide(x, y, 0) = color[0];
        out.slide(x, y, 1) = color[1];
        out.slide(x, y, 2) = color[2];
      }
    }
  }
  for (auto v : out.labels.data()) {
    if (v != 0) ++cells[v - 1].visible_area;
  }
  return out;
}

/// Union of all cell pixels: perfect foreground segmentation that cannot
/// separate touching cells.
inline BinaryMask derive_binary(const LabelMask& labels) { return binarize(labels); }

}  // namespace neurocount::synth
