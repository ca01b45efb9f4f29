#pragma once

// Slow, obviously-correct reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "neurocount/image.hpp"
#include "neurocount/ssl_kernel.hpp"

namespace oracle {

using neurocount::BinaryMask;
using neurocount::LabelMask;

/// Recursive flood fill; labels in raster order of first pixel.
inline std::vector<int> flood_fill(const BinaryMask& m, int connectivity) {
  const int w = m.width(), h = m.height();
  std::vector<int> lab(static_cast<std::size_t>(w) * h, 0);
  std::function<void(int, int, int)> fill = [&](int x, int y, int id) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    auto& l = lab[static_cast<std::size_t>(y) * w + x];
    if (m(x, y) == 0 || l != 0) return;
    l = id;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        if (connectivity == 4 && dx != 0 && dy != 0) continue;
        fill(x + dx, y + dy, id);
      }
    }
  };
  int next = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (m(x, y) != 0 && lab[static_cast<std::size_t>(y) * w + x] == 0) fill(x, y, ++next);
    }
  }
  return lab;
}

/// True when two label rasters induce the same partition (labels may differ
/// by a bijection; background must coincide).
template <typename A, typename B>
bool same_partition(const A& a, const B& b) {
  if (a.size() != b.size()) return false;
  std::map<std::int64_t, std::int64_t> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto x = static_cast<std::int64_t>(a[i]);
    const auto y = static_cast<std::int64_t>(b[i]);
    if ((x == 0) != (y == 0)) return false;
    if (x == 0) continue;
    auto [it1, new1] = ab.emplace(x, y);
    auto [it2, new2] = ba.emplace(y, x);
    if (it1->second != y || it2->second != x) return false;
  }
  return true;
}

inline BinaryMask random_mask(int w, int h, double density, std::mt19937_64& rng) {
  BinaryMask m(w, h);
  std::bernoulli_distribution on(density);
  for (auto& v : m.data()) v = on(rng) ? 1 : 0;
  return m;
}

/// Mask built from random rectangles and pixels, so components of all sizes
/// appear and some straddle tile seams.
inline BinaryMask blobby_mask(int w, int h, std::mt19937_64& rng) {
  BinaryMask m(w, h);
  std::uniform_int_distribution<int> px(0, w - 1), py(0, h - 1), sz(1, 40);
  const int blobs = (w * h) / 900 + 1;
  for (int i = 0; i < blobs; ++i) {
    const int x0 = px(rng), y0 = py(rng), bw = sz(rng), bh = sz(rng);
    for (int y = y0; y < std::min(h, y0 + bh); ++y) {
      for (int x = x0; x < std::min(w, x0 + bw); ++x) m(x, y) = 1;
    }
  }
  std::bernoulli_distribution speck(0.02);
  for (auto& v : m.data()) {
    if (speck(rng)) v = 1;
  }
  return m;
}

/// Maximum number of threshold-feasible one-to-one pairs between instance
/// masks, by exhaustive search over assignments of GT instances. Also
/// returns the largest IoU sum among maximum-cardinality assignments.
struct BruteMatch {
  int pairs = 0;
  double iou_sum = 0.0;
};

inline BruteMatch brute_force_match(const LabelMask& pred, const LabelMask& gt, double thr) {
  std::map<int, std::uint64_t> pa, ga;
  std::map<std::pair<int, int>, std::uint64_t> inter;
  for (std::size_t i = 0; i < pred.data().size(); ++i) {
    const int p = pred.data()[i], g = gt.data()[i];
    if (p) ++pa[p];
    if (g) ++ga[g];
    if (p && g) ++inter[{p, g}];
  }
  std::vector<int> gts, preds;
  for (auto& [g, _] : ga) gts.push_back(g);
  for (auto& [p, _] : pa) preds.push_back(p);
  auto iou = [&](int p, int g) {
    auto it = inter.find({p, g});
    if (it == inter.end()) return 0.0;
    return static_cast<double>(it->second) / static_cast<double>(pa[p] + ga[g] - it->second);
  };
  BruteMatch best;
  std::set<int> used;
  std::function<void(std::size_t, int, double)> go = [&](std::size_t i, int pairs, double sum) {
    if (i == gts.size()) {
      if (pairs > best.pairs || (pairs == best.pairs && sum > best.iou_sum)) best = {pairs, sum};
      return;
    }
    go(i + 1, pairs, sum);  // leave gts[i] unmatched
    for (int p : preds) {
      if (used.contains(p)) continue;
      const double v = iou(p, gts[i]);
      if (v < thr) continue;
      used.insert(p);
      go(i + 1, pairs + 1, sum + v);
      used.erase(p);
    }
  };
  go(0, 0, 0.0);
  return best;
}

/// Barlow Twins loss written out directly from its definition.
inline double bt_loss_direct(const neurocount::ssl::EmbeddingBatch& b, double lambda, double eps) {
  const std::size_t n = b.n(), d = b.d();
  auto standardize = [&](const neurocount::ssl::Matrix& z) {
    std::vector<std::vector<double>> a(d, std::vector<double>(n));
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0;
      for (std::size_t k = 0; k < n; ++k) mean += z(k, j);
      mean /= n;
      double var = 0;
      for (std::size_t k = 0; k < n; ++k) var += (z(k, j) - mean) * (z(k, j) - mean);
      const double s = std::sqrt(var / n) + eps;
      for (std::size_t k = 0; k < n; ++k) a[j][k] = (z(k, j) - mean) / s;
    }
    return a;
  };
  const auto a1 = standardize(b.z1), a2 = standardize(b.z2);
  double loss = 0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double c = 0;
      for (std::size_t k = 0; k < n; ++k) c += a1[i][k] * a2[j][k];
      c /= n;
      loss += i == j ? (1 - c) * (1 - c) : lambda * c * c;
    }
  }
  return loss;
}

/// Point-in-ellipse union test: which cells cover pixel (x, y).
template <typename Cells>
std::vector<int> covering(const Cells& cells, int x, int y) {
  std::vector<int> out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    const double dx = x - c.cx, dy = y - c.cy;
    const double u = (dx * std::cos(c.angle) + dy * std::sin(c.angle)) / c.rx;
    const double v = (-dx * std::sin(c.angle) + dy * std::cos(c.angle)) / c.ry;
    if (u * u + v * v <= 1.0) out.push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace oracle
