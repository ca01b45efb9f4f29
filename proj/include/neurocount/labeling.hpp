#pragma once

// Connected-component labeling of binary masks.
//
// Two-pass union-find: the first raster pass assigns provisional labels and
// records equivalences between touching provisional labels, the second pass
// replaces every provisional label by its root and numbers roots in the order
// their first pixel is met in raster order. The tiled variant labels tiles
// independently, unites labels that touch across tile seams and then numbers
// the merged components by their first global raster position, which yields
// exactly the monolithic labeling.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string_view>
#include <vector>

#include "neurocount/image.hpp"
#include "neurocount/parallel.hpp"
#include "neurocount/tiling.hpp"

namespace neurocount {

enum class Connectivity { Four = 4, Eight = 8 };

inline Connectivity parse_connectivity(int n) {
  if (n == 4) return Connectivity::Four;
  if (n == 8) return Connectivity::Eight;
  throw Error(ErrorCode::InvalidArgument, "connectivity must be 4 or 8");
}

struct ComponentStats {
  std::uint32_t label = 0;
  std::uint64_t area = 0;
  double centroid_x = 0.0;
  double centroid_y = 0.0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive bounding box
};

struct Labeling {
  LabelMask labels;
  std::vector<ComponentStats> stats;  // stats[i].label == i + 1
};

inline constexpr std::uint32_t kMaxLabels = std::numeric_limits<std::uint16_t>::max();

class UnionFind {
 public:
  explicit UnionFind(std::size_t n = 0) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0u); }

  std::uint32_t make() {
    const auto id = static_cast<std::uint32_t>(parent_.size());
    parent_.push_back(id);
    return id;
  }

  std::uint32_t find(std::uint32_t x) noexcept {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  /// The smaller root survives.
  void unite(std::uint32_t a, std::uint32_t b) noexcept {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) parent_[b] = a;
    else parent_[a] = b;
  }

  std::size_t size() const noexcept { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
};

namespace detail {

/// Labels a w x h block whose rows are produced by `row(y)` (pointer to w
/// foreground flags). Writes dense labels 1..k, numbered by first pixel in
/// raster order, into `out`; `first_pixel[l-1]` receives the raster index of
/// label l's first pixel. Returns k.
template <typename RowFn>
std::uint32_t label_block(int w, int h, RowFn&& row, Connectivity conn, std::span<std::uint32_t> out,
                          std::vector<std::size_t>* first_pixel = nullptr) {
  UnionFind uf(1);  // 0 is background
  const bool eight = conn == Connectivity::Eight;
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* fg = row(y);
    std::uint32_t* cur = out.data() + static_cast<std::size_t>(y) * w;
    const std::uint32_t* up = y > 0 ? cur - w : nullptr;
    for (int x = 0; x < w; ++x) {
      if (fg[x] == 0) {
        cur[x] = 0;
        continue;
      }
      const std::uint32_t west = x > 0 ? cur[x - 1] : 0;
      const std::uint32_t north = up ? up[x] : 0;
      std::uint32_t l = 0;
      if (eight) {
        if (north != 0) {
          l = north;  // W, NW and NE all touch N
        } else {
          const std::uint32_t nw = (up && x > 0) ? up[x - 1] : 0;
          const std::uint32_t ne = (up && x + 1 < w) ? up[x + 1] : 0;
          l = west != 0 ? west : nw;
          if (ne != 0) {
            if (l == 0) l = ne;
            else if (l != ne) uf.unite(l, ne);
          }
        }
      } else {
        l = north;
        if (west != 0) {
          if (l == 0) l = west;
          else if (l != west) uf.unite(l, west);
        }
      }
      cur[x] = l != 0 ? l : uf.make();
    }
  }

  std::vector<std::uint32_t> dense(uf.size(), 0);
  std::uint32_t k = 0;
  if (first_pixel) first_pixel->clear();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  for (std::size_t i = 0; i < n; ++i) {
    if (out[i] == 0) continue;
    const std::uint32_t root = uf.find(out[i]);
    if (dense[root] == 0) {
      dense[root] = ++k;
      if (first_pixel) first_pixel->push_back(i);
    }
    out[i] = dense[root];
  }
  return k;
}

inline LabelMask to_label_mask(int w, int h, std::span<const std::uint32_t> labels, std::uint32_t n) {
  if (n > kMaxLabels) {
    throw Error(ErrorCode::TooManyComponents,
                std::to_string(n) + " components exceed the 16-bit label range");
  }
  LabelMask mask(w, h);
  std::transform(labels.begin(), labels.end(), mask.data().begin(),
                 [](std::uint32_t v) { return static_cast<std::uint16_t>(v); });
  mask.n_labels = n;
  return mask;
}

}  // namespace detail

/// Per-label area, centroid and bounding box of a canonical label mask.
/// Row bands are accumulated in parallel and merged in band order; all sums
/// are integers, so the result does not depend on the worker count.
inline std::vector<ComponentStats> component_stats(const LabelMask& labels, unsigned workers = 1) {
  struct Acc {
    std::uint64_t area = 0, sum_x = 0, sum_y = 0;
    int x0 = std::numeric_limits<int>::max(), y0 = std::numeric_limits<int>::max();
    int x1 = -1, y1 = -1;
  };
  std::uint32_t n = labels.n_labels;
  for (auto v : labels.data()) n = std::max<std::uint32_t>(n, v);

  const int bands = std::max(1, std::min(labels.height(), static_cast<int>(resolve_workers(workers)) * 4));
  std::vector<std::vector<Acc>> partial(bands);
  parallel_for(static_cast<std::size_t>(bands), workers, [&](std::size_t b) {
    auto& acc = partial[b];
    acc.assign(n + 1, Acc{});
    const int ya = static_cast<int>(static_cast<long long>(labels.height()) * b / bands);
    const int yb = static_cast<int>(static_cast<long long>(labels.height()) * (b + 1) / bands);
    for (int y = ya; y < yb; ++y) {
      auto row = labels.row(y);
      for (int x = 0; x < labels.width(); ++x) {
        const auto l = row[x];
        if (l == 0) continue;
        auto& a = acc[l];
        ++a.area;
        a.sum_x += static_cast<std::uint64_t>(x);
        a.sum_y += static_cast<std::uint64_t>(y);
        a.x0 = std::min(a.x0, x);
        a.x1 = std::max(a.x1, x);
        a.y0 = std::min(a.y0, y);
        a.y1 = std::max(a.y1, y);
      }
    }
  });
  std::vector<Acc> total(n + 1);
  for (const auto& band : partial) {
    for (std::uint32_t l = 1; l <= n; ++l) {
      const auto& a = band[l];
      if (a.area == 0) continue;
      auto& t = total[l];
      t.area += a.area;
      t.sum_x += a.sum_x;
      t.sum_y += a.sum_y;
      t.x0 = std::min(t.x0, a.x0);
      t.x1 = std::max(t.x1, a.x1);
      t.y0 = std::min(t.y0, a.y0);
      t.y1 = std::max(t.y1, a.y1);
    }
  }
  std::vector<ComponentStats> stats;
  stats.reserve(n);
  for (std::uint32_t l = 1; l <= n; ++l) {
    const auto& t = total[l];
    if (t.area == 0) continue;
    ComponentStats s;
    s.label = l;
    s.area = t.area;
    s.centroid_x = static_cast<double>(t.sum_x) / static_cast<double>(t.area);
    s.centroid_y = static_cast<double>(t.sum_y) / static_cast<double>(t.area);
    s.x0 = t.x0;
    s.y0 = t.y0;
    s.x1 = t.x1;
    s.y1 = t.y1;
    stats.push_back(s);
  }
  return stats;
}

/// Number of connected components, without the 16-bit label limit.
inline std::uint32_t count_components(const BinaryMask& mask, Connectivity conn = Connectivity::Eight) {
  std::vector<std::uint32_t> buffer(mask.pixel_count());
  return detail::label_block(
      mask.width(), mask.height(), [&](int y) { return mask.row(y).data(); }, conn, buffer);
}

inline Labeling label_components(const BinaryMask& mask, Connectivity conn = Connectivity::Eight) {
  std::vector<std::uint32_t> buffer(mask.pixel_count());
  const std::uint32_t n = detail::label_block(
      mask.width(), mask.height(), [&](int y) { return mask.row(y).data(); }, conn, buffer);
  Labeling result;
  result.labels = detail::to_label_mask(mask.width(), mask.height(), buffer, n);
  result.stats = component_stats(result.labels);
  return result;
}

namespace detail {

/// Tiled labeling core. `tile_row(col, row, y)` returns a pointer to the
/// foreground flags of local row y of a tile, valid for the tile's width
/// clipped to the original extent. Pixels beyond the original extent are
/// background.
template <typename TileRowFn>
LabelMask label_tiled(const TileGrid& grid, TileRowFn&& tile_row, Connectivity conn, unsigned workers) {
  const int t = grid.tile_size;
  const int width = grid.original.width;
  const int height = grid.original.height;
  const std::size_t n_tiles = grid.tile_count();
  auto tile_w = [&](int c) { return std::min(t, width - c * t); };
  auto tile_h = [&](int r) { return std::min(t, height - r * t); };

  std::vector<std::vector<std::uint32_t>> local(n_tiles);
  std::vector<std::vector<std::size_t>> first(n_tiles);
  std::vector<std::uint32_t> counts(n_tiles, 0);
  parallel_for(n_tiles, workers, [&](std::size_t i) {
    const int c = static_cast<int>(i % grid.cols);
    const int r = static_cast<int>(i / grid.cols);
    const int w = tile_w(c);
    const int h = tile_h(r);
    local[i].assign(static_cast<std::size_t>(w) * h, 0);
    counts[i] = label_block(
        w, h, [&](int y) { return tile_row(c, r, y); }, conn, local[i], &first[i]);
  });

  // Global ids: offset[i] + local label.
  std::vector<std::uint32_t> offset(n_tiles + 1, 0);
  for (std::size_t i = 0; i < n_tiles; ++i) {
    const std::uint64_t next = std::uint64_t{offset[i]} + counts[i];
    if (next >= std::numeric_limits<std::uint32_t>::max()) {
      throw Error(ErrorCode::TooManyComponents, "provisional component count overflow");
    }
    offset[i + 1] = static_cast<std::uint32_t>(next);
  }
  const std::uint32_t total = offset[n_tiles];

  auto global_id = [&](int gx, int gy) -> std::uint32_t {
    if (gx < 0 || gy < 0 || gx >= width || gy >= height) return 0;
    const int c = gx / t;
    const int r = gy / t;
    const std::size_t i = grid.index_of(c, r);
    const std::uint32_t l = local[i][static_cast<std::size_t>(gy - r * t) * tile_w(c) + (gx - c * t)];
    return l == 0 ? 0 : offset[i] + l;
  };

  // Seam merge: each cross-tile adjacency has one end on the left column or
  // top row of its tile with the other end in the preceding column or row.
  UnionFind uf(std::size_t{total} + 1);
  const bool eight = conn == Connectivity::Eight;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const int x0 = c * t;
      const int y0 = r * t;
      if (c > 0) {
        for (int gy = y0; gy < y0 + tile_h(r); ++gy) {
          const std::uint32_t p = global_id(x0, gy);
          if (p == 0) continue;
          for (int dy = eight ? -1 : 0; dy <= (eight ? 1 : 0); ++dy) {
            const std::uint32_t q = global_id(x0 - 1, gy + dy);
            if (q != 0) uf.unite(p, q);
          }
        }
      }
      if (r > 0) {
        for (int gx = x0; gx < x0 + tile_w(c); ++gx) {
          const std::uint32_t p = global_id(gx, y0);
          if (p == 0) continue;
          for (int dx = eight ? -1 : 0; dx <= (eight ? 1 : 0); ++dx) {
            const std::uint32_t q = global_id(gx + dx, y0 - 1);
            if (q != 0) uf.unite(p, q);
          }
        }
      }
    }
  }

  // Number merged components by their first pixel in global raster order.
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> root_first(std::size_t{total} + 1, kNone);
  for (std::size_t i = 0; i < n_tiles; ++i) {
    const int c = static_cast<int>(i % grid.cols);
    const int r = static_cast<int>(i / grid.cols);
    const int w = tile_w(c);
    for (std::uint32_t l = 1; l <= counts[i]; ++l) {
      const std::size_t p = first[i][l - 1];
      const std::size_t gpos = static_cast<std::size_t>(r * t + static_cast<int>(p / w)) * width +
                               static_cast<std::size_t>(c * t + static_cast<int>(p % w));
      auto& f = root_first[uf.find(offset[i] + l)];
      f = std::min(f, gpos);
    }
  }
  std::vector<std::pair<std::size_t, std::uint32_t>> roots;
  for (std::uint32_t g = 1; g <= total; ++g) {
    if (root_first[g] != kNone) roots.emplace_back(root_first[g], g);
  }
  std::sort(roots.begin(), roots.end());
  const auto n = static_cast<std::uint32_t>(roots.size());
  if (n > kMaxLabels) {
    throw Error(ErrorCode::TooManyComponents,
                std::to_string(n) + " components exceed the 16-bit label range");
  }
  std::vector<std::uint16_t> final_of_root(std::size_t{total} + 1, 0);
  for (std::uint32_t k = 0; k < n; ++k) final_of_root[roots[k].second] = static_cast<std::uint16_t>(k + 1);
  std::vector<std::uint16_t> final_of(std::size_t{total} + 1, 0);
  for (std::uint32_t g = 1; g <= total; ++g) final_of[g] = final_of_root[uf.find(g)];

  LabelMask out(width, height);
  out.n_labels = n;
  parallel_for(n_tiles, workers, [&](std::size_t i) {
    const int c = static_cast<int>(i % grid.cols);
    const int r = static_cast<int>(i / grid.cols);
    const int w = tile_w(c);
    const int h = tile_h(r);
    for (int y = 0; y < h; ++y) {
      auto dst = out.row(r * t + y).subspan(static_cast<std::size_t>(c) * t, w);
      const std::uint32_t* src = local[i].data() + static_cast<std::size_t>(y) * w;
      for (int x = 0; x < w; ++x) dst[x] = src[x] == 0 ? 0 : final_of[offset[i] + src[x]];
    }
    std::vector<std::uint32_t>().swap(local[i]);
  });
  return out;
}

}  // namespace detail

/// Labels a mask given as tiles of a grid; equal to label_components on the
/// stitched mask. Foreground in the padding region is ignored.
inline Labeling label_components_tiled(std::span<const Tile<BinaryMask>> tiles, const TileGrid& grid,
                                       Connectivity conn = Connectivity::Eight, unsigned workers = 1) {
  const auto slots = index_tiles(tiles, grid);
  Labeling result;
  result.labels = detail::label_tiled(
      grid,
      [&](int c, int r, int y) { return slots[grid.index_of(c, r)]->pixels.row(y).data(); },
      conn, workers);
  result.stats = component_stats(result.labels, workers);
  return result;
}

inline Labeling label_components_tiled(const std::vector<Tile<BinaryMask>>& tiles, const TileGrid& grid,
                                       Connectivity conn = Connectivity::Eight, unsigned workers = 1) {
  return label_components_tiled(std::span<const Tile<BinaryMask>>(tiles), grid, conn, workers);
}

/// Tiled labeling reading tiles straight out of a full mask, without copies.
inline Labeling label_components_tiled(const BinaryMask& mask, int tile_size,
                                       Connectivity conn = Connectivity::Eight, unsigned workers = 1) {
  const TileGrid grid = make_grid(mask.extent(), tile_size);
  Labeling result;
  result.labels = detail::label_tiled(
      grid,
      [&](int c, int r, int y) {
        return mask.row(r * grid.tile_size + y).data() + static_cast<std::size_t>(c) * grid.tile_size;
      },
      conn, workers);
  result.stats = component_stats(result.labels, workers);
  return result;
}

}  // namespace neurocount
