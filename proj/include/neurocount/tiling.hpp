#pragma once

#include <algorithm>
#include <span>
#include <utility>
#include <vector>

#include "neurocount/image.hpp"

namespace neurocount {

inline constexpr int kDefaultTileSize = 512;

struct TileGrid {
  int tile_size = kDefaultTileSize;
  int cols = 0;
  int rows = 0;
  Extent original;
  Extent padded;

  std::size_t tile_count() const noexcept { return static_cast<std::size_t>(cols) * rows; }
  std::size_t index_of(int col, int row) const noexcept {
    return static_cast<std::size_t>(row) * cols + col;
  }
  friend bool operator==(const TileGrid&, const TileGrid&) = default;
};

inline TileGrid make_grid(Extent original, int tile_size = kDefaultTileSize) {
  if (tile_size < 1) throw Error(ErrorCode::InvalidArgument, "tile size must be >= 1");
  if (original.width < 1 || original.height < 1) {
    throw Error(ErrorCode::InvalidArgument, "image extent must be >= 1");
  }
  TileGrid grid;
  grid.tile_size = tile_size;
  grid.cols = (original.width + tile_size - 1) / tile_size;
  grid.rows = (original.height + tile_size - 1) / tile_size;
  grid.original = original;
  grid.padded = {grid.cols * tile_size, grid.rows * tile_size};
  return grid;
}

template <typename ImageT>
struct Tile {
  int col = 0;
  int row = 0;
  ImageT pixels;
};

namespace detail {

template <typename ImageT>
void copy_metadata(ImageT& dst, const ImageT& src) {
  if constexpr (requires { dst.resolution_um; }) dst.resolution_um = src.resolution_um;
}

/// Copies the w x h block at (sx, sy) of src to (dx, dy) of dst.
template <typename ImageT>
void copy_block(const ImageT& src, int sx, int sy, ImageT& dst, int dx, int dy, int w, int h) {
  constexpr int c = ImageT::kChannels;
  for (int y = 0; y < h; ++y) {
    auto from = src.row(sy + y).subspan(static_cast<std::size_t>(sx) * c, static_cast<std::size_t>(w) * c);
    auto to = dst.row(dy + y).subspan(static_cast<std::size_t>(dx) * c);
    std::copy(from.begin(), from.end(), to.begin());
  }
}

}  // namespace detail

/// Appends zeros on the right and bottom so both sides are multiples of tile_size.
template <typename ImageT>
std::pair<ImageT, TileGrid> pad_to_grid(const ImageT& image, int tile_size = kDefaultTileSize) {
  const TileGrid grid = make_grid(image.extent(), tile_size);
  if (grid.padded == grid.original) return {image, grid};
  ImageT padded(grid.padded.width, grid.padded.height);
  detail::copy_metadata(padded, image);
  detail::copy_block(image, 0, 0, padded, 0, 0, image.width(), image.height());
  return {std::move(padded), grid};
}

/// One tile of `image` (padded or not); pixels beyond the image read as zero.
template <typename ImageT>
ImageT extract_tile(const ImageT& image, const TileGrid& grid, int col, int row) {
  const int t = grid.tile_size;
  ImageT tile(t, t);
  detail::copy_metadata(tile, image);
  const int x0 = col * t;
  const int y0 = row * t;
  const int w = std::clamp(image.width() - x0, 0, t);
  const int h = std::clamp(image.height() - y0, 0, t);
  if (w > 0 && h > 0) detail::copy_block(image, x0, y0, tile, 0, 0, w, h);
  return tile;
}

/// Row-major sequence of non-overlapping tiles covering the padded extent.
template <typename ImageT>
std::vector<Tile<ImageT>> split(const ImageT& padded, const TileGrid& grid) {
  if (padded.extent() != grid.padded) {
    throw Error(ErrorCode::ExtentMismatch, "image extent differs from the grid's padded extent");
  }
  std::vector<Tile<ImageT>> tiles;
  tiles.reserve(grid.tile_count());
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      tiles.push_back({c, r, extract_tile(padded, grid, c, r)});
    }
  }
  return tiles;
}

/// Checks that tiles cover every grid position exactly once with the grid's
/// tile size, returning the tile index of each grid slot.
template <typename ImageT>
std::vector<const Tile<ImageT>*> index_tiles(std::span<const Tile<ImageT>> tiles, const TileGrid& grid) {
  std::vector<const Tile<ImageT>*> slots(grid.tile_count(), nullptr);
  for (const auto& tile : tiles) {
    if (tile.col < 0 || tile.row < 0 || tile.col >= grid.cols || tile.row >= grid.rows) {
      throw Error(ErrorCode::ExtentMismatch, "tile position outside the grid");
    }
    if (tile.pixels.width() != grid.tile_size || tile.pixels.height() != grid.tile_size) {
      throw Error(ErrorCode::ExtentMismatch, "tile dimensions differ from the grid tile size");
    }
    auto& slot = slots[grid.index_of(tile.col, tile.row)];
    if (slot != nullptr) throw Error(ErrorCode::DuplicateTile, "grid position covered twice");
    slot = &tile;
  }
  for (const auto* slot : slots) {
    if (slot == nullptr) throw Error(ErrorCode::MissingTile, "grid position not covered");
  }
  return slots;
}

/// Reassembles tiles in any order and crops to the original extent.
template <typename ImageT>
ImageT stitch(std::span<const Tile<ImageT>> tiles, const TileGrid& grid) {
  const auto slots = index_tiles(tiles, grid);
  ImageT out(grid.original.width, grid.original.height);
  detail::copy_metadata(out, slots.front()->pixels);
  const int t = grid.tile_size;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const int w = std::min(t, grid.original.width - c * t);
      const int h = std::min(t, grid.original.height - r * t);
      detail::copy_block(slots[grid.index_of(c, r)]->pixels, 0, 0, out, c * t, r * t, w, h);
    }
  }
  return out;
}

template <typename ImageT>
ImageT stitch(const std::vector<Tile<ImageT>>& tiles, const TileGrid& grid) {
  return stitch(std::span<const Tile<ImageT>>(tiles), grid);
}

}  // namespace neurocount
