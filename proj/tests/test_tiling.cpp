#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "neurocount/tiling.hpp"
#include "test_util.hpp"

using namespace neurocount;

TEST(Grid, CeilingArithmetic) {
  auto g = make_grid({1024, 1024}, 512);
  EXPECT_EQ(g.cols, 2);
  EXPECT_EQ(g.rows, 2);
  EXPECT_EQ(g.padded, (Extent{1024, 1024}));
  g = make_grid({513, 512}, 512);
  EXPECT_EQ(g.padded, (Extent{1024, 512}));
  EXPECT_EQ(g.cols, 2);
  EXPECT_EQ(g.rows, 1);
  g = make_grid({1, 1}, 512);
  EXPECT_EQ(g.padded, (Extent{512, 512}));
  EXPECT_EQ(g.tile_count(), 1u);
  EXPECT_THROW(make_grid({4, 4}, 0), Error);
}

TEST(Pad, ZerosRightAndBottomOnly) {
  std::mt19937_64 rng(1);
  const auto s = testutil::random_slide(5, 3, rng);
  const auto [padded, grid] = pad_to_grid(s, 4);
  EXPECT_EQ(padded.extent(), (Extent{8, 4}));
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 8; ++x) {
      for (int c = 0; c < 3; ++c) {
        if (x < 5 && y < 3) ASSERT_EQ(padded(x, y, c), s(x, y, c));
        else ASSERT_EQ(padded(x, y, c), 0);
      }
    }
  }
}

TEST(Split, RowMajorOrder) {
  const auto [padded, grid] = pad_to_grid(BinaryMask(1024, 1024), 512);
  const auto tiles = split(padded, grid);
  ASSERT_EQ(tiles.size(), 4u);
  const std::pair<int, int> expected[] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(tiles[i].col, expected[i].first);
    EXPECT_EQ(tiles[i].row, expected[i].second);
    EXPECT_EQ(tiles[i].pixels.width(), 512);
  }
}

TEST(Split, ConstantImageGivesConstantTiles) {
  const auto [padded, grid] = pad_to_grid(BinaryMask(64, 64, 1), 16);
  for (const auto& t : split(padded, grid)) {
    EXPECT_TRUE(std::all_of(t.pixels.data().begin(), t.pixels.data().end(), [](auto v) { return v == 1; }));
  }
}

TEST(Split, PixelMultisetPreserved) {
  std::mt19937_64 rng(2);
  const auto s = testutil::random_slide(70, 45, rng);
  const auto [padded, grid] = pad_to_grid(s, 32);
  std::vector<int> a(padded.data().begin(), padded.data().end()), b;
  for (const auto& t : split(padded, grid)) b.insert(b.end(), t.pixels.data().begin(), t.pixels.data().end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(Split, ExtentMismatch) {
  const auto grid = make_grid({10, 10}, 8);
  try {
    split(BinaryMask(10, 10), grid);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ExtentMismatch);
  }
}

TEST(Stitch, RoundTripOverRandomExtents) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> dim(1, 1300);
  for (int i = 0; i < 20; ++i) {
    const auto s = testutil::random_slide(dim(rng), dim(rng), rng);
    for (int t : {64, 512}) {
      const auto [padded, grid] = pad_to_grid(s, t);
      EXPECT_EQ(stitch(split(padded, grid), grid), s);
    }
  }
}

TEST(Stitch, PadRegionDropped) {
  const auto grid = make_grid({600, 600}, 512);
  std::vector<Tile<BinaryMask>> tiles;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) tiles.push_back({c, r, BinaryMask(512, 512, 1)});
  const auto out = stitch(tiles, grid);
  EXPECT_EQ(out, BinaryMask(600, 600, 1));
}

TEST(Stitch, OrderIndependent) {
  std::mt19937_64 rng(6);
  const auto s = testutil::random_slide(100, 70, rng);
  const auto [padded, grid] = pad_to_grid(s, 32);
  auto tiles = split(padded, grid);
  const auto ordered = stitch(tiles, grid);
  std::shuffle(tiles.begin(), tiles.end(), rng);
  EXPECT_EQ(stitch(tiles, grid), ordered);
}

TEST(Stitch, MissingAndDuplicateTiles) {
  const auto [padded, grid] = pad_to_grid(BinaryMask(20, 20), 8);
  auto tiles = split(padded, grid);
  auto code_of = [&](const std::vector<Tile<BinaryMask>>& ts) {
    try {
      stitch(ts, grid);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  auto missing = tiles;
  missing.pop_back();
  EXPECT_EQ(code_of(missing), ErrorCode::MissingTile);
  auto duplicate = tiles;
  duplicate.back() = duplicate.front();
  EXPECT_EQ(code_of(duplicate), ErrorCode::DuplicateTile);
}
