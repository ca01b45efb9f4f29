#include <gtest/gtest.h>

#include <random>

#include "neurocount/color.hpp"
#include "neurocount/labeling.hpp"
#include "neurocount/tiling.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace neurocount;

TEST(Label, EmptyMask) {
  const auto r = label_components(BinaryMask(10, 10));
  EXPECT_EQ(r.labels.n_labels, 0u);
  EXPECT_TRUE(r.stats.empty());
}

TEST(Label, SinglePixel) {
  BinaryMask m(10, 10);
  m(5, 5) = 1;
  const auto r = label_components(m);
  ASSERT_EQ(r.stats.size(), 1u);
  EXPECT_EQ(r.stats[0].area, 1u);
  EXPECT_DOUBLE_EQ(r.stats[0].centroid_x, 5.0);
  EXPECT_DOUBLE_EQ(r.stats[0].centroid_y, 5.0);
}

TEST(Label, DiagonalPixelsDependOnConnectivity) {
  BinaryMask m(2, 2);
  m(0, 0) = m(1, 1) = 1;
  EXPECT_EQ(label_components(m, Connectivity::Eight).stats.size(), 1u);
  EXPECT_EQ(label_components(m, Connectivity::Four).stats.size(), 2u);
  EXPECT_THROW(parse_connectivity(6), Error);
}

TEST(Label, RasterOrderOfFirstPixel) {
  // A "U" whose right arm starts on the first row: the arm that appears
  // first in raster order must get label 1 even though it merges later.
  BinaryMask m(5, 4);
  m(0, 0) = m(4, 0) = 1;
  m(0, 1) = m(4, 1) = 1;
  for (int x = 0; x < 5; ++x) m(x, 2) = 1;
  m(2, 0) = 1;  // separate blob between the arms
  const auto r = label_components(m);
  EXPECT_EQ(r.labels(0, 0), 1);
  EXPECT_EQ(r.labels(4, 0), 1);
  EXPECT_EQ(r.labels(2, 0), 2);
}

TEST(Label, MatchesFloodFillBothConnectivities) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> density(0.05, 0.6);
  for (int i = 0; i < 200; ++i) {
    const auto m = oracle::random_mask(64, 64, density(rng), rng);
    for (int conn : {4, 8}) {
      const auto r = label_components(m, parse_connectivity(conn));
      const auto ref = oracle::flood_fill(m, conn);
      ASSERT_TRUE(oracle::same_partition(r.labels.data(), ref));
      // Labels come in raster order, so they coincide exactly with the oracle.
      for (std::size_t p = 0; p < ref.size(); ++p) ASSERT_EQ(r.labels.data()[p], ref[p]);
    }
  }
}

TEST(Label, TooManyComponents) {
  BinaryMask m(512, 512);
  for (int y = 0; y < 512; y += 2)
    for (int x = 0; x < 512; x += 2) m(x, y) = 1;  // 65536 isolated pixels
  try {
    label_components(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooManyComponents);
  }
  EXPECT_EQ(count_components(m), 65536u);
}

TEST(Stats, BlockAtOrigin) {
  LabelMask l(5, 5);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) l(x, y) = 1;
  l.n_labels = 1;
  const auto s = component_stats(l);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].area, 9u);
  EXPECT_DOUBLE_EQ(s[0].centroid_x, 1.0);
  EXPECT_DOUBLE_EQ(s[0].centroid_y, 1.0);
  EXPECT_EQ(s[0].x0, 0);
  EXPECT_EQ(s[0].y0, 0);
  EXPECT_EQ(s[0].x1, 2);
  EXPECT_EQ(s[0].y1, 2);
}

TEST(Stats, MatchAccumulatorOracleAndConserveArea) {
  std::mt19937_64 rng(8);
  auto l = testutil::random_labels(97, 61, 300, 0.5, rng);
  canonicalize(l);
  for (unsigned workers : {1u, 3u}) {
    const auto s = component_stats(l, workers);
    ASSERT_EQ(s.size(), l.n_labels);
    std::vector<double> sx(l.n_labels + 1), sy(l.n_labels + 1), n(l.n_labels + 1);
    std::vector<int> x0(l.n_labels + 1, 1 << 30), x1(l.n_labels + 1, -1);
    for (int y = 0; y < l.height(); ++y) {
      for (int x = 0; x < l.width(); ++x) {
        const int v = l(x, y);
        if (!v) continue;
        sx[v] += x;
        sy[v] += y;
        n[v] += 1;
        x0[v] = std::min(x0[v], x);
        x1[v] = std::max(x1[v], x);
      }
    }
    std::uint64_t total = 0;
    for (const auto& c : s) {
      EXPECT_EQ(static_cast<double>(c.area), n[c.label]);
      EXPECT_NEAR(c.centroid_x, sx[c.label] / n[c.label], 1e-9);
      EXPECT_NEAR(c.centroid_y, sy[c.label] / n[c.label], 1e-9);
      EXPECT_EQ(c.x0, x0[c.label]);
      EXPECT_EQ(c.x1, x1[c.label]);
      EXPECT_GE(c.centroid_x, c.x0);
      EXPECT_LE(c.centroid_x, c.x1);
      total += c.area;
    }
    EXPECT_EQ(total, count_foreground(binarize(l)));
  }
}

TEST(Tiled, CrossSpanningFourTilesMerges) {
  BinaryMask m(64, 64);
  for (int i = 10; i < 54; ++i) m(i, 32) = m(32, i) = 1;
  const auto r = label_components_tiled(m, 32, Connectivity::Eight, 2);
  EXPECT_EQ(r.stats.size(), 1u);
  EXPECT_EQ(r.labels, label_components(m).labels);
}

TEST(Tiled, DiagonalSeamContact) {
  BinaryMask m(8, 8);
  m(3, 3) = m(4, 4) = 1;  // touch only across the corner of four tiles
  EXPECT_EQ(label_components_tiled(m, 4, Connectivity::Eight, 1).stats.size(), 1u);
  EXPECT_EQ(label_components_tiled(m, 4, Connectivity::Four, 1).stats.size(), 2u);
}

TEST(Tiled, EqualsMonolithicOnRandomMasks) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> w(1, 300), h(1, 200);
  for (int i = 0; i < 30; ++i) {
    const auto m = i % 2 ? oracle::blobby_mask(w(rng), h(rng), rng) : oracle::random_mask(w(rng), h(rng), 0.4, rng);
    for (auto conn : {Connectivity::Four, Connectivity::Eight}) {
      const auto mono = label_components(m, conn);
      for (int t : {16, 64, 128}) {
        const auto tiled = label_components_tiled(m, t, conn, 3);
        ASSERT_EQ(tiled.labels, mono.labels);
        ASSERT_EQ(tiled.stats.size(), mono.stats.size());
        for (std::size_t k = 0; k < mono.stats.size(); ++k) {
          ASSERT_EQ(tiled.stats[k].area, mono.stats[k].area);
          ASSERT_EQ(tiled.stats[k].x0, mono.stats[k].x0);
          ASSERT_EQ(tiled.stats[k].y1, mono.stats[k].y1);
        }
      }
    }
  }
}

TEST(Tiled, TileSequenceInputMatchesViewPath) {
  std::mt19937_64 rng(10);
  const auto m = oracle::blobby_mask(150, 90, rng);
  const auto [padded, grid] = pad_to_grid(m, 64);
  auto tiles = split(padded, grid);
  std::shuffle(tiles.begin(), tiles.end(), rng);
  EXPECT_EQ(label_components_tiled(tiles, grid, Connectivity::Eight, 2).labels,
            label_components_tiled(m, 64, Connectivity::Eight, 1).labels);
}

TEST(Tiled, WorkerCountDoesNotChangeOutput) {
  std::mt19937_64 rng(12);
  const auto m = oracle::blobby_mask(400, 300, rng);
  const auto ref = label_components_tiled(m, 64, Connectivity::Eight, 1);
  for (unsigned w : {2u, 4u, 8u}) EXPECT_EQ(label_components_tiled(m, 64, Connectivity::Eight, w).labels, ref.labels);
}
