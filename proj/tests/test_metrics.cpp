#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "neurocount/color.hpp"
#include "neurocount/metrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace neurocount;

namespace {

BinaryMask stripe(int w, int h, int x0, int x1) {
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = x0; x < x1; ++x) m(x, y) = 1;
  return m;
}

/// Random instance mask of up to `n` non-overlapping rectangles.
LabelMask random_instances(int n, std::mt19937_64& rng) {
  LabelMask m(24, 24);
  std::uniform_int_distribution<int> pos(0, 20), size(1, 8);
  std::uint16_t label = 0;
  for (int i = 0; i < n; ++i) {
    const int x0 = pos(rng), y0 = pos(rng), w = size(rng), h = size(rng);
    ++label;
    for (int y = y0; y < std::min(24, y0 + h); ++y)
      for (int x = x0; x < std::min(24, x0 + w); ++x) m(x, y) = label;
  }
  canonicalize(m);
  return m;
}

}  // namespace

TEST(Dice, Basics) {
  const auto a = stripe(10, 4, 0, 4);
  EXPECT_DOUBLE_EQ(dice(a, a), 1.0);
  EXPECT_DOUBLE_EQ(dice(a, stripe(10, 4, 5, 9)), 0.0);
  EXPECT_DOUBLE_EQ(dice(a, stripe(10, 4, 2, 6)), 0.5);
  EXPECT_DOUBLE_EQ(dice(BinaryMask(3, 3), BinaryMask(3, 3)), 1.0);
  EXPECT_THROW(dice(BinaryMask(3, 3), BinaryMask(3, 4)), Error);
}

TEST(Dice, Symmetric) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto a = oracle::random_mask(30, 20, 0.3, rng), b = oracle::random_mask(30, 20, 0.5, rng);
    EXPECT_DOUBLE_EQ(dice(a, b), dice(b, a));
  }
}

TEST(DiceLoss, HardPredictions) {
  const auto g = stripe(10, 4, 0, 4);
  ProbabilityMap p(10, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 10; ++x) p(x, y) = g(x, y);
  EXPECT_LT(std::abs(dice_loss(p, g)), 1e-6);
  EXPECT_NEAR(dice_loss(ProbabilityMap(10, 4), g), 1.0, 1e-6);
  const auto other = stripe(10, 4, 2, 6);
  EXPECT_NEAR(dice_loss(p, other, 1e-12), 1.0 - dice(g, other), 1e-9);
}

TEST(DiceLoss, MatchesDirectSummation) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  ProbabilityMap p(17, 13);
  for (auto& v : p.data()) v = u(rng);
  const auto g = oracle::random_mask(17, 13, 0.4, rng);
  double pg = 0, sp = 0, sg = 0;
  for (int y = 0; y < 13; ++y)
    for (int x = 0; x < 17; ++x) {
      pg += p(x, y) * g(x, y);
      sp += p(x, y);
      sg += g(x, y);
    }
  EXPECT_NEAR(dice_loss(p, g), 1.0 - (2 * pg + 1e-7) / (sp + sg + 1e-7), 1e-12);
}

TEST(Match, IdentityAndSpuriousBlob) {
  std::mt19937_64 rng(3);
  const auto gt = random_instances(5, rng);
  const auto m = match_detections(gt, gt);
  EXPECT_EQ(m.tp, gt.n_labels);
  EXPECT_EQ(m.fp, 0u);
  EXPECT_EQ(m.fn, 0u);

  LabelMask pred = gt;
  LabelMask big(30, 30), big_pred(30, 30);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) big(x, y) = big_pred(x, y) = gt(x, y);
  big.n_labels = gt.n_labels;
  big_pred(28, 28) = static_cast<std::uint16_t>(gt.n_labels + 1);
  big_pred.n_labels = gt.n_labels + 1;
  const auto m2 = match_detections(big_pred, big);
  EXPECT_EQ(m2.fp, 1u);
  EXPECT_DOUBLE_EQ(precision_recall_f1(m2).precision,
                   static_cast<double>(gt.n_labels) / static_cast<double>(gt.n_labels + 1));
}

TEST(Match, EachLabelUsedOnce) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const auto m = match_detections(random_instances(6, rng), random_instances(6, rng), 0.1);
    std::set<std::uint32_t> p, g;
    for (const auto& pair : m.pairs) {
      EXPECT_TRUE(p.insert(pair.pred_label).second);
      EXPECT_TRUE(g.insert(pair.gt_label).second);
      EXPECT_GE(pair.iou, 0.1);
    }
    EXPECT_EQ(m.tp, m.pairs.size());
  }
}

TEST(Match, EqualsExhaustiveOptimum) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> n(0, 6);
  for (int i = 0; i < 200; ++i) {
    const auto gt = random_instances(n(rng), rng);
    // Prediction: jittered copy of gt plus random extras.
    LabelMask pred(24, 24);
    std::uniform_int_distribution<int> shift(-1, 1);
    const int dx = shift(rng), dy = shift(rng);
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 24; ++x) {
        const int sx = x + dx, sy = y + dy;
        if (sx >= 0 && sy >= 0 && sx < 24 && sy < 24) pred(x, y) = gt(sx, sy);
      }
    canonicalize(pred);
    const auto m = match_detections(pred, gt);
    const auto best = oracle::brute_force_match(pred, gt, 0.5);
    ASSERT_EQ(static_cast<int>(m.tp), best.pairs);
    double sum = 0;
    for (const auto& p : m.pairs) sum += p.iou;
    EXPECT_NEAR(sum, best.iou_sum, 1e-12);
  }
}

TEST(Match, PermutationInvariant) {
  std::mt19937_64 rng(6);
  const auto gt = random_instances(6, rng), pred = random_instances(6, rng);
  const auto base = match_detections(pred, gt, 0.2);
  std::vector<std::uint16_t> perm(65536);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin() + 1, perm.begin() + 7, rng);
  auto permuted = gt;
  for (auto& v : permuted.data()) v = perm[v];
  const auto m = match_detections(pred, permuted, 0.2);
  EXPECT_EQ(m.tp, base.tp);
  EXPECT_EQ(m.fp, base.fp);
  EXPECT_EQ(m.fn, base.fn);
}

TEST(PRF, Values) {
  auto r = precision_recall_f1(10, 0, 0);
  EXPECT_DOUBLE_EQ(r.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.f1, 1.0);
  r = precision_recall_f1(1, 1, 1);
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.f1, 0.5);
  r = precision_recall_f1(0, 3, 2);
  EXPECT_DOUBLE_EQ(r.f1, 0.0);
  try {
    precision_recall_f1(0, 0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoDetectionsAndNoTruth);
  }
}

TEST(PRF, Monotone) {
  for (std::uint64_t k = 0; k < 10; ++k) {
    EXPECT_GE(precision_recall_f1(5, k, 2).precision, precision_recall_f1(5, k + 1, 2).precision);
    EXPECT_GE(precision_recall_f1(5, 2, k).recall, precision_recall_f1(5, 2, k + 1).recall);
  }
}

TEST(CountingError, Values) {
  EXPECT_DOUBLE_EQ(counting_error(100, 100), 0.0);
  EXPECT_NEAR(counting_error(91, 100), 9.0, 1e-12);
  EXPECT_NEAR(counting_error(121.66, 100), 21.66, 1e-10);
  try {
    counting_error(5, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroGroundTruth);
  }
}

TEST(Pearson, Values) {
  const std::vector<double> xs = {1, 2, 3, 4}, neg = {-2, -4, -6, -8};
  EXPECT_DOUBLE_EQ(pearson(xs, xs).r2, 1.0);
  EXPECT_DOUBLE_EQ(pearson(xs, neg).r, -1.0);
  EXPECT_DOUBLE_EQ(pearson(xs, neg).r2, 1.0);
  const std::vector<double> a = {1, 2, 3}, b = {1, 2, 4};
  // r = 3 / sqrt(2 * 14/3), r^2 = 27/28
  EXPECT_NEAR(pearson(a, b).r, 3.0 / std::sqrt(28.0 / 3.0), 1e-12);
  EXPECT_NEAR(pearson(a, b).r, 0.9819805060619655, 1e-12);
  EXPECT_NEAR(pearson(a, b).r2, 27.0 / 28.0, 1e-12);
}

TEST(Pearson, Errors) {
  const std::vector<double> c = {2, 2, 2}, x = {1, 2, 3}, one = {1};
  EXPECT_THROW(pearson(c, x), Error);
  EXPECT_THROW(pearson(one, one), Error);
  EXPECT_THROW(pearson(x, std::vector<double>{1, 2}), Error);
}

TEST(Pearson, AffineInvariance) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n;
  std::vector<double> xs(30), ys(30), scaled(30), flipped(30);
  for (int i = 0; i < 30; ++i) {
    xs[i] = n(rng);
    ys[i] = xs[i] + n(rng);
    scaled[i] = 3.5 * ys[i] + 10;
    flipped[i] = -2 * ys[i] + 1;
  }
  const double r = pearson(xs, ys).r;
  EXPECT_NEAR(pearson(xs, scaled).r, r, 1e-12);
  EXPECT_NEAR(pearson(xs, flipped).r, -r, 1e-12);
}

TEST(TTest, ShiftedSeries) {
  const std::vector<double> a = {1, 2, 3, 4, 5}, b = {11, 12, 13, 14, 15};
  const auto r = ttest_ind(a, b);
  // difference -10, pooled variance 2.5, se = sqrt(2.5 * 0.4) = 1
  EXPECT_NEAR(r.statistic, -10.0, 1e-10);
  EXPECT_DOUBLE_EQ(r.dof, 8.0);
  EXPECT_NEAR(r.p_value, 8.4881815276285e-06, 1e-15);
  const auto swapped = ttest_ind(b, a);
  EXPECT_NEAR(swapped.statistic, 10.0, 1e-10);
  EXPECT_NEAR(swapped.p_value, r.p_value, 1e-15);
}

TEST(TTest, IdenticalSeries) {
  const std::vector<double> a = {1, 4, 2, 8};
  const auto r = ttest_ind(a, a);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
  const std::vector<double> c = {3, 3, 3};
  EXPECT_EQ(ttest_ind(c, c).p_value, 1.0);
}

TEST(TTest, TableValue) {
  EXPECT_NEAR(t_two_sided_p(2.228, 10), 0.05, 5e-4);
  EXPECT_NEAR(t_two_sided_p(2.228, 10), 0.050011771817111327, 1e-12);
}

TEST(TTest, FrozenReferenceValues) {
  const std::vector<double> a = {1.2, 3.4, 2.2, 5.1, 4.4, 2.9}, b = {2.0, 5.5, 6.1, 4.8, 7.2};
  const auto pooled = ttest_ind(a, b);
  EXPECT_NEAR(pooled.statistic, -1.8856450273013503, 1e-12);
  EXPECT_NEAR(pooled.p_value, 0.09197373389254451, 1e-12);
  EXPECT_DOUBLE_EQ(pooled.dof, 9.0);
  const auto welch = ttest_ind(a, b, true);
  EXPECT_NEAR(welch.statistic, -1.828377959658167, 1e-12);
  EXPECT_NEAR(welch.p_value, 0.1089880640040675, 1e-12);
  EXPECT_NEAR(welch.dof, 7.207146311213623, 1e-10);
}
