#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "neurocount/image.hpp"

namespace neurocount {

/// 2|A∩B| / (|A|+|B|); two empty masks agree perfectly (1.0).
inline double dice(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_extent(pred, gt, "dice: masks differ in size");
  std::uint64_t inter = 0, a = 0, b = 0;
  auto p = pred.data();
  auto g = gt.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool x = p[i] != 0;
    const bool y = g[i] != 0;
    a += x;
    b += y;
    inter += x && y;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

/// Soft Dice loss 1 - (2 Σ p g + eps) / (Σ p + Σ g + eps).
inline double dice_loss(const ProbabilityMap& pred, const BinaryMask& gt, double eps = 1e-7) {
  require_same_extent(pred, gt, "dice_loss: prediction and mask differ in size");
  double pg = 0.0, sp = 0.0, sg = 0.0;
  auto p = pred.data();
  auto g = gt.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = g[i] != 0 ? 1.0 : 0.0;
    pg += p[i] * gi;
    sp += p[i];
    sg += gi;
  }
  return 1.0 - (2.0 * pg + eps) / (sp + sg + eps);
}

struct MatchPair {
  std::uint32_t pred_label = 0;
  std::uint32_t gt_label = 0;
  double iou = 0.0;
};

struct DetectionMatch {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::vector<MatchPair> pairs;
};

/// Greedy one-to-one matching of predicted and GT instances in descending
/// IoU order, accepting pairs with IoU >= threshold.
inline DetectionMatch match_detections(const LabelMask& pred, const LabelMask& gt, double iou_threshold = 0.5) {
  require_same_extent(pred, gt, "match_detections: label masks differ in size");
  std::vector<std::uint64_t> pred_area(65536, 0), gt_area(65536, 0);
  std::unordered_map<std::uint32_t, std::uint64_t> inter;
  auto p = pred.data();
  auto g = gt.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    ++pred_area[p[i]];
    ++gt_area[g[i]];
    if (p[i] != 0 && g[i] != 0) ++inter[(std::uint32_t{p[i]} << 16) | g[i]];
  }
  std::uint64_t n_pred = 0, n_gt = 0;
  for (std::size_t l = 1; l < 65536; ++l) {
    n_pred += pred_area[l] != 0;
    n_gt += gt_area[l] != 0;
  }

  struct Candidate {
    double iou;
    std::uint64_t overlap;
    std::uint32_t pred, gt;
  };
  std::vector<Candidate> candidates;
  for (const auto& [key, overlap] : inter) {
    const std::uint32_t pl = key >> 16;
    const std::uint32_t gl = key & 0xffff;
    const double uni = static_cast<double>(pred_area[pl] + gt_area[gl] - overlap);
    const double iou = static_cast<double>(overlap) / uni;
    if (iou >= iou_threshold) candidates.push_back({iou, overlap, pl, gl});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.gt != b.gt) return a.gt < b.gt;
    return a.pred < b.pred;
  });

  DetectionMatch m;
  std::vector<bool> pred_used(65536, false), gt_used(65536, false);
  for (const auto& c : candidates) {
    if (pred_used[c.pred] || gt_used[c.gt]) continue;
    pred_used[c.pred] = gt_used[c.gt] = true;
    m.pairs.push_back({c.pred, c.gt, c.iou});
  }
  std::sort(m.pairs.begin(), m.pairs.end(),
            [](const MatchPair& a, const MatchPair& b) { return a.gt_label < b.gt_label; });
  m.tp = m.pairs.size();
  m.fp = n_pred - m.tp;
  m.fn = n_gt - m.tp;
  return m;
}

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline PrecisionRecall precision_recall_f1(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  if (tp + fp + fn == 0) {
    throw Error(ErrorCode::NoDetectionsAndNoTruth, "no detections and no ground-truth cells");
  }
  PrecisionRecall r;
  r.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  r.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  const double s = r.precision + r.recall;
  r.f1 = s == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / s;
  return r;
}

inline PrecisionRecall precision_recall_f1(const DetectionMatch& m) {
  return precision_recall_f1(m.tp, m.fp, m.fn);
}

/// 100 |pred - gt| / gt.
inline double counting_error(double pred_total, double gt_total) {
  if (!(gt_total >= 1.0)) throw Error(ErrorCode::ZeroGroundTruth, "ground-truth total must be >= 1");
  return 100.0 * std::abs(pred_total - gt_total) / gt_total;
}

struct Correlation {
  double r = 0.0;
  double r2 = 0.0;
};

/// Sample Pearson correlation, two-pass (means first).
inline Correlation pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::DimensionMismatch, "pearson: series differ in length");
  if (xs.size() < 2) throw Error(ErrorCode::DegenerateSeries, "pearson: need at least two points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::DegenerateSeries, "pearson: zero variance");
  Correlation c;
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  c.r2 = c.r * c.r;
  return c;
}

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Two-sided p-value of Student's t with `dof` degrees of freedom.
inline double t_two_sided_p(double t, double dof) {
  if (std::isinf(t)) return 0.0;
  return std::clamp(incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t)), 0.0, 1.0);
}

struct StatResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double dof = 0.0;
};

/// Independent two-sample t-test: pooled variance by default, Welch's
/// unequal-variance form when `welch` is set.
inline StatResult ttest_ind(std::span<const double> a, std::span<const double> b, bool welch = false) {
  if (a.size() < 2 || b.size() < 2) throw Error(ErrorCode::DegenerateSeries, "t-test needs >= 2 samples per group");
  auto moments = [](std::span<const double> s) {
    double m = 0.0;
    for (double v : s) m += v;
    m /= static_cast<double>(s.size());
    double ss = 0.0;
    for (double v : s) ss += (v - m) * (v - m);
    return std::pair{m, ss / static_cast<double>(s.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());

  StatResult r;
  double se2 = 0.0;
  if (welch) {
    const double qa = va / na;
    const double qb = vb / nb;
    se2 = qa + qb;
    r.dof = se2 > 0.0 ? se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0)) : na + nb - 2.0;
  } else {
    const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
    se2 = pooled * (1.0 / na + 1.0 / nb);
    r.dof = na + nb - 2.0;
  }
  const double diff = ma - mb;
  if (se2 == 0.0) {
    r.statistic = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    r.p_value = diff == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.statistic = diff / std::sqrt(se2);
  r.p_value = t_two_sided_p(r.statistic, r.dof);
  return r;
}

}  // namespace neurocount
