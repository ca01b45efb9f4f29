#pragma once

// Cell counting from segmentation masks and per-cell TH intensity.
//
// Counting: components smaller than the smallest ground-truth cell are
// dropped as noise; every remaining component is credited with
// max(1, round(area / average cell area)) cells, so merged blobs of touching
// soma count as several cells. Intensity: each kept cell's mean grayscale
// value (lower = darker = stronger TH stain), grouped into k bins.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neurocount/color.hpp"
#include "neurocount/image.hpp"
#include "neurocount/labeling.hpp"
#include "neurocount/parallel.hpp"

namespace neurocount {

struct Calibration {
  std::uint64_t min_area = 0;  // pixels
  double avg_area = 0.0;       // pixels
  std::uint64_t n_cells = 0;
  std::vector<std::string> source_ids;
  std::string dataset_hash;  // FNV-1a over the source label rasters
  std::string created_at;    // provenance only, never used in computation
};

struct CalibrateOptions {
  /// 0 keeps the literal minimum; p > 0 uses the p-th percentile
  /// (nearest rank) of GT cell areas as the noise floor.
  double min_area_percentile = 0.0;
};

namespace detail {

inline std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) noexcept {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

/// Pixel count of every nonzero label value present in the mask.
inline std::vector<std::uint64_t> label_areas(const LabelMask& mask) {
  std::vector<std::uint64_t> counts(65536, 0);
  for (auto v : mask.data()) ++counts[v];
  std::vector<std::uint64_t> areas;
  for (std::size_t v = 1; v < counts.size(); ++v) {
    if (counts[v] != 0) areas.push_back(counts[v]);
  }
  return areas;
}

}  // namespace detail

/// Learns the minimum and average cell area from ground-truth label masks.
/// Each distinct nonzero label is one cell.
inline Calibration calibrate(std::span<const LabelMask> gt_masks, std::vector<std::string> source_ids = {},
                             const CalibrateOptions& options = {}) {
  std::vector<std::uint64_t> areas;
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (const auto& mask : gt_masks) {
    auto a = detail::label_areas(mask);
    areas.insert(areas.end(), a.begin(), a.end());
    const std::int32_t dims[2] = {mask.width(), mask.height()};
    hash = detail::fnv1a(hash, dims, sizeof dims);
    hash = detail::fnv1a(hash, mask.data().data(), mask.data().size_bytes());
  }
  if (areas.empty()) throw Error(ErrorCode::EmptyGroundTruth, "no labeled cells in the ground truth");

  Calibration calib;
  calib.n_cells = areas.size();
  const std::uint64_t sum = std::accumulate(areas.begin(), areas.end(), std::uint64_t{0});
  calib.avg_area = static_cast<double>(sum) / static_cast<double>(areas.size());
  if (options.min_area_percentile > 0.0) {
    std::sort(areas.begin(), areas.end());
    const double p = std::clamp(options.min_area_percentile, 0.0, 100.0);
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(areas.size())));
    calib.min_area = areas[std::clamp<std::size_t>(rank, 1, areas.size()) - 1];
  } else {
    calib.min_area = *std::min_element(areas.begin(), areas.end());
  }
  calib.source_ids = std::move(source_ids);
  calib.dataset_hash = detail::hex64(hash);
  return calib;
}

inline Calibration calibrate(const std::vector<LabelMask>& gt_masks, std::vector<std::string> source_ids = {},
                             const CalibrateOptions& options = {}) {
  return calibrate(std::span<const LabelMask>(gt_masks), std::move(source_ids), options);
}

struct ComponentCount {
  std::uint32_t label = 0;
  std::uint64_t area = 0;
  std::uint64_t cells_assigned = 0;
};

struct CountReport {
  std::uint64_t n_components_raw = 0;
  std::uint64_t n_filtered_small = 0;
  std::uint64_t n_components_kept = 0;
  std::uint64_t estimated_cell_count = 0;
  std::vector<ComponentCount> per_component;  // kept components only
};

/// Cells credited to one kept component; rounding is half away from zero.
inline std::uint64_t cells_in_component(std::uint64_t area, double avg_area) {
  const double ratio = static_cast<double>(area) / avg_area;
  return static_cast<std::uint64_t>(std::max<long long>(1, std::llround(ratio)));
}

inline CountReport count_from_stats(std::span<const ComponentStats> components, const Calibration& calib) {
  CountReport report;
  report.n_components_raw = components.size();
  for (const auto& c : components) {
    if (c.area < calib.min_area) {
      ++report.n_filtered_small;
      continue;
    }
    const std::uint64_t cells = cells_in_component(c.area, calib.avg_area);
    report.per_component.push_back({c.label, c.area, cells});
    report.estimated_cell_count += cells;
  }
  report.n_components_kept = report.per_component.size();
  return report;
}

inline CountReport count_cells(const BinaryMask& mask, const Calibration& calib,
                               Connectivity conn = Connectivity::Eight) {
  const auto labeling = label_components(mask, conn);
  return count_from_stats(labeling.stats, calib);
}

/// Instance-labeled input: every label value is one component.
inline CountReport count_cells(const LabelMask& mask, const Calibration& calib) {
  return count_from_stats(component_stats(mask), calib);
}

/// Connected components as the cell count, no filtering or division.
inline std::uint64_t count_naive(const BinaryMask& mask, Connectivity conn = Connectivity::Eight) {
  return count_components(mask, conn);
}

struct CellRecord {
  std::uint32_t cell_id = 0;
  std::uint32_t component_label = 0;
  std::uint64_t area_px = 0;
  double area_um2 = 0.0;
  double centroid_x = 0.0;
  double centroid_y = 0.0;
  double mean_th_intensity = 0.0;
  int intensity_bin = 0;  // 0 until assign_bins runs
};

/// Mean grayscale value of every label of `labels`, indexed by label
/// (entry 0 unused). Integer sums are merged in band order.
inline std::vector<double> mean_gray_per_label(const RgbSlide& slide, const LabelMask& labels, GrayRule rule,
                                               unsigned workers = 1) {
  require_same_extent(slide, labels, "slide and label mask differ in size");
  std::uint32_t n = labels.n_labels;
  for (auto v : labels.data()) n = std::max<std::uint32_t>(n, v);
  const int bands = std::max(1, std::min(labels.height(), static_cast<int>(resolve_workers(workers)) * 4));
  std::vector<std::vector<std::uint64_t>> sums(bands), counts(bands);
  parallel_for(static_cast<std::size_t>(bands), workers, [&](std::size_t b) {
    sums[b].assign(n + 1, 0);
    counts[b].assign(n + 1, 0);
    const int ya = static_cast<int>(static_cast<long long>(labels.height()) * b / bands);
    const int yb = static_cast<int>(static_cast<long long>(labels.height()) * (b + 1) / bands);
    for (int y = ya; y < yb; ++y) {
      auto lrow = labels.row(y);
      auto prow = slide.row(y);
      for (int x = 0; x < labels.width(); ++x) {
        const auto l = lrow[x];
        if (l == 0) continue;
        const auto* px = &prow[static_cast<std::size_t>(x) * 3];
        sums[b][l] += gray_value(px[0], px[1], px[2], rule);
        ++counts[b][l];
      }
    }
  });
  std::vector<double> means(n + 1, 0.0);
  for (std::uint32_t l = 1; l <= n; ++l) {
    std::uint64_t s = 0, c = 0;
    for (int b = 0; b < bands; ++b) {
      s += sums[b][l];
      c += counts[b][l];
    }
    if (c != 0) means[l] = static_cast<double>(s) / static_cast<double>(c);
  }
  return means;
}

namespace detail {

inline std::vector<CellRecord> cell_records(std::span<const ComponentStats> stats, std::span<const double> means,
                                            const Calibration& calib, double resolution_um) {
  const double px_area_um2 = resolution_um * resolution_um;
  std::vector<CellRecord> cells;
  for (const auto& s : stats) {
    if (s.area < calib.min_area) continue;
    CellRecord cell;
    cell.cell_id = static_cast<std::uint32_t>(cells.size() + 1);
    cell.component_label = s.label;
    cell.area_px = s.area;
    cell.area_um2 = static_cast<double>(s.area) * px_area_um2;
    cell.centroid_x = s.centroid_x;
    cell.centroid_y = s.centroid_y;
    cell.mean_th_intensity = means[s.label];
    cells.push_back(cell);
  }
  return cells;
}

}  // namespace detail

/// One record per component of `labels` that survives the small-component
/// filter, in label order.
inline std::vector<CellRecord> measure_cells(const RgbSlide& slide, const LabelMask& labels, const Calibration& calib,
                                             GrayRule rule = GrayRule::Mean, unsigned workers = 1) {
  require_same_extent(slide, labels, "slide and label mask differ in size");
  const auto stats = component_stats(labels, workers);
  const auto means = mean_gray_per_label(slide, labels, rule, workers);
  return detail::cell_records(stats, means, calib, slide.resolution_um);
}

enum class BinRule { EqualWidth, Quantile };

inline BinRule parse_bin_rule(std::string_view name) {
  if (name == "equal-width") return BinRule::EqualWidth;
  if (name == "quantile") return BinRule::Quantile;
  throw Error(ErrorCode::InvalidArgument, "unknown bin rule: " + std::string(name));
}

inline std::string_view to_string(BinRule rule) {
  return rule == BinRule::EqualWidth ? "equal-width" : "quantile";
}

/// Upper edges lo + b * (hi - lo) / k for b = 1..k-1 of equal-width bins.
inline std::vector<double> equal_width_edges(double lo, double hi, int k) {
  std::vector<double> edges;
  const double width = (hi - lo) / k;
  for (int b = 1; b < k; ++b) edges.push_back(lo + b * width);
  return edges;
}

/// Bin in 1..k for every value. Equal-width bins span the observed range
/// with values on an edge going to the lower bin; a zero-width range puts
/// everything in bin 1. Quantile bins rank values, ties sharing a bin.
inline std::vector<int> intensity_bins(std::span<const double> values, int k = 5, BinRule rule = BinRule::EqualWidth) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "bin count must be >= 1");
  std::vector<int> bins(values.size(), 1);
  if (values.empty()) return bins;
  if (rule == BinRule::EqualWidth) {
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo)) return bins;
    const auto edges = equal_width_edges(lo, hi, k);
    const double width = (hi - lo) / k;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double v = values[i];
      int b = std::clamp(static_cast<int>(std::ceil((v - lo) / width)), 1, k);
      // Snap to the exact edge comparison where the division rounded.
      while (b > 1 && v <= edges[static_cast<std::size_t>(b - 2)]) --b;
      while (b < k && v > edges[static_cast<std::size_t>(b - 1)]) ++b;
      bins[i] = b;
    }
    return bins;
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto below = static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), values[i]) - sorted.begin());
    bins[i] = std::clamp(static_cast<int>(std::floor(k * below / n)) + 1, 1, k);
  }
  return bins;
}

inline void assign_bins(std::span<CellRecord> cells, int k = 5, BinRule rule = BinRule::EqualWidth) {
  std::vector<double> values;
  values.reserve(cells.size());
  for (const auto& c : cells) values.push_back(c.mean_th_intensity);
  const auto bins = intensity_bins(values, k, rule);
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i].intensity_bin = bins[i];
}

struct QuantifyOptions {
  Connectivity connectivity = Connectivity::Eight;
  int tile_size = kDefaultTileSize;
  GrayRule gray_rule = GrayRule::Mean;
  BinRule bin_rule = BinRule::EqualWidth;
  int bins = 5;
  unsigned workers = 1;
};

struct QuantSummary {
  std::uint64_t estimated_cell_count = 0;
  std::uint64_t n_cells_measured = 0;
  double mean_intensity = 0.0;
  double min_intensity = 0.0;
  double max_intensity = 0.0;
  std::vector<std::uint64_t> bin_histogram;  // k entries, bin 1 first
};

struct QuantReport {
  CountReport count;
  std::vector<CellRecord> cells;
  QuantSummary summary;
  LabelMask labels;  // connected components of the input mask
};

inline QuantSummary summarize(const CountReport& count, std::span<const CellRecord> cells, int k) {
  QuantSummary s;
  s.estimated_cell_count = count.estimated_cell_count;
  s.n_cells_measured = cells.size();
  s.bin_histogram.assign(static_cast<std::size_t>(std::max(k, 1)), 0);
  if (cells.empty()) return s;
  s.min_intensity = std::numeric_limits<double>::infinity();
  s.max_intensity = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (const auto& c : cells) {
    total += c.mean_th_intensity;
    s.min_intensity = std::min(s.min_intensity, c.mean_th_intensity);
    s.max_intensity = std::max(s.max_intensity, c.mean_th_intensity);
    if (c.intensity_bin >= 1 && c.intensity_bin <= k) ++s.bin_histogram[static_cast<std::size_t>(c.intensity_bin - 1)];
  }
  s.mean_intensity = total / static_cast<double>(cells.size());
  return s;
}

/// label (tiled) -> count -> measure -> bin.
inline QuantReport quantify_slide(const RgbSlide& slide, const BinaryMask& mask, const Calibration& calib,
                                  const QuantifyOptions& options = {}) {
  require_same_extent(slide, mask, "slide and mask differ in size");
  QuantReport report;
  auto labeling = label_components_tiled(mask, options.tile_size, options.connectivity, options.workers);
  report.count = count_from_stats(labeling.stats, calib);

  const auto means = mean_gray_per_label(slide, labeling.labels, options.gray_rule, options.workers);
  report.cells = detail::cell_records(labeling.stats, means, calib, slide.resolution_um);
  assign_bins(report.cells, options.bins, options.bin_rule);
  report.summary = summarize(report.count, report.cells, options.bins);
  report.labels = std::move(labeling.labels);
  return report;
}

}  // namespace neurocount
