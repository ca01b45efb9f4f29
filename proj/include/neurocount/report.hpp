#pragma once

// Serialization of calibrations, per-cell tables, summaries and overlays.
// Machine-readable outputs carry shortest round-trip doubles; console text
// uses 6 significant digits.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "neurocount/error.hpp"
#include "neurocount/quantify.hpp"

namespace neurocount::report {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kCellTableHeader =
    "cell_id,component_label,area_px,area_um2,centroid_x,centroid_y,mean_th_intensity,intensity_bin";

/// Shortest decimal that parses back to the same double.
inline std::string exact(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw Error(ErrorCode::IoError, "float formatting failed");
  return std::string(buf.data(), end);
}

/// 6 significant digits for humans.
inline std::string brief(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

inline std::string read_text(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, what + ": " + e.what());
  }
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---- calibration ----------------------------------------------------------

inline json to_json(const Calibration& c) {
  return json{{"min_area_px", c.min_area},       {"avg_area_px", c.avg_area},
              {"n_cells", c.n_cells},            {"source_ids", c.source_ids},
              {"dataset_hash", c.dataset_hash},  {"created_at", c.created_at}};
}

inline Calibration calibration_from_json(const json& j) {
  Calibration c;
  try {
    c.min_area = j.at("min_area_px").get<std::uint64_t>();
    c.avg_area = j.at("avg_area_px").get<double>();
    c.n_cells = j.at("n_cells").get<std::uint64_t>();
    c.source_ids = j.value("source_ids", std::vector<std::string>{});
    c.dataset_hash = j.value("dataset_hash", std::string{});
    c.created_at = j.value("created_at", std::string{});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("calibration: ") + e.what());
  }
  if (c.min_area == 0 || !(static_cast<double>(c.min_area) <= c.avg_area) || c.n_cells == 0) {
    throw Error(ErrorCode::InvalidArgument, "calibration violates 0 < min_area <= avg_area, n_cells >= 1");
  }
  return c;
}

inline void save_calibration(const fs::path& path, const Calibration& c) { write_text(path, dump(to_json(c))); }

inline Calibration load_calibration(const fs::path& path) {
  return calibration_from_json(parse_json(read_text(path), path.string()));
}

// ---- per-cell table -------------------------------------------------------

inline std::string cell_table(std::span<const CellRecord> cells) {
  std::string out = kCellTableHeader;
  out += '\n';
  for (const auto& c : cells) {
    out += std::to_string(c.cell_id) + ',' + std::to_string(c.component_label) + ',' + std::to_string(c.area_px) +
           ',' + exact(c.area_um2) + ',' + exact(c.centroid_x) + ',' + exact(c.centroid_y) + ',' +
           exact(c.mean_th_intensity) + ',' + std::to_string(c.intensity_bin) + '\n';
  }
  return out;
}

// ---- summary --------------------------------------------------------------

inline json to_json(const CountReport& r) {
  return json{{"n_components_raw", r.n_components_raw},
              {"n_filtered_small", r.n_filtered_small},
              {"n_components_kept", r.n_components_kept},
              {"estimated_cell_count", r.estimated_cell_count}};
}

inline json summary_json(const QuantReport& r, const Calibration& calib, const QuantifyOptions& options) {
  const auto& s = r.summary;
  return json{
      {"counts", to_json(r.count)},
      {"n_cells_measured", s.n_cells_measured},
      {"intensity", {{"mean", s.mean_intensity}, {"min", s.min_intensity}, {"max", s.max_intensity}}},
      {"bins", {{"rule", to_string(options.bin_rule)}, {"k", options.bins}, {"histogram", s.bin_histogram}}},
      {"gray_rule", to_string(options.gray_rule)},
      {"connectivity", static_cast<int>(options.connectivity)},
      {"calibration",
       {{"min_area_px", calib.min_area}, {"avg_area_px", calib.avg_area}, {"dataset_hash", calib.dataset_hash}}},
  };
}

inline std::string summary_text(const QuantReport& r) {
  const auto& s = r.summary;
  std::string out = "estimated_cell_count " + std::to_string(s.estimated_cell_count) + "\n";
  out += "components raw " + std::to_string(r.count.n_components_raw) + " kept " +
         std::to_string(r.count.n_components_kept) + " filtered " + std::to_string(r.count.n_filtered_small) + "\n";
  out += "intensity mean " + brief(s.mean_intensity) + " min " + brief(s.min_intensity) + " max " +
         brief(s.max_intensity) + "\n";
  out += "bins";
  for (auto n : s.bin_histogram) out += " " + std::to_string(n);
  out += "\n";
  return out;
}

// ---- overlay --------------------------------------------------------------

inline std::array<std::uint8_t, 3> bin_color(int bin, int k) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 5> kRamp{{
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  if (k <= 1) return kRamp[0];
  const double t = static_cast<double>(std::clamp(bin, 1, k) - 1) / static_cast<double>(k - 1) * 4.0;
  const int i = std::min(3, static_cast<int>(t));
  const double f = t - i;
  std::array<std::uint8_t, 3> c{};
  for (int ch = 0; ch < 3; ++ch) {
    c[ch] = static_cast<std::uint8_t>(std::lround(kRamp[i][ch] * (1.0 - f) + kRamp[i + 1][ch] * f));
  }
  return c;
}

/// Slide with kept-cell outlines coloured by intensity bin and a column of
/// k legend swatches (bin 1 on top) in the top-left corner.
inline RgbSlide render_overlay(const RgbSlide& slide, const LabelMask& labels, std::span<const CellRecord> cells,
                               int k) {
  require_same_extent(slide, labels, "overlay: slide and labels differ in size");
  RgbSlide out = slide;
  std::vector<int> bin_of(std::size_t{labels.n_labels} + 1, 0);
  for (const auto& c : cells) {
    if (c.component_label < bin_of.size()) bin_of[c.component_label] = c.intensity_bin;
  }
  const int w = labels.width();
  const int h = labels.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint16_t l = labels(x, y);
      if (l == 0 || l >= bin_of.size() || bin_of[l] == 0) continue;
      const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1 || labels(x - 1, y) != l ||
                        labels(x + 1, y) != l || labels(x, y - 1) != l || labels(x, y + 1) != l;
      if (!edge) continue;
      const auto c = bin_color(bin_of[l], k);
      for (int ch = 0; ch < 3; ++ch) out(x, y, ch) = c[ch];
    }
  }
  constexpr int kSwatch = 12;
  constexpr int kPad = 4;
  if (w >= kSwatch + 2 * kPad && h >= k * (kSwatch + kPad) + kPad) {
    for (int b = 1; b <= k; ++b) {
      const auto c = bin_color(b, k);
      const int y0 = kPad + (b - 1) * (kSwatch + kPad);
      for (int y = y0; y < y0 + kSwatch; ++y) {
        for (int x = kPad; x < kPad + kSwatch; ++x) {
          for (int ch = 0; ch < 3; ++ch) out(x, y, ch) = c[ch];
        }
      }
    }
  }
  return out;
}

}  // namespace neurocount::report
