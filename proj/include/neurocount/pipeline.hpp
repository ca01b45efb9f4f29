#pragma once

// Batch commands behind the CLI. Each command reads its inputs, writes its
// artifacts under the configured output directory and logs a short human
// summary. Results never depend on the worker count.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "neurocount/augment.hpp"
#include "neurocount/io.hpp"
#include "neurocount/labeling.hpp"
#include "neurocount/metrics.hpp"
#include "neurocount/parallel.hpp"
#include "neurocount/quantify.hpp"
#include "neurocount/report.hpp"
#include "neurocount/ssl_kernel.hpp"
#include "neurocount/synth.hpp"
#include "neurocount/tiling.hpp"

namespace neurocount::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kConfigEnv = "NEUROCOUNT_CONFIG";

struct PipelineConfig {
  int tile_size = kDefaultTileSize;
  Connectivity connectivity = Connectivity::Eight;
  std::string calibration_path;
  GrayRule gray_rule = GrayRule::Mean;
  BinRule bin_rule = BinRule::EqualWidth;
  int bins = 5;
  double match_threshold = 0.5;
  double min_area_percentile = 0.0;
  int augment_mode = 1;
  augment::Params augment_params;
  unsigned workers = 0;  // 0 = hardware concurrency
  std::string out_dir = "out";
  std::uint64_t seed = 0;

  QuantifyOptions quantify_options() const {
    return {connectivity, tile_size, gray_rule, bin_rule, bins, resolve_workers(workers)};
  }
  fs::path out() const { return fs::path(out_dir); }
};

namespace detail {

template <typename T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

inline augment::Params params_from_json(const json& j) {
  static const std::set<std::string> kKeys = {
      "flip_probability", "rotation_min_deg", "rotation_max_deg", "rotation_step_deg", "brightness_limit",
      "contrast_limit",   "gamma_min",        "gamma_max",        "rgb_shift_limit",   "blur_radius_max",
      "noise_sigma_max",  "crop_scale_min",   "crop_scale_max",   "crop_ratio_min",    "crop_ratio_max",
      "crop_size",        "elastic_alpha",    "elastic_sigma"};
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.contains(key)) throw Error(ErrorCode::InvalidArgument, "unknown augment parameter: " + key);
  }
  augment::Params p;
  take(j, "flip_probability", p.flip_probability);
  take(j, "rotation_min_deg", p.rotation_min_deg);
  take(j, "rotation_max_deg", p.rotation_max_deg);
  take(j, "rotation_step_deg", p.rotation_step_deg);
  take(j, "brightness_limit", p.brightness_limit);
  take(j, "contrast_limit", p.contrast_limit);
  take(j, "gamma_min", p.gamma_min);
  take(j, "gamma_max", p.gamma_max);
  take(j, "rgb_shift_limit", p.rgb_shift_limit);
  take(j, "blur_radius_max", p.blur_radius_max);
  take(j, "noise_sigma_max", p.noise_sigma_max);
  take(j, "crop_scale_min", p.crop_scale_min);
  take(j, "crop_scale_max", p.crop_scale_max);
  take(j, "crop_ratio_min", p.crop_ratio_min);
  take(j, "crop_ratio_max", p.crop_ratio_max);
  take(j, "crop_size", p.crop_size);
  take(j, "elastic_alpha", p.elastic_alpha);
  take(j, "elastic_sigma", p.elastic_sigma);
  return p;
}

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Files of `role` in `dir`, or every PNG when none carries the role.
inline std::map<std::string, fs::path> role_files(const fs::path& dir, const std::string& role) {
  auto files = io::files_by_stem(dir, role);
  return files.empty() ? io::files_by_stem(dir) : files;
}

inline fs::path artifact(const PipelineConfig& cfg, const std::string& stem, const std::string& suffix) {
  return cfg.out() / (stem + suffix);
}

}  // namespace detail

/// Validates ranges and referenced paths.
inline void validate(const PipelineConfig& c) {
  if (c.tile_size < 1) throw Error(ErrorCode::InvalidArgument, "tile_size must be >= 1");
  if (c.bins < 1) throw Error(ErrorCode::InvalidArgument, "bins must be >= 1");
  if (!(c.match_threshold > 0.0 && c.match_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "match_threshold must be in (0, 1]");
  }
  if (!(c.min_area_percentile >= 0.0 && c.min_area_percentile <= 100.0)) {
    throw Error(ErrorCode::InvalidArgument, "min_area_percentile must be in [0, 100]");
  }
  augment::mode_ops(c.augment_mode);
  if (!c.calibration_path.empty() && !fs::exists(c.calibration_path)) {
    throw Error(ErrorCode::MissingFile, "calibration: " + c.calibration_path);
  }
}

inline PipelineConfig config_from_json(const json& j) {
  static const std::set<std::string> kKeys = {"tile_size",  "connectivity",    "calibration", "gray_rule",
                                              "bin_rule",   "bins",            "match_threshold",
                                              "min_area_percentile",           "augment",     "workers",
                                              "out",        "seed"};
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be an object");
  PipelineConfig c;
  try {
    for (const auto& [key, _] : j.items()) {
      if (!kKeys.contains(key)) throw Error(ErrorCode::InvalidArgument, "unknown config key: " + key);
    }
    detail::take(j, "tile_size", c.tile_size);
    if (j.contains("connectivity")) c.connectivity = parse_connectivity(j.at("connectivity").get<int>());
    detail::take(j, "calibration", c.calibration_path);
    if (j.contains("gray_rule")) c.gray_rule = parse_gray_rule(j.at("gray_rule").get<std::string>());
    if (j.contains("bin_rule")) c.bin_rule = parse_bin_rule(j.at("bin_rule").get<std::string>());
    detail::take(j, "bins", c.bins);
    detail::take(j, "match_threshold", c.match_threshold);
    detail::take(j, "min_area_percentile", c.min_area_percentile);
    if (j.contains("augment")) {
      const auto& a = j.at("augment");
      detail::take(a, "mode", c.augment_mode);
      if (a.contains("params")) c.augment_params = detail::params_from_json(a.at("params"));
    }
    detail::take(j, "workers", c.workers);
    detail::take(j, "out", c.out_dir);
    detail::take(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  return c;
}

inline PipelineConfig load_config(const fs::path& path) {
  return config_from_json(report::parse_json(report::read_text(path), path.string()));
}

/// Explicit path, else the environment default, else built-in defaults.
inline PipelineConfig resolve_config(const std::string& explicit_path) {
  if (!explicit_path.empty()) return load_config(explicit_path);
  if (const char* env = std::getenv(kConfigEnv); env != nullptr && *env != '\0') return load_config(env);
  return {};
}

// ---- calibrate ------------------------------------------------------------

inline Calibration cmd_calibrate(const fs::path& labels_dir, const PipelineConfig& cfg, std::ostream& log) {
  const auto files = detail::role_files(labels_dir, "label");
  if (files.empty()) throw Error(ErrorCode::EmptyGroundTruth, "no label rasters in " + labels_dir.string());
  std::vector<LabelMask> masks;
  std::vector<std::string> ids;
  for (const auto& [stem, path] : files) {
    masks.push_back(io::read_labels(path));
    ids.push_back(stem);
  }
  Calibration calib = calibrate(masks, ids, {cfg.min_area_percentile});
  calib.created_at = detail::utc_now();
  report::save_calibration(cfg.out() / "calibration.json", calib);
  log << "n_cells " << calib.n_cells << "\nmin_area_px " << calib.min_area << "\navg_area_px "
      << report::brief(calib.avg_area) << "\n";
  return calib;
}

inline Calibration require_calibration(const PipelineConfig& cfg) {
  if (cfg.calibration_path.empty()) throw Error(ErrorCode::InvalidArgument, "a calibration file is required");
  return report::load_calibration(cfg.calibration_path);
}

// ---- quantify -------------------------------------------------------------

inline QuantReport cmd_quantify(const fs::path& image, const fs::path& mask_path, const PipelineConfig& cfg,
                                std::ostream& log) {
  const Calibration calib = require_calibration(cfg);
  const RgbSlide slide = io::read_rgb(image);
  const BinaryMask mask = io::read_binary(mask_path);
  const auto options = cfg.quantify_options();
  QuantReport r = quantify_slide(slide, mask, calib, options);

  const std::string stem = io::stem_of(image);
  report::write_text(detail::artifact(cfg, stem, ".cells.csv"), report::cell_table(r.cells));
  report::write_text(detail::artifact(cfg, stem, ".summary.json"),
                     report::dump(report::summary_json(r, calib, options)));
  io::write_rgb(detail::artifact(cfg, stem, ".overlay.png"), report::render_overlay(slide, r.labels, r.cells, cfg.bins));
  log << report::summary_text(r);
  return r;
}

// ---- eval -----------------------------------------------------------------

struct SlideEval {
  std::string stem;
  double dice = 0.0;
  DetectionMatch match;
  std::optional<PrecisionRecall> prf;        // absent when neither side has cells
  std::uint64_t pred_count = 0;              // calibrated count of the prediction
  std::uint64_t naive_count = 0;             // connected components of the prediction
  std::uint64_t gt_count = 0;
  std::optional<double> counting_error;      // absent when the slide has no GT cells
};

struct EvalResult {
  std::vector<SlideEval> slides;
  json metrics;
  std::string scatter_csv;
};

inline SlideEval evaluate_slide(const std::string& stem, const fs::path& pred_path, const fs::path& gt_path,
                                const Calibration& calib, const PipelineConfig& cfg) {
  SlideEval e;
  e.stem = stem;
  const LabelMask gt = io::read_labels(gt_path);
  const BinaryMask pred = io::read_binary(pred_path);
  require_same_extent(pred, gt, stem + ": prediction and ground truth differ in size");
  const auto labeling = label_components_tiled(pred, cfg.tile_size, cfg.connectivity, 1);

  e.dice = dice(pred, binarize(gt));
  e.match = match_detections(labeling.labels, gt, cfg.match_threshold);
  if (e.match.tp + e.match.fp + e.match.fn > 0) e.prf = precision_recall_f1(e.match);
  e.pred_count = count_from_stats(labeling.stats, calib).estimated_cell_count;
  e.naive_count = labeling.stats.size();
  e.gt_count = gt.n_labels;
  if (e.gt_count > 0) {
    e.counting_error = counting_error(static_cast<double>(e.pred_count), static_cast<double>(e.gt_count));
  }
  return e;
}

inline EvalResult cmd_eval(const fs::path& pred_dir, const fs::path& gt_dir, const PipelineConfig& cfg,
                           std::ostream& log) {
  const auto preds = detail::role_files(pred_dir, "mask");
  const auto gts = detail::role_files(gt_dir, "label");
  if (gts.empty()) throw Error(ErrorCode::EmptyGroundTruth, "no label rasters in " + gt_dir.string());
  for (const auto& [stem, _] : gts) {
    if (!preds.contains(stem)) throw Error(ErrorCode::StemMismatch, "no prediction for " + stem);
  }
  for (const auto& [stem, _] : preds) {
    if (!gts.contains(stem)) throw Error(ErrorCode::StemMismatch, "no ground truth for " + stem);
  }

  std::string calibration_source = cfg.calibration_path;
  Calibration calib;
  if (cfg.calibration_path.empty()) {
    std::vector<LabelMask> masks;
    std::vector<std::string> ids;
    for (const auto& [stem, path] : gts) {
      masks.push_back(io::read_labels(path));
      ids.push_back(stem);
    }
    calib = calibrate(masks, ids, {cfg.min_area_percentile});
    calibration_source = "ground-truth";
  } else {
    calib = report::load_calibration(cfg.calibration_path);
  }

  std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> jobs;
  for (const auto& [stem, gt_path] : gts) jobs.push_back({stem, {preds.at(stem), gt_path}});

  EvalResult result;
  result.slides.resize(jobs.size());
  parallel_for(jobs.size(), resolve_workers(cfg.workers), [&](std::size_t i) {
    const auto& [stem, paths] = jobs[i];
    result.slides[i] = evaluate_slide(stem, paths.first, paths.second, calib, cfg);
  });

  json slides = json::array();
  double dice_sum = 0.0, p_sum = 0.0, r_sum = 0.0, f_sum = 0.0, err_sum = 0.0;
  std::size_t n_prf = 0, n_err = 0;
  std::uint64_t total_pred = 0, total_naive = 0, total_gt = 0;
  std::vector<double> xs, ys;
  result.scatter_csv = "stem,pred_count,gt_count\n";
  for (const auto& s : result.slides) {
    json js{{"stem", s.stem},         {"dice", s.dice},
            {"tp", s.match.tp},       {"fp", s.match.fp},
            {"fn", s.match.fn},       {"pred_count", s.pred_count},
            {"naive_count", s.naive_count}, {"gt_count", s.gt_count}};
    js["precision"] = s.prf ? json(s.prf->precision) : json(nullptr);
    js["recall"] = s.prf ? json(s.prf->recall) : json(nullptr);
    js["f1"] = s.prf ? json(s.prf->f1) : json(nullptr);
    js["counting_error"] = s.counting_error ? json(*s.counting_error) : json(nullptr);
    slides.push_back(std::move(js));

    dice_sum += s.dice;
    if (s.prf) {
      p_sum += s.prf->precision;
      r_sum += s.prf->recall;
      f_sum += s.prf->f1;
      ++n_prf;
    }
    if (s.counting_error) {
      err_sum += *s.counting_error;
      ++n_err;
    }
    total_pred += s.pred_count;
    total_naive += s.naive_count;
    total_gt += s.gt_count;
    xs.push_back(static_cast<double>(s.pred_count));
    ys.push_back(static_cast<double>(s.gt_count));
    result.scatter_csv += s.stem + ',' + std::to_string(s.pred_count) + ',' + std::to_string(s.gt_count) + '\n';
  }

  auto mean_or_null = [](double sum, std::size_t n) { return n == 0 ? json(nullptr) : json(sum / static_cast<double>(n)); };
  json aggregate{{"n_slides", result.slides.size()},
                 {"mean_dice", mean_or_null(dice_sum, result.slides.size())},
                 {"mean_precision", mean_or_null(p_sum, n_prf)},
                 {"mean_recall", mean_or_null(r_sum, n_prf)},
                 {"mean_f1", mean_or_null(f_sum, n_prf)},
                 {"mean_counting_error", mean_or_null(err_sum, n_err)},
                 {"total_pred_count", total_pred},
                 {"total_naive_count", total_naive},
                 {"total_gt_count", total_gt}};
  aggregate["total_counting_error"] =
      total_gt > 0 ? json(counting_error(static_cast<double>(total_pred), static_cast<double>(total_gt))) : json(nullptr);
  try {
    const auto c = pearson(xs, ys);
    aggregate["pearson_r"] = c.r;
    aggregate["r2"] = c.r2;
  } catch (const Error&) {
    aggregate["pearson_r"] = nullptr;
    aggregate["r2"] = nullptr;
  }

  result.metrics = json{{"iou_threshold", cfg.match_threshold},
                        {"connectivity", static_cast<int>(cfg.connectivity)},
                        {"calibration",
                         {{"source", calibration_source},
                          {"min_area_px", calib.min_area},
                          {"avg_area_px", calib.avg_area},
                          {"dataset_hash", calib.dataset_hash}}},
                        {"aggregate", aggregate},
                        {"slides", slides}};
  report::write_text(cfg.out() / "metrics.json", report::dump(result.metrics));
  report::write_text(cfg.out() / "scatter.csv", result.scatter_csv);

  auto brief_or_na = [](const json& v) { return v.is_null() ? std::string("n/a") : report::brief(v.get<double>()); };
  log << "slides " << result.slides.size() << "\nmean_dice " << brief_or_na(aggregate["mean_dice"]) << "\nmean_f1 "
      << brief_or_na(aggregate["mean_f1"]) << "\nmean_counting_error " << brief_or_na(aggregate["mean_counting_error"])
      << "\nr2 " << brief_or_na(aggregate["r2"]) << "\n";
  return result;
}

// ---- synth ----------------------------------------------------------------

inline json truth_json(const synth::SynthSpec& spec, const synth::SynthTruth& t) {
  json cells = json::array();
  for (std::size_t i = 0; i < t.cells.size(); ++i) {
    const auto& c = t.cells[i];
    cells.push_back({{"label", i + 1},
                     {"center", {c.cx, c.cy}},
                     {"radii", {c.rx, c.ry}},
                     {"angle_rad", c.angle},
                     {"fill_intensity", c.fill},
                     {"partner", c.partner < 0 ? json(nullptr) : json(c.partner + 1)},
                     {"component", c.component},
                     {"visible_area_px", c.visible_area}});
  }
  return json{{"true_count", t.true_count},
              {"n_components", t.n_components},
              {"seed", spec.seed},
              {"extent", {spec.width, spec.height}},
              {"overlap_fraction", spec.overlap_fraction},
              {"radius_range", {spec.radius_min, spec.radius_max}},
              {"intensity_range", {spec.intensity_min, spec.intensity_max}},
              {"background_intensity", spec.background_intensity},
              {"cells", cells}};
}

inline std::string synth_stem(std::uint64_t seed) { return "synth_" + std::to_string(seed); }

/// Writes `<stem>.image.png`, `.label.png`, `.mask.png` and `.truth.json`
/// for seeds spec.seed .. spec.seed + count - 1.
inline std::vector<synth::SynthTruth> cmd_synth(const synth::SynthSpec& base, int count, const PipelineConfig& cfg,
                                                std::ostream& log) {
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "count must be >= 1");
  std::vector<synth::SynthTruth> truths(static_cast<std::size_t>(count));
  parallel_for(truths.size(), resolve_workers(cfg.workers), [&](std::size_t i) {
    synth::SynthSpec spec = base;
    spec.seed = base.seed + i;
    auto s = synth::generate(spec);
    const std::string stem = synth_stem(spec.seed);
    io::write_rgb(detail::artifact(cfg, stem, ".image.png"), s.slide);
    io::write_labels(detail::artifact(cfg, stem, ".label.png"), s.labels);
    io::write_binary(detail::artifact(cfg, stem, ".mask.png"), synth::derive_binary(s.labels));
    report::write_text(detail::artifact(cfg, stem, ".truth.json"), report::dump(truth_json(spec, s.truth)));
    truths[i] = std::move(s.truth);
  });
  for (std::size_t i = 0; i < truths.size(); ++i) {
    log << synth_stem(base.seed + i) << " true_count " << truths[i].true_count << " components "
        << truths[i].n_components << "\n";
  }
  return truths;
}

// ---- ssl-check ------------------------------------------------------------

struct SslCheckOptions {
  std::size_t n = 8;
  std::size_t d = 4;
  double lambda = ssl::kDefaultLambda;
  double h = 1e-5;
  double tolerance = 1e-5;
  int configs = 0;  // > 0 draws that many random (n, d, lambda) configurations
};

struct SslCheckResult {
  double max_relative_error = 0.0;
  double identity_loss = 0.0;
  int configs = 0;
  bool passed = false;
};

inline SslCheckResult cmd_ssl_check(const SslCheckOptions& o, const PipelineConfig& cfg, std::ostream& log) {
  SslCheckResult r;
  auto run = [&](std::size_t n, std::size_t d, double lambda, std::uint64_t seed) {
    const auto g = ssl::check_gradients(ssl::random_batch(n, d, seed), lambda, o.h);
    r.max_relative_error = std::max(r.max_relative_error, g.max_relative_error);
    ++r.configs;
  };
  if (o.configs > 0) {
    static constexpr double kLambdas[] = {0.0, 0.005, 1.0};
    augment::Rng rng(cfg.seed);
    for (int i = 0; i < o.configs; ++i) {
      const auto n = static_cast<std::size_t>(rng.uniform_int(2, 16));
      const auto d = static_cast<std::size_t>(rng.uniform_int(2, 8));
      const double lambda = kLambdas[rng.uniform_int(0, 2)];
      run(n, d, lambda, rng.next());
    }
  } else {
    run(o.n, o.d, o.lambda, cfg.seed);
  }
  r.identity_loss = ssl::bt_loss(ssl::Matrix::identity(std::max<std::size_t>(o.d, 1)), o.lambda);
  r.passed = r.max_relative_error < o.tolerance && r.identity_loss == 0.0;
  log << "configs " << r.configs << "\nmax_relative_error " << report::brief(r.max_relative_error)
      << "\nbt_loss_identity " << report::brief(r.identity_loss) << "\n"
      << (r.passed ? "PASS" : "FAIL") << "\n";
  return r;
}

// ---- tile / stitch --------------------------------------------------------

enum class RasterKind { Rgb, Labels, Binary };

inline std::string_view to_string(RasterKind k) {
  return k == RasterKind::Rgb ? "rgb" : k == RasterKind::Labels ? "labels" : "binary";
}

inline RasterKind parse_raster_kind(std::string_view s) {
  if (s == "rgb") return RasterKind::Rgb;
  if (s == "labels") return RasterKind::Labels;
  if (s == "binary") return RasterKind::Binary;
  throw Error(ErrorCode::InvalidArgument, "unknown raster kind: " + std::string(s));
}

inline std::string tile_name(int row, int col) {
  return "tile_r" + std::to_string(row) + "_c" + std::to_string(col) + ".png";
}

namespace detail {

template <typename ImageT, typename Writer>
TileGrid write_tiles(const ImageT& image, int tile_size, const fs::path& dir, Writer&& write) {
  const auto [padded, grid] = pad_to_grid(image, tile_size);
  const auto tiles = split(padded, grid);
  for (const auto& t : tiles) write(dir / tile_name(t.row, t.col), t.pixels);
  return grid;
}

template <typename ImageT, typename Reader>
ImageT read_tiles(const TileGrid& grid, const fs::path& dir, Reader&& read) {
  std::vector<Tile<ImageT>> tiles;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const fs::path p = dir / tile_name(r, c);
      if (!fs::exists(p)) throw Error(ErrorCode::MissingTile, p.string());
      tiles.push_back({c, r, read(p)});
    }
  }
  return stitch(tiles, grid);
}

}  // namespace detail

/// Splits a raster into padded tiles plus a grid.json describing the layout.
inline TileGrid cmd_tile(const fs::path& image, int tile_size, const PipelineConfig& cfg, std::ostream& log) {
  const fs::path dir = cfg.out();
  fs::create_directories(dir);
  RasterKind kind = RasterKind::Rgb;
  double resolution = 0.0;
  TileGrid grid;
  if (io::is_label_raster(image)) {
    kind = RasterKind::Labels;
    grid = detail::write_tiles(io::read_labels(image, false), tile_size, dir, io::write_labels);
  } else {
    try {
      const RgbSlide slide = io::read_rgb(image);
      resolution = slide.resolution_um;
      grid = detail::write_tiles(slide, tile_size, dir, io::write_rgb);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BitDepthError) throw;
      kind = RasterKind::Binary;
      grid = detail::write_tiles(io::read_binary(image), tile_size, dir, io::write_binary);
    }
  }
  json j{{"kind", to_string(kind)},      {"width", grid.original.width}, {"height", grid.original.height},
         {"tile_size", grid.tile_size},  {"cols", grid.cols},            {"rows", grid.rows}};
  if (kind == RasterKind::Rgb) j["resolution_um"] = resolution;
  report::write_text(dir / "grid.json", report::dump(j));
  log << "tiles " << grid.tile_count() << " (" << grid.cols << "x" << grid.rows << ")\n";
  return grid;
}

/// Reassembles a directory written by cmd_tile into `output`.
inline void cmd_stitch(const fs::path& tiles_dir, const fs::path& output, std::ostream& log) {
  const json j = report::parse_json(report::read_text(tiles_dir / "grid.json"), "grid.json");
  RasterKind kind{};
  TileGrid grid;
  double resolution = 0.0;
  try {
    kind = parse_raster_kind(j.at("kind").get<std::string>());
    grid = make_grid({j.at("width").get<int>(), j.at("height").get<int>()}, j.at("tile_size").get<int>());
    if (grid.cols != j.at("cols").get<int>() || grid.rows != j.at("rows").get<int>()) {
      throw Error(ErrorCode::ExtentMismatch, "grid.json is inconsistent");
    }
    resolution = j.value("resolution_um", 0.0);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("grid.json: ") + e.what());
  }
  switch (kind) {
    case RasterKind::Rgb: {
      auto img = detail::read_tiles<RgbSlide>(grid, tiles_dir, io::read_rgb);
      if (resolution > 0.0) img.resolution_um = resolution;
      io::write_rgb(output, img);
      break;
    }
    case RasterKind::Labels:
      io::write_labels(output, detail::read_tiles<LabelMask>(grid, tiles_dir,
                                                             [](const fs::path& p) { return io::read_labels(p, false); }));
      break;
    case RasterKind::Binary:
      io::write_binary(output, detail::read_tiles<BinaryMask>(grid, tiles_dir, io::read_binary));
      break;
  }
  log << "stitched " << grid.tile_count() << " tiles into " << output.string() << "\n";
}

// ---- augment --------------------------------------------------------------

/// Writes `count` augmented samples of an image (and optional mask) using
/// the configured mode; sample i uses sample_seed(seed, i).
inline void cmd_augment(const fs::path& image, const std::optional<fs::path>& mask, int count,
                        const PipelineConfig& cfg, std::ostream& log) {
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "count must be >= 1");
  const RgbSlide slide = io::read_rgb(image);
  augment::SamplePair base{normalize(slide), std::nullopt};
  if (mask) {
    base.mask = io::read_binary(*mask);
    require_same_extent(slide, *base.mask, "image and mask differ in size");
  }
  const std::string stem = io::stem_of(image);
  for (int i = 0; i < count; ++i) {
    const auto spec = augment::AugmentSpec::from_mode(cfg.augment_mode, augment::sample_seed(cfg.seed, i),
                                                      cfg.augment_params);
    const auto out = augment::apply(base, spec);
    const std::string name = stem + "_aug" + std::to_string(i);
    io::write_rgb(detail::artifact(cfg, name, ".image.png"), to_rgb8(out.image, slide.resolution_um));
    if (out.mask) io::write_binary(detail::artifact(cfg, name, ".mask.png"), *out.mask);
  }
  log << "mode " << cfg.augment_mode << " samples " << count << "\n";
}

// ---- label ----------------------------------------------------------------

inline Labeling cmd_label(const fs::path& mask_path, const PipelineConfig& cfg, std::ostream& log) {
  const BinaryMask mask = io::read_binary(mask_path);
  auto labeling = label_components_tiled(mask, cfg.tile_size, cfg.connectivity, resolve_workers(cfg.workers));
  const std::string stem = io::stem_of(mask_path);
  io::write_labels(detail::artifact(cfg, stem, ".components.png"), labeling.labels);
  std::string table = "label,area_px,centroid_x,centroid_y,x0,y0,x1,y1\n";
  for (const auto& s : labeling.stats) {
    table += std::to_string(s.label) + ',' + std::to_string(s.area) + ',' + report::exact(s.centroid_x) + ',' +
             report::exact(s.centroid_y) + ',' + std::to_string(s.x0) + ',' + std::to_string(s.y0) + ',' +
             std::to_string(s.x1) + ',' + std::to_string(s.y1) + '\n';
  }
  report::write_text(detail::artifact(cfg, stem, ".components.csv"), table);
  log << "components " << labeling.stats.size() << "\n";
  return labeling;
}

}  // namespace neurocount::pipeline
