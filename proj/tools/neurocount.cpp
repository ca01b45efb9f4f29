// neurocount: whole-slide cell counting and TH-intensity quantification.
//
// Exit codes: 0 success, 2 invalid input, 3 processing failure. Failures
// print one JSON object on stderr.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "neurocount/pipeline.hpp"

namespace {

using namespace neurocount;
using pipeline::PipelineConfig;

int fail(std::string_view name, const std::string& message, int exit_code) {
  nlohmann::json j{{"error", std::string(name)}, {"message", message}, {"exit_code", exit_code}};
  std::cerr << j.dump() << std::endl;
  return exit_code;
}

int fail(ErrorCode code, const std::string& message) {
  return fail(to_string(code), message, is_input_error(code) ? 2 : 3);
}

struct GlobalFlags {
  std::string config;
  std::optional<unsigned> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

struct ConfigFlags {
  std::optional<int> tile_size;
  std::optional<int> connectivity;
  std::optional<std::string> calibration;
  std::optional<std::string> gray_rule;
  std::optional<std::string> bin_rule;
  std::optional<int> bins;
  std::optional<double> iou;
  std::optional<double> percentile;
  std::optional<int> mode;
};

PipelineConfig build_config(const GlobalFlags& g, const ConfigFlags& f) {
  PipelineConfig c = pipeline::resolve_config(g.config);
  if (g.workers) c.workers = *g.workers;
  if (g.seed) c.seed = *g.seed;
  if (g.out) c.out_dir = *g.out;
  if (f.tile_size) c.tile_size = *f.tile_size;
  if (f.connectivity) c.connectivity = parse_connectivity(*f.connectivity);
  if (f.calibration) c.calibration_path = *f.calibration;
  if (f.gray_rule) c.gray_rule = parse_gray_rule(*f.gray_rule);
  if (f.bin_rule) c.bin_rule = parse_bin_rule(*f.bin_rule);
  if (f.bins) c.bins = *f.bins;
  if (f.iou) c.match_threshold = *f.iou;
  if (f.percentile) c.min_area_percentile = *f.percentile;
  if (f.mode) c.augment_mode = *f.mode;
  pipeline::validate(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Whole-slide neuron counting and TH-intensity quantification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "neurocount 0.1.0");

  GlobalFlags g;
  ConfigFlags f;
  app.add_option("--config", g.config, "pipeline config (JSON); default from $NEUROCOUNT_CONFIG");
  app.add_option("--workers", g.workers, "worker threads, 0 = all cores");
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--tile-size", f.tile_size, "tile edge in pixels");
  app.add_option("--connectivity", f.connectivity, "4 or 8");
  app.add_option("--calibration", f.calibration, "calibration file");
  app.add_option("--gray", f.gray_rule, "grayscale rule: mean | weighted");
  app.add_option("--bin-rule", f.bin_rule, "intensity bins: equal-width | quantile");
  app.add_option("--bins", f.bins, "number of intensity bins");
  app.add_option("--iou", f.iou, "IoU threshold for detection matching");
  app.add_option("--min-area-percentile", f.percentile, "noise floor percentile, 0 = literal minimum");
  app.add_option("--mode", f.mode, "augmentation mode 1..7");
  for (auto* opt : app.get_options()) opt->configurable(false);
  app.fallthrough();

  std::string labels_dir;
  auto* calibrate = app.add_subcommand("calibrate", "learn min/avg cell area from ground-truth labels");
  calibrate->add_option("labels_dir", labels_dir)->required();

  std::string image, mask;
  auto* quantify = app.add_subcommand("quantify", "count and measure cells on one slide");
  quantify->add_option("image", image)->required();
  quantify->add_option("mask", mask)->required();

  std::string pred_dir, gt_dir;
  auto* eval = app.add_subcommand("eval", "score predicted masks against ground-truth labels");
  eval->add_option("pred_dir", pred_dir)->required();
  eval->add_option("gt_dir", gt_dir)->required();

  synth::SynthSpec spec;
  int synth_count = 1;
  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic slides with known cells");
  synth_cmd->add_option("--cells", spec.n_cells, "cells per slide")->capture_default_str();
  synth_cmd->add_option("--overlap", spec.overlap_fraction, "fraction of cells placed touching another")
      ->capture_default_str();
  synth_cmd->add_option("--width", spec.width)->capture_default_str();
  synth_cmd->add_option("--height", spec.height)->capture_default_str();
  synth_cmd->add_option("--radius-min", spec.radius_min)->capture_default_str();
  synth_cmd->add_option("--radius-max", spec.radius_max)->capture_default_str();
  synth_cmd->add_option("--intensity-min", spec.intensity_min)->capture_default_str();
  synth_cmd->add_option("--intensity-max", spec.intensity_max)->capture_default_str();
  synth_cmd->add_option("--background", spec.background_intensity)->capture_default_str();
  synth_cmd->add_option("--count", synth_count, "slides, seeds seed..seed+count-1")->capture_default_str();

  pipeline::SslCheckOptions ssl_opts;
  auto* ssl_cmd = app.add_subcommand("ssl-check", "verify Barlow Twins gradients by finite differences");
  ssl_cmd->add_option("--n", ssl_opts.n, "batch size")->capture_default_str();
  ssl_cmd->add_option("--d", ssl_opts.d, "embedding dimension")->capture_default_str();
  ssl_cmd->add_option("--lambda", ssl_opts.lambda, "off-diagonal weight")->capture_default_str();
  ssl_cmd->add_option("--step", ssl_opts.h, "finite-difference step")->capture_default_str();
  ssl_cmd->add_option("--tolerance", ssl_opts.tolerance)->capture_default_str();
  ssl_cmd->add_option("--configs", ssl_opts.configs, "random (n, d, lambda) configurations instead");

  std::string tile_image;
  int tile_size = kDefaultTileSize;
  auto* tile = app.add_subcommand("tile", "split a raster into indexed tiles");
  tile->add_option("image", tile_image)->required();
  tile->add_option("--size", tile_size, "tile edge in pixels")->capture_default_str();

  std::string tiles_dir, stitched;
  auto* stitch_cmd = app.add_subcommand("stitch", "reassemble tiles written by `tile`");
  stitch_cmd->add_option("tiles_dir", tiles_dir)->required();
  stitch_cmd->add_option("output", stitched)->required();

  std::string aug_image;
  std::optional<std::string> aug_mask;
  int aug_count = 1;
  auto* augment_cmd = app.add_subcommand("augment", "write augmented samples for inspection");
  augment_cmd->add_option("image", aug_image)->required();
  augment_cmd->add_option("--mask", aug_mask);
  augment_cmd->add_option("--count", aug_count)->capture_default_str();

  std::string label_mask;
  auto* label = app.add_subcommand("label", "connected components of a binary mask");
  label->add_option("mask", label_mask)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(ErrorCode::InvalidArgument, e.what());
  }

  try {
    if (*stitch_cmd) {
      pipeline::cmd_stitch(tiles_dir, stitched, std::cout);
      return 0;
    }
    const PipelineConfig cfg = build_config(g, f);
    if (*calibrate) {
      pipeline::cmd_calibrate(labels_dir, cfg, std::cout);
    } else if (*quantify) {
      pipeline::cmd_quantify(image, mask, cfg, std::cout);
    } else if (*eval) {
      pipeline::cmd_eval(pred_dir, gt_dir, cfg, std::cout);
    } else if (*synth_cmd) {
      spec.seed = cfg.seed;
      pipeline::cmd_synth(spec, synth_count, cfg, std::cout);
    } else if (*ssl_cmd) {
      if (!pipeline::cmd_ssl_check(ssl_opts, cfg, std::cout).passed) {
        return fail("GradientCheckFailed", "max relative error above tolerance", 3);
      }
    } else if (*tile) {
      pipeline::cmd_tile(tile_image, tile_size, cfg, std::cout);
    } else if (*augment_cmd) {
      std::optional<std::filesystem::path> m;
      if (aug_mask) m = *aug_mask;
      pipeline::cmd_augment(aug_image, m, aug_count, cfg, std::cout);
    } else if (*label) {
      pipeline::cmd_label(label_mask, cfg, std::cout);
    }
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail(ErrorCode::IoError, e.what());
  }
  return 0;
}
