// Command-line entry point wiring the whole pipeline: phantom synthesis,
// training, ensemble prediction and evaluation. All randomness is controlled
// by --seed; identical invocations produce byte-identical artifacts.

#include <cstdio>
#include <filesystem>
#include <fnmatch.h>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cardioseg/config.hpp"
#include "cardioseg/manifest.hpp"
#include "cardioseg/metrics.hpp"
#include "cardioseg/pipeline.hpp"
#include "cardioseg/synth.hpp"
#include "cardioseg/volume_io.hpp"

namespace fs = std::filesystem;
using namespace cardioseg;

namespace {

// Expands shell-style patterns that survived quoting; plain paths pass through.
std::vector<fs::path> expand_checkpoint_args(const std::vector<std::string>& args) {
  std::vector<fs::path> out;
  for (const std::string& arg : args) {
    if (arg.find_first_of("*?[") == std::string::npos) {
      out.emplace_back(arg);
      continue;
    }
    const fs::path pattern(arg);
    const fs::path dir = pattern.parent_path().empty() ? fs::path(".") : pattern.parent_path();
    const std::string name_pattern = pattern.filename().string();
    if (!fs::is_directory(dir))
      fail(Errc::io, "checkpoint pattern directory does not exist: " + dir.string());
    std::vector<fs::path> matches;
    for (const auto& e : fs::directory_iterator(dir))
      if (fnmatch(name_pattern.c_str(), e.path().filename().string().c_str(), 0) == 0)
        matches.push_back(e.path());
    if (matches.empty()) fail(Errc::io, "no checkpoints match pattern: " + arg);
    std::sort(matches.begin(), matches.end());
    out.insert(out.end(), matches.begin(), matches.end());
  }
  return out;
}

int run_synth(const std::string& out_dir, int count, int size, double spacing,
              std::uint64_t seed) {
  fs::create_directories(out_dir);
  Rng rng(seed);
  std::ofstream manifest(fs::path(out_dir) / "manifest.tsv");
  if (!manifest) fail(Errc::io, "cannot write manifest in " + out_dir);
  for (int i = 0; i < count; ++i) {
    const PhantomPair p = generate_phantom(rng, size, spacing);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "phantom_%03d", i);
    const std::string ct_name = std::string(stem) + "_ct.mhd";
    const std::string mr_name = std::string(stem) + "_mr.mhd";
    const std::string lab_name = std::string(stem) + "_labels.mhd";
    write_volume(fs::path(out_dir) / ct_name, p.ct);
    write_volume(fs::path(out_dir) / mr_name, p.mr);
    write_volume(fs::path(out_dir) / lab_name, p.labels);
    manifest << ct_name << "\t" << lab_name << "\tCT\t" << (i % 2 == 0 ? "A" : "B") << "\n";
    manifest << mr_name << "\t" << lab_name << "\tMR\t" << (i % 2 == 0 ? "C&D" : "E") << "\n";
  }
  manifest.flush();
  if (!manifest) fail(Errc::io, "failed writing manifest in " + out_dir);
  std::cout << "wrote " << count << " phantom triples and manifest.tsv to " << out_dir << "\n";
  return 0;
}

int run_train(const std::string& manifest_path, const std::string& config_path,
              const std::string& out_dir, const std::vector<std::string>& overrides,
              bool verbose) {
  TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_config(config_path);
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      fail(Errc::config, "--set expects key=value, got '" + kv + "'");
    apply_config_entry(cfg, std::string(detail::trim(kv.substr(0, eq))),
                       std::string(detail::trim(kv.substr(eq + 1))));
  }
  cfg.validate();
  const DatasetIndex index = build_index(manifest_path);
  std::cout << "training: " << index.ct_pool.size() << " CT / " << index.mr_pool.size()
            << " MR samples, " << cfg.iterations << " iterations\n";
  const TrainResult result = train(cfg, index, out_dir, verbose ? &std::cout : nullptr);
  std::cout << "final checkpoint: " << result.final_checkpoint.string() << "\n";
  return 0;
}

int run_predict(const std::vector<std::string>& checkpoint_args, const std::string& input_path,
                const std::string& out_path, const std::string& modality_flag,
                const std::string& config_path, int crop_override, double spacing_override) {
  PredictOptions opt;
  if (!config_path.empty()) {
    const TrainConfig cfg = load_config(config_path);
    opt.target_spacing = cfg.target_spacing;
    opt.infer_crop = cfg.infer_crop;
    opt.cc_connectivity = cfg.cc_connectivity;
  } else {
    opt.infer_crop = 32;  // desk-scale default when no config is given
  }
  if (crop_override > 0) opt.infer_crop = crop_override;
  if (spacing_override > 0) opt.target_spacing = spacing_override;

  const Volume3 input = read_image(input_path);
  Modality modality;
  if (modality_flag == "ct") modality = Modality::CT;
  else if (modality_flag == "mr") modality = Modality::MR;
  else modality = detect_modality(input);

  const auto checkpoints = expand_checkpoint_args(checkpoint_args);
  const PredictResult result = predict_ensemble(checkpoints, input, modality, opt);
  write_volume(out_path, result.labels);
  std::cout << "wrote segmentation (" << checkpoints.size() << "-model ensemble, "
            << (modality == Modality::CT ? "CT" : "MR") << ") to " << out_path << "\n";
  return 0;
}

int run_evaluate(const std::string& pred_path, const std::string& gt_path,
                 const std::string& out_path) {
  const LabelMap pred = read_labels(pred_path);
  const LabelMap gt = read_labels(gt_path);
  check_same_dims(pred.dims, gt.dims, "evaluate");
  const auto close = [](double a, double b) { return std::abs(a - b) < 1e-9; };
  if (!close(pred.spacing.x, gt.spacing.x) || !close(pred.spacing.y, gt.spacing.y) ||
      !close(pred.spacing.z, gt.spacing.z))
    fail(Errc::config, "evaluate: prediction and ground truth spacing differ");

  const MetricsReport report = evaluate(pred, gt, gt.spacing);
  write_report_csv(std::cout, report);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) fail(Errc::io, "cannot write report: " + out_path);
    write_report_csv(out, report);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint CT/MR whole-heart segmentation pipeline"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Generate synthetic phantom pairs and a manifest");
  std::string synth_out;
  int synth_count = 4, synth_size = 32;
  double synth_spacing = 1.5;
  std::uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--count", synth_count, "Number of phantom triples");
  synth->add_option("--size", synth_size, "Cube size in voxels (>= 16)");
  synth->add_option("--spacing", synth_spacing, "Voxel spacing in mm");
  synth->add_option("--seed", synth_seed, "Random seed");

  auto* train_cmd = app.add_subcommand("train", "Train one model on a manifest");
  std::string train_manifest, train_config, train_out;
  std::vector<std::string> train_sets;
  bool train_verbose = false;
  std::int64_t train_seed = -1, train_iters = -1;
  train_cmd->add_option("--manifest", train_manifest, "Training manifest (TSV)")->required();
  train_cmd->add_option("--config", train_config, "Config file (key = value)");
  train_cmd->add_option("--out", train_out, "Checkpoint output directory")->required();
  train_cmd->add_option("--seed", train_seed, "Override the config seed");
  train_cmd->add_option("--iterations", train_iters, "Override the iteration count");
  train_cmd->add_option("--set", train_sets, "Override any config key (key=value)");
  train_cmd->add_flag("--verbose", train_verbose, "Log the loss every 25 iterations");

  auto* predict_cmd = app.add_subcommand("predict", "Segment an image with a checkpoint ensemble");
  std::vector<std::string> predict_ckpts;
  std::string predict_input, predict_out, predict_modality = "auto", predict_config;
  int predict_crop = 0;
  double predict_spacing = 0.0;
  predict_cmd->add_option("--checkpoints", predict_ckpts, "Checkpoint files or quoted globs")
      ->required();
  predict_cmd->add_option("--input", predict_input, "Input image (.mhd)")->required();
  predict_cmd->add_option("--out", predict_out, "Output segmentation (.mhd)")->required();
  predict_cmd->add_option("--modality", predict_modality, "ct, mr or auto")
      ->check(CLI::IsMember({"ct", "mr", "auto"}));
  predict_cmd->add_option("--config", predict_config, "Config file for spacing/crop");
  predict_cmd->add_option("--crop", predict_crop, "Inference crop size override");
  predict_cmd->add_option("--spacing", predict_spacing, "Target spacing override");

  auto* eval_cmd = app.add_subcommand("evaluate", "DSC/HD/ASSD report for a prediction");
  std::string eval_pred, eval_gt, eval_out;
  eval_cmd->add_option("--pred", eval_pred, "Predicted label map (.mhd)")->required();
  eval_cmd->add_option("--gt", eval_gt, "Ground-truth label map (.mhd)")->required();
  eval_cmd->add_option("--out", eval_out, "Also write the CSV report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*synth) return run_synth(synth_out, synth_count, synth_size, synth_spacing, synth_seed);
    if (*train_cmd) {
      std::vector<std::string> overrides = train_sets;
      if (train_seed >= 0) overrides.push_back("seed=" + std::to_string(train_seed));
      if (train_iters >= 0) overrides.push_back("iterations=" + std::to_string(train_iters));
      return run_train(train_manifest, train_config, train_out, overrides, train_verbose);
    }
    if (*predict_cmd)
      return run_predict(predict_ckpts, predict_input, predict_out, predict_modality,
                         predict_config, predict_crop, predict_spacing);
    if (*eval_cmd) return run_evaluate(eval_pred, eval_gt, eval_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
