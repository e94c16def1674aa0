#pragma once

// Flat `key = value` configuration mirroring every training and augmentation
// field. CLI flags override file values; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "cardioseg/augment.hpp"
#include "cardioseg/detail/textio.hpp"
#include "cardioseg/errors.hpp"
#include "cardioseg/unet.hpp"

namespace cardioseg {

struct TrainConfig {
  long iterations = 300;
  std::uint64_t seed = 1;
  NetConfig net;  // desk defaults: 2 levels, 8 filters
  double learning_rate = kDefaultLearningRate;
  double ema_decay = kDefaultEmaDecay;
  double target_spacing = 1.5;
  int train_crop = 128;
  int infer_crop = 192;
  SpatialAugConfig spatial;
  IntensityAugConfig intensity;
  double randconv_prob = 1.0;
  long checkpoint_every = 0;  // 0 = final checkpoint only
  int cc_connectivity = 26;

  void validate() const {
    if (iterations < 1) fail(Errc::config, "config: iterations must be >= 1");
    net.validate();
    spatial.validate();
    intensity.validate();
    if (learning_rate <= 0) fail(Errc::config, "config: learning_rate must be > 0");
    if (ema_decay < 0 || ema_decay >= 1) fail(Errc::config, "config: ema_decay must be in [0, 1)");
    if (target_spacing <= 0) fail(Errc::config, "config: target_spacing must be > 0");
    if (randconv_prob < 0 || randconv_prob > 1)
      fail(Errc::config, "config: randconv_prob must be in [0, 1]");
    if (checkpoint_every < 0) fail(Errc::config, "config: checkpoint_every must be >= 0");
    const int div = 1 << (net.levels - 1);
    if (train_crop < 1 || train_crop % div || infer_crop < 1 || infer_crop % div)
      fail(Errc::config, "config: crop sizes must be positive and divisible by 2^(levels-1)");
    if (cc_connectivity != 6 && cc_connectivity != 26)
      fail(Errc::config, "config: cc_connectivity must be 6 or 26");
  }
};

inline void apply_config_entry(TrainConfig& cfg, const std::string& key,
                               const std::string& value) {
  auto as_int = [&] { return detail::parse_int(value, Errc::config, key); };
  auto as_real = [&] { return detail::parse_double(value, Errc::config, key); };
  if (key == "iterations") cfg.iterations = as_int();
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(as_int());
  else if (key == "levels") cfg.net.levels = int(as_int());
  else if (key == "filters") cfg.net.filters = int(as_int());
  else if (key == "dropout_rate") cfg.net.dropout_rate = as_real();
  else if (key == "leaky_slope") cfg.net.leaky_slope = as_real();
  else if (key == "classes") cfg.net.classes = int(as_int());
  else if (key == "learning_rate") cfg.learning_rate = as_real();
  else if (key == "ema_decay") cfg.ema_decay = as_real();
  else if (key == "target_spacing") cfg.target_spacing = as_real();
  else if (key == "train_crop") cfg.train_crop = int(as_int());
  else if (key == "infer_crop") cfg.infer_crop = int(as_int());
  else if (key == "max_translation") cfg.spatial.max_translation = as_real();
  else if (key == "max_rotation") cfg.spatial.max_rotation = as_real();
  else if (key == "scale_lo") cfg.spatial.scale_lo = as_real();
  else if (key == "scale_hi") cfg.spatial.scale_hi = as_real();
  else if (key == "elastic_grid_nodes") cfg.spatial.elastic_grid_nodes = int(as_int());
  else if (key == "max_elastic") cfg.spatial.max_elastic = as_real();
  else if (key == "intensity_shift") cfg.intensity.max_shift = as_real();
  else if (key == "ct_scale_lo") cfg.intensity.ct_scale_lo = as_real();
  else if (key == "ct_scale_hi") cfg.intensity.ct_scale_hi = as_real();
  else if (key == "mr_scale_lo") cfg.intensity.mr_scale_lo = as_real();
  else if (key == "mr_scale_hi") cfg.intensity.mr_scale_hi = as_real();
  else if (key == "label_shift") cfg.intensity.label_shift = as_real();
  else if (key == "label_scale_lo") cfg.intensity.label_scale_lo = as_real();
  else if (key == "label_scale_hi") cfg.intensity.label_scale_hi = as_real();
  else if (key == "randconv_prob") cfg.randconv_prob = as_real();
  else if (key == "checkpoint_every") cfg.checkpoint_every = as_int();
  else if (key == "cc_connectivity") cfg.cc_connectivity = int(as_int());
  else fail(Errc::config, "config: unknown key '" + key + "'");
}

inline TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open config file: " + path.string());
  TrainConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    const auto stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    std::string_view key, value;
    if (!detail::split_key_value(stripped, key, value))
      fail(Errc::config, "config: expected 'key = value', got '" + std::string(stripped) + "'");
    apply_config_entry(cfg, std::string(key), std::string(value));
  }
  return cfg;
}

}  // namespace cardioseg
