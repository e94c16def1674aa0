#pragma once

// The end-to-end pipeline: balanced joint training over the CT and MR pools
// and ensemble prediction with EMA weights.

#include <cstdio>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "cardioseg/augment.hpp"
#include "cardioseg/checkpoint.hpp"
#include "cardioseg/config.hpp"
#include "cardioseg/manifest.hpp"
#include "cardioseg/metrics.hpp"
#include "cardioseg/postprocess.hpp"
#include "cardioseg/preprocess.hpp"
#include "cardioseg/randconv.hpp"
#include "cardioseg/unet.hpp"
#include "cardioseg/volume_io.hpp"

namespace cardioseg {

struct PreprocessedSample {
  Volume3 image;   // resampled, cropped, normalized
  LabelMap labels; // resampled, cropped
};

// Training-time preprocessing: resample to isotropic spacing, crop the
// training cube around the foreground center of the labels (image fill is
// the pre-normalization volume minimum), then normalize per modality.
inline PreprocessedSample preprocess_training_sample(const SampleEntry& entry,
                                                     const TrainConfig& cfg) {
  if (entry.labels.empty())
    fail(Errc::manifest, "training requires labeled samples: " + entry.image.string());
  Volume3 image = read_image(entry.image);
  LabelMap labels = read_labels(entry.labels);
  check_same_dims(image.dims, labels.dims, "training sample");

  image = resample(image, cfg.target_spacing, ResampleMode::Trilinear);
  labels = resample(labels, cfg.target_spacing, ResampleMode::Nearest);
  const Vec3d center = foreground_center(labels);
  const float fill = volume_min(image);
  image = crop_to_cube(image, center, cfg.train_crop, fill);
  labels = crop_to_cube(labels, center, cfg.train_crop, 0);
  image = normalize(image, entry.modality);
  return {std::move(image), std::move(labels)};
}

// One augmented training view: spatial warp of image and labels, intensity
// augmentation on the warped label geometry, then RandConv with the
// configured apply probability.
inline PreprocessedSample augment_training_sample(const PreprocessedSample& sample,
                                                  Modality modality, const TrainConfig& cfg,
                                                  Rng& rng) {
  const DisplacementField field = sample_spatial(cfg.spatial, sample.image.dims, rng);
  Volume3 image = apply_field(sample.image, field, Interp::Trilinear, volume_min(sample.image));
  LabelMap labels = apply_field(sample.labels, field, Interp::Nearest, 0);

  std::set<std::uint8_t> present;
  for (std::uint8_t v : labels.data)
    if (v > 0) present.insert(v);
  const IntensityAugParams params = sample_intensity(modality, present, cfg.intensity, rng);
  image = apply_intensity(image, labels, params);

  if (rng.uniform01() < cfg.randconv_prob) image = randconv_augment(image, rng);
  return {std::move(image), std::move(labels)};
}

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::vector<std::filesystem::path> cadence_checkpoints;
  std::vector<double> loss_trace;
};

inline TrainResult train(const TrainConfig& cfg, const DatasetIndex& index,
                         const std::filesystem::path& out_dir, std::ostream* log = nullptr) {
  cfg.validate();
  if (index.ct_pool.empty() || index.mr_pool.empty())
    fail(Errc::sampling, "train: both CT and MR pools must be non-empty");
  std::filesystem::create_directories(out_dir);

  Rng rng(cfg.seed);
  Model<float> model = init_model<float>(cfg.net, rng);

  std::map<std::size_t, PreprocessedSample> cache;
  auto preprocessed = [&](std::size_t entry_idx) -> const PreprocessedSample& {
    auto it = cache.find(entry_idx);
    if (it == cache.end())
      it = cache.emplace(entry_idx,
                         preprocess_training_sample(index.entries[entry_idx], cfg)).first;
    return it->second;
  };

  TrainResult result;
  result.loss_trace.reserve(cfg.iterations);
  Grads<float> grads;
  for (long it = 1; it <= cfg.iterations; ++it) {
    const auto [ct_idx, mr_idx] = sample_joint_batch(index, rng);
    const SampleEntry& ct_entry = index.entries[ct_idx];
    const SampleEntry& mr_entry = index.entries[mr_idx];
    if (ct_entry.modality != Modality::CT || mr_entry.modality != Modality::MR)
      fail(Errc::sampling, "train: batch is not one CT plus one MR sample");

    PreprocessedSample ct = augment_training_sample(preprocessed(ct_idx), Modality::CT, cfg, rng);
    PreprocessedSample mr = augment_training_sample(preprocessed(mr_idx), Modality::MR, cfg, rng);

    JointBatch<float> batch{volume_to_tensor<float>(ct.image), std::move(ct.labels),
                            volume_to_tensor<float>(mr.image), std::move(mr.labels)};
    const double loss = joint_grad(model.net, batch, /*training=*/true, rng, grads);
    if (!std::isfinite(loss))
      fail(Errc::numeric, "train: non-finite loss at iteration " + std::to_string(it));
    adam_step(model.net, grads, model.adam, cfg.learning_rate);
    ema_update(model.net, model.ema, cfg.ema_decay);
    result.loss_trace.push_back(loss);

    if (log && (it % 25 == 0 || it == 1))
      *log << "iter " << it << " loss " << loss << "\n";
    if (cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0 && it != cfg.iterations) {
      char name[48];
      std::snprintf(name, sizeof(name), "ckpt_iter%06ld.ckpt", it);
      const auto path = out_dir / name;
      save_checkpoint(path, model);
      result.cadence_checkpoints.push_back(path);
    }
  }

  result.final_checkpoint = out_dir / "ckpt_final.ckpt";
  save_checkpoint(result.final_checkpoint, model);
  return result;
}

// Mean training-set DSC over foreground classes present in the cropped
// ground truth, evaluated with the given (typically EMA) weights on clean
// preprocessed samples.
inline LabelMap argmax_labels(const Tensor<float>& probs, const Vec3d& spacing) {
  LabelMap out = make_labelmap(probs.dims, spacing);
  const std::size_t plane = probs.plane();
  for (std::size_t i = 0; i < plane; ++i) {
    int best = 0;
    float best_p = probs.v[i];
    for (int c = 1; c < probs.channels; ++c) {
      const float p = probs.v[c * plane + i];
      if (p > best_p) {
        best_p = p;
        best = c;
      }
    }
    out.data[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

inline double training_foreground_dsc(const UNet<float>& net, const TrainConfig& cfg,
                                      const DatasetIndex& index) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const SampleEntry& entry : index.entries) {
    if (entry.labels.empty()) continue;
    const PreprocessedSample s = preprocess_training_sample(entry, cfg);
    const Tensor<float> probs = net.forward(volume_to_tensor<float>(s.image), false, nullptr,
                                            nullptr);
    const LabelMap pred = argmax_labels(probs, s.labels.spacing);
    for (std::uint8_t cls = 1; cls <= kMaxLabel; ++cls) {
      if (detail::class_count(s.labels, cls) == 0) continue;
      sum += dsc_percent(pred, s.labels, cls) / 100.0;
      ++count;
    }
  }
  if (count == 0) fail(Errc::empty_foreground, "training_foreground_dsc: no foreground classes");
  return sum / double(count);
}

// ---------------------------------------------------------------------------
// Ensemble prediction.

struct PredictOptions {
  double target_spacing = 1.5;
  int infer_crop = 192;
  int cc_connectivity = 26;
};

struct PredictResult {
  LabelMap labels;       // on the input grid
  Tensor<float> probs;   // ensemble-mean probabilities on the cropped grid
};

inline PredictResult predict_ensemble(std::vector<std::filesystem::path> checkpoints,
                                      const Volume3& input, Modality modality,
                                      const PredictOptions& opt = {}) {
  if (checkpoints.empty()) fail(Errc::config, "predict: need at least one checkpoint");
  // Deterministic summation order regardless of how the caller ordered them.
  std::sort(checkpoints.begin(), checkpoints.end());

  std::vector<Model<float>> models;
  models.reserve(checkpoints.size());
  for (const auto& path : checkpoints) models.push_back(load_checkpoint(path));
  for (const auto& m : models)
    if (!(m.net.cfg == models.front().net.cfg))
      fail(Errc::config, "predict: checkpoints have incompatible configurations");
  const int div = 1 << (models.front().net.cfg.levels - 1);
  if (opt.infer_crop % div)
    fail(Errc::config, "predict: inference crop not divisible by 2^(levels-1)");

  Volume3 resampled = resample(input, opt.target_spacing, ResampleMode::Trilinear);
  const Vec3i rdims = resampled.dims;
  const Vec3d center = grid_center(rdims);
  Volume3 cropped = crop_to_cube(resampled, center, opt.infer_crop, volume_min(resampled));
  resampled = Volume3{};
  Volume3 normalized = normalize(cropped, modality);
  cropped = Volume3{};

  const Tensor<float> in_tensor = volume_to_tensor<float>(normalized);
  Tensor<float> mean;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const UNet<float> ema_net = with_weights(models[i].net, models[i].ema.t);
    Tensor<float> probs = ema_net.forward(in_tensor, false, nullptr, nullptr);
    if (i == 0) mean = std::move(probs);
    else
      for (std::size_t j = 0; j < mean.v.size(); ++j) mean.v[j] += probs.v[j];
  }
  if (models.size() > 1) {
    const float inv = 1.0f / float(models.size());
    for (float& v : mean.v) v *= inv;
  }

  const Vec3d iso{opt.target_spacing, opt.target_spacing, opt.target_spacing};
  LabelMap crop_labels = argmax_labels(mean, iso);
  crop_labels = largest_cc_filter(crop_labels, opt.cc_connectivity);

  // Map the cropped prediction back onto the input grid (nearest neighbour),
  // inverting the center crop and the resampling.
  LabelMap out = make_labelmap(input.dims, input.spacing);
  const int half = opt.infer_crop / 2;
  const Vec3i coff{int(std::llround(center.x)) - half, int(std::llround(center.y)) - half,
                   int(std::llround(center.z)) - half};
  const double rx = input.spacing.x / opt.target_spacing;
  const double ry = input.spacing.y / opt.target_spacing;
  const double rz = input.spacing.z / opt.target_spacing;
  std::size_t i = 0;
  for (int z = 0; z < input.dims.z; ++z) {
    const double oz = (z + 0.5) * rz - 0.5 - coff.z;
    for (int y = 0; y < input.dims.y; ++y) {
      const double oy = (y + 0.5) * ry - 0.5 - coff.y;
      for (int x = 0; x < input.dims.x; ++x, ++i) {
        const double ox = (x + 0.5) * rx - 0.5 - coff.x;
        out.data[i] = sample_nearest(crop_labels.dims, crop_labels.data.data(), ox, oy, oz,
                                     Boundary::Fill, std::uint8_t(0));
      }
    }
  }
  return {std::move(out), std::move(mean)};
}

}  // namespace cardioseg
