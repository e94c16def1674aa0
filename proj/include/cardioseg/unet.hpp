#pragma once

// Miniature 3D U-Net with hand-written reverse-mode differentiation.
// Contracting/expanding paths with skip concatenation; every level runs two
// 3^3 convolutions with leaky ReLU and a dropout layer between them;
// downsampling is 2x average pooling, upsampling 2x trilinear; the final
// 1x1x1 classifier has no activation and feeds a channel softmax.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cardioseg/errors.hpp"
#include "cardioseg/rng.hpp"
#include "cardioseg/tensor.hpp"
#include "cardioseg/volume.hpp"

namespace cardioseg {

struct NetConfig {
  int levels = 2;
  int filters = 8;
  double dropout_rate = 0.1;
  double leaky_slope = 0.1;
  int classes = kNumClasses;

  void validate() const {
    if (levels < 1) fail(Errc::config, "NetConfig: levels must be >= 1");
    if (filters < 1) fail(Errc::config, "NetConfig: filters must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      fail(Errc::config, "NetConfig: dropout_rate must be in [0, 1)");
    if (classes < 2) fail(Errc::config, "NetConfig: classes must be >= 2");
  }

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

template <typename T>
struct ConvParam {
  int cin = 0, cout = 0, k = 3;
  std::vector<T> w, b;
};

template <typename T>
struct BlockCache {
  Tensor<T> in;                    // first conv input
  Tensor<T> a0;                    // first conv output, post-activation
  std::vector<std::uint8_t> mask;  // dropout mask (empty = identity)
  Tensor<T> d;                     // post-dropout, second conv input
  Tensor<T> a1;                    // second conv output, post-activation
};

template <typename T>
struct ForwardCache {
  std::vector<BlockCache<T>> enc;
  std::vector<BlockCache<T>> dec;
  Tensor<T> cls_in;
  Tensor<T> probs;
};

// Per-parameter-tensor gradient list in visitation order.
template <typename T>
struct Grads {
  std::vector<std::vector<T>> t;
};

template <typename T>
struct UNet {
  NetConfig cfg;
  std::vector<std::array<ConvParam<T>, 2>> enc;  // one per level
  std::vector<std::array<ConvParam<T>, 2>> dec;  // levels-1, indexed by level
  ConvParam<T> classifier;                       // 1x1x1, filters -> classes

  // Fixed tensor order: encoder levels top-down, decoder levels top-down,
  // classifier last; w before b. Checkpoints, Adam state and the EMA shadow
  // all key off this order.
  template <typename F>
  void visit_params(F&& f) {
    for (int l = 0; l < cfg.levels; ++l)
      for (int j = 0; j < 2; ++j) {
        const std::string base = "enc" + std::to_string(l) + ".conv" + std::to_string(j);
        f(base + ".w", enc[l][j].w);
        f(base + ".b", enc[l][j].b);
      }
    for (int l = 0; l + 1 < cfg.levels; ++l)
      for (int j = 0; j < 2; ++j) {
        const std::string base = "dec" + std::to_string(l) + ".conv" + std::to_string(j);
        f(base + ".w", dec[l][j].w);
        f(base + ".b", dec[l][j].b);
      }
    f("cls.w", classifier.w);
    f("cls.b", classifier.b);
  }

  template <typename F>
  void visit_params(F&& f) const {
    const_cast<UNet*>(this)->visit_params(
        [&f](const std::string& name, const std::vector<T>& v) { f(name, v); });
  }

  int tensor_count() const { return 4 * cfg.levels + 4 * (cfg.levels - 1) + 2; }

  // Grad slot bases in visitation order.
  int slot_enc(int level, int conv) const { return 4 * level + 2 * conv; }
  int slot_dec(int level, int conv) const { return 4 * cfg.levels + 4 * level + 2 * conv; }
  int slot_cls() const { return 4 * cfg.levels + 4 * (cfg.levels - 1); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit_params([&n](const std::string&, const std::vector<T>& v) { n += v.size(); });
    return n;
  }

  Tensor<T> forward(const Tensor<T>& input, bool training, Rng* rng,
                    ForwardCache<T>* cache) const;
  void backward(const ForwardCache<T>& cache, const Tensor<T>& glogits, Grads<T>& grads) const;

 private:
  Tensor<T> block_forward(const std::array<ConvParam<T>, 2>& convs, Tensor<T>&& x,
                          bool training, Rng* rng, BlockCache<T>* bc) const;
  Tensor<T> block_backward(const std::array<ConvParam<T>, 2>& convs, Tensor<T>&& ga1,
                           const BlockCache<T>& bc, Grads<T>& grads, int slot_base) const;
  Tensor<T> forward_level(int level, Tensor<T>&& x, bool training, Rng* rng,
                          ForwardCache<T>* cache) const;
  Tensor<T> backward_level(int level, Tensor<T>&& gy, const ForwardCache<T>& cache,
                           Grads<T>& grads) const;
};

namespace detail {

inline int conv_cin(const NetConfig& cfg, bool encoder, int level, int conv) {
  if (conv == 1) return cfg.filters;
  if (!encoder) return 2 * cfg.filters;  // skip + upsampled
  return level == 0 ? 1 : cfg.filters;
}

}  // namespace detail

// Zero-weight net with all shapes laid out for the given config.
template <typename T>
UNet<T> build_unet(const NetConfig& cfg) {
  cfg.validate();
  UNet<T> net;
  net.cfg = cfg;
  net.enc.resize(cfg.levels);
  net.dec.resize(cfg.levels - 1);

  auto shape_conv = [](ConvParam<T>& c, int cin, int cout, int k) {
    c.cin = cin;
    c.cout = cout;
    c.k = k;
    c.w.assign(static_cast<std::size_t>(cout) * cin * k * k * k, T(0));
    c.b.assign(cout, T(0));
  };

  for (int l = 0; l < cfg.levels; ++l) {
    shape_conv(net.enc[l][0], detail::conv_cin(cfg, true, l, 0), cfg.filters, 3);
    shape_conv(net.enc[l][1], cfg.filters, cfg.filters, 3);
  }
  for (int l = 0; l + 1 < cfg.levels; ++l) {
    shape_conv(net.dec[l][0], detail::conv_cin(cfg, false, l, 0), cfg.filters, 3);
    shape_conv(net.dec[l][1], cfg.filters, cfg.filters, 3);
  }
  shape_conv(net.classifier, cfg.filters, cfg.classes, 1);
  return net;
}

// He initialization: kernel entries ~ N(0, sqrt(2/fan_in)), biases zero.
// Draw order equals visitation order, so a seed pins the whole net.
template <typename T>
UNet<T> he_init(const NetConfig& cfg, Rng& rng) {
  UNet<T> net = build_unet<T>(cfg);
  auto fill = [&rng](ConvParam<T>& c) {
    const double fan_in = double(c.cin) * c.k * c.k * c.k;
    const double stddev = std::sqrt(2.0 / fan_in);
    for (T& v : c.w) v = static_cast<T>(rng.normal(0.0, stddev));
  };
  for (auto& level : net.enc) {
    fill(level[0]);
    fill(level[1]);
  }
  for (auto& level : net.dec) {
    fill(level[0]);
    fill(level[1]);
  }
  fill(net.classifier);
  return net;
}

template <typename T>
Tensor<T> UNet<T>::block_forward(const std::array<ConvParam<T>, 2>& convs, Tensor<T>&& x,
                                 bool training, Rng* rng, BlockCache<T>* bc) const {
  Tensor<T> a0;
  conv3d_forward(x, convs[0].w, convs[0].b, convs[0].k, convs[0].cout, a0);
  if (bc) bc->in = std::move(x);
  x = Tensor<T>{};
  leaky_relu_inplace(a0, cfg.leaky_slope);
  if (bc) bc->a0 = a0;
  std::vector<std::uint8_t> mask;
  if (training && cfg.dropout_rate > 0.0) {
    if (!rng) fail(Errc::config, "forward: training mode with dropout requires an rng");
    dropout_forward(a0, cfg.dropout_rate, *rng, mask);
  }
  Tensor<T> a1;
  conv3d_forward(a0, convs[1].w, convs[1].b, convs[1].k, convs[1].cout, a1);
  if (bc) {
    bc->mask = std::move(mask);
    bc->d = std::move(a0);
  }
  a0 = Tensor<T>{};
  leaky_relu_inplace(a1, cfg.leaky_slope);
  if (bc) bc->a1 = a1;
  return a1;
}

template <typename T>
Tensor<T> UNet<T>::forward_level(int level, Tensor<T>&& x, bool training, Rng* rng,
                                 ForwardCache<T>* cache) const {
  BlockCache<T>* ebc = cache ? &cache->enc[level] : nullptr;
  Tensor<T> skip = block_forward(enc[level], std::move(x), training, rng, ebc);
  if (level == cfg.levels - 1) return skip;

  Tensor<T> pooled = avgpool2_forward(skip);
  Tensor<T> below = forward_level(level + 1, std::move(pooled), training, rng, cache);
  Tensor<T> up = upsample2_forward(below);
  below = Tensor<T>{};
  Tensor<T> cat = concat_channels(skip, up);
  skip = Tensor<T>{};
  up = Tensor<T>{};
  BlockCache<T>* dbc = cache ? &cache->dec[level] : nullptr;
  return block_forward(dec[level], std::move(cat), training, rng, dbc);
}

template <typename T>
Tensor<T> UNet<T>::forward(const Tensor<T>& input, bool training, Rng* rng,
                           ForwardCache<T>* cache) const {
  if (input.channels != 1) fail(Errc::shape, "forward: expected a single input channel");
  const int div = 1 << (cfg.levels - 1);
  if (input.dims.x % div || input.dims.y % div || input.dims.z % div)
    fail(Errc::shape, "forward: input dims must be divisible by 2^(levels-1)");
  if (cache) {
    cache->enc.assign(cfg.levels, BlockCache<T>{});
    cache->dec.assign(cfg.levels - 1, BlockCache<T>{});
  }
  Tensor<T> x = input;
  Tensor<T> top = forward_level(0, std::move(x), training, rng, cache);
  Tensor<T> logits;
  conv3d_forward(top, classifier.w, classifier.b, classifier.k, classifier.cout, logits);
  if (cache) cache->cls_in = std::move(top);
  top = Tensor<T>{};
  softmax_channels_inplace(logits);
  if (cache) cache->probs = logits;
  return logits;
}

template <typename T>
Tensor<T> UNet<T>::block_backward(const std::array<ConvParam<T>, 2>& convs, Tensor<T>&& ga1,
                                  const BlockCache<T>& bc, Grads<T>& grads,
                                  int slot_base) const {
  leaky_relu_backward(bc.a1, cfg.leaky_slope, ga1);
  Tensor<T> gd;
  conv3d_backward(bc.d, convs[1].w, convs[1].k, convs[1].cout, ga1, &gd,
                  &grads.t[slot_base + 2], &grads.t[slot_base + 3]);
  dropout_backward(gd, cfg.dropout_rate, bc.mask);
  leaky_relu_backward(bc.a0, cfg.leaky_slope, gd);
  Tensor<T> gin;
  conv3d_backward(bc.in, convs[0].w, convs[0].k, convs[0].cout, gd, &gin,
                  &grads.t[slot_base + 0], &grads.t[slot_base + 1]);
  return gin;
}

template <typename T>
Tensor<T> UNet<T>::backward_level(int level, Tensor<T>&& gy, const ForwardCache<T>& cache,
                                  Grads<T>& grads) const {
  if (level == cfg.levels - 1)
    return block_backward(enc[level], std::move(gy), cache.enc[level], grads,
                          slot_enc(level, 0));

  Tensor<T> gcat =
      block_backward(dec[level], std::move(gy), cache.dec[level], grads, slot_dec(level, 0));
  Tensor<T> gskip, gup;
  split_channels(gcat, cfg.filters, gskip, gup);
  gcat = Tensor<T>{};
  const Vec3i below_dims{gskip.dims.x / 2, gskip.dims.y / 2, gskip.dims.z / 2};
  Tensor<T> gbelow = upsample2_backward(gup, below_dims);
  gup = Tensor<T>{};
  Tensor<T> gpooled = backward_level(level + 1, std::move(gbelow), cache, grads);
  Tensor<T> gskip2 = avgpool2_backward(gpooled, gskip.dims);
  for (std::size_t i = 0; i < gskip.v.size(); ++i) gskip.v[i] += gskip2.v[i];
  gskip2 = Tensor<T>{};
  return block_backward(enc[level], std::move(gskip), cache.enc[level], grads,
                        slot_enc(level, 0));
}

template <typename T>
void UNet<T>::backward(const ForwardCache<T>& cache, const Tensor<T>& glogits,
                       Grads<T>& grads) const {
  if (grads.t.empty()) grads.t.resize(tensor_count());
  Tensor<T> gtop;
  conv3d_backward(cache.cls_in, classifier.w, classifier.k, classifier.cout, glogits, &gtop,
                  &grads.t[slot_cls()], &grads.t[slot_cls() + 1]);
  backward_level(0, std::move(gtop), cache, grads);
}

// Volume-level entry point; training mode draws fresh dropout masks from rng.
template <typename T>
Tensor<T> unet_forward(const UNet<T>& net, const Volume3& vol, bool training,
                       Rng* rng = nullptr) {
  return net.forward(volume_to_tensor<T>(vol), training, rng, nullptr);
}

// ---------------------------------------------------------------------------
// Generalized Dice loss with squared-reciprocal class-volume weights; classes
// absent from the ground truth get weight 0 and drop out of both sums.
// loss = 1 - 2*(sum_c w_c I_c + eps) / (sum_c w_c S_c + eps).

inline constexpr double kDiceEps = 1e-5;

template <typename T>
double generalized_dice_loss(const Tensor<T>& probs, const LabelMap& gt,
                             Tensor<T>* gprobs = nullptr) {
  check_same_dims(probs.dims, gt.dims, "generalized_dice_loss");
  const int classes = probs.channels;
  const std::size_t plane = probs.plane();

  std::vector<double> gt_count(classes, 0.0);
  for (std::size_t i = 0; i < plane; ++i) {
    if (gt.data[i] >= classes)
      fail(Errc::shape, "generalized_dice_loss: label exceeds class count");
    gt_count[gt.data[i]] += 1.0;
  }
  std::vector<double> weight(classes, 0.0);
  for (int c = 0; c < classes; ++c)
    if (gt_count[c] > 0.0) weight[c] = 1.0 / (gt_count[c] * gt_count[c]);

  double num = 0.0, den = 0.0;
  for (int c = 0; c < classes; ++c) {
    if (weight[c] == 0.0) continue;
    const T* p = probs.channel(c);
    double inter = 0.0, psum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const double pv = double(p[i]);
      psum += pv;
      if (gt.data[i] == c) inter += pv;
    }
    num += weight[c] * inter;
    den += weight[c] * (psum + gt_count[c]);
  }
  const double N = num + kDiceEps;
  const double D = den + kDiceEps;
  const double loss = 1.0 - 2.0 * N / D;

  if (gprobs) {
    *gprobs = Tensor<T>(classes, probs.dims);
    const double inv_d2 = 1.0 / (D * D);
    for (int c = 0; c < classes; ++c) {
      T* g = gprobs->channel(c);
      if (weight[c] == 0.0) continue;  // class absent: no gradient path
      for (std::size_t i = 0; i < plane; ++i) {
        const double gcv = gt.data[i] == c ? 1.0 : 0.0;
        g[i] = static_cast<T>(-2.0 * weight[c] * (gcv * D - N) * inv_d2);
      }
    }
  }
  return loss;
}

inline double joint_loss(double loss_ct, double loss_mr) { return (loss_ct + loss_mr) / 2.0; }

// ---------------------------------------------------------------------------
// Joint objective gradient over one balanced (CT, MR) batch with shared
// weights. Dropout masks are drawn once per forward pass and reused in the
// backward pass.

template <typename T>
struct JointBatch {
  Tensor<T> ct_image;
  LabelMap ct_labels;
  Tensor<T> mr_image;
  LabelMap mr_labels;
};

template <typename T>
double joint_grad(const UNet<T>& net, const JointBatch<T>& batch, bool training, Rng& rng,
                  Grads<T>& grads) {
  grads.t.assign(net.tensor_count(), {});

  auto half = [&](const Tensor<T>& image, const LabelMap& labels) {
    ForwardCache<T> cache;
    Tensor<T> probs = net.forward(image, training, &rng, &cache);
    Tensor<T> gprobs;
    const double loss = generalized_dice_loss(probs, labels, &gprobs);
    for (T& g : gprobs.v) g *= T(0.5);  // d(joint)/d(loss_sample) = 1/2
    Tensor<T> glogits = softmax_backward(cache.probs, gprobs);
    gprobs = Tensor<T>{};
    net.backward(cache, glogits, grads);
    return loss;
  };

  const double loss_ct = half(batch.ct_image, batch.ct_labels);
  const double loss_mr = half(batch.mr_image, batch.mr_labels);
  return joint_loss(loss_ct, loss_mr);
}

// ---------------------------------------------------------------------------
// Adam with bias correction, and the temporal (EMA) weight shadow used for
// inference.

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m, v;
  long step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;
inline constexpr double kDefaultLearningRate = 5e-5;
inline constexpr double kDefaultEmaDecay = 0.999;

template <typename T>
void adam_step(UNet<T>& net, const Grads<T>& grads, AdamState<T>& state,
               double lr = kDefaultLearningRate, double beta1 = kAdamBeta1,
               double beta2 = kAdamBeta2, double eps = kAdamEps) {
  if (state.m.empty()) {
    state.m.resize(net.tensor_count());
    state.v.resize(net.tensor_count());
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(beta2, double(state.step));
  int idx = 0;
  net.visit_params([&](const std::string&, std::vector<T>& p) {
    auto& m = state.m[idx];
    auto& v = state.v[idx];
    const auto& g = grads.t[idx];
    if (m.size() != p.size()) m.assign(p.size(), T(0));
    if (v.size() != p.size()) v.assign(p.size(), T(0));
    if (g.size() != p.size()) fail(Errc::shape, "adam_step: gradient shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = double(g[i]);
      const double mi = beta1 * double(m[i]) + (1.0 - beta1) * gi;
      const double vi = beta2 * double(v[i]) + (1.0 - beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      p[i] = static_cast<T>(double(p[i]) - lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps));
    }
    ++idx;
  });
}

template <typename T>
struct EmaShadow {
  std::vector<std::vector<T>> t;
};

template <typename T>
EmaShadow<T> make_ema_shadow(const UNet<T>& net) {
  EmaShadow<T> s;
  net.visit_params(
      [&s](const std::string&, const std::vector<T>& p) { s.t.push_back(p); });
  return s;
}

// shadow <- decay * shadow + (1 - decay) * current
template <typename T>
void ema_update(const UNet<T>& net, EmaShadow<T>& shadow, double decay = kDefaultEmaDecay) {
  int idx = 0;
  net.visit_params([&](const std::string&, const std::vector<T>& p) {
    auto& s = shadow.t[idx++];
    if (s.size() != p.size()) fail(Errc::shape, "ema_update: shadow shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i)
      s[i] = static_cast<T>(decay * double(s[i]) + (1.0 - decay) * double(p[i]));
  });
}

template <typename T>
UNet<T> with_weights(const UNet<T>& net, const std::vector<std::vector<T>>& tensors) {
  UNet<T> out = net;
  int idx = 0;
  out.visit_params([&](const std::string&, std::vector<T>& p) {
    if (tensors[idx].size() != p.size()) fail(Errc::shape, "with_weights: shape mismatch");
    p = tensors[idx++];
  });
  return out;
}

// The full trainable state: raw weights, EMA shadow, optimizer state.
template <typename T>
struct Model {
  UNet<T> net;
  EmaShadow<T> ema;
  AdamState<T> adam;
};

template <typename T>
Model<T> init_model(const NetConfig& cfg, Rng& rng) {
  Model<T> m;
  m.net = he_init<T>(cfg, rng);
  m.ema = make_ema_shadow(m.net);
  m.adam.m.resize(m.net.tensor_count());
  m.adam.v.resize(m.net.tensor_count());
  int idx = 0;
  m.net.visit_params([&](const std::string&, const std::vector<T>& p) {
    m.adam.m[idx].assign(p.size(), T(0));
    m.adam.v[idx].assign(p.size(), T(0));
    ++idx;
  });
  return m;
}

}  // namespace cardioseg
