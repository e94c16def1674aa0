#pragma once

// RandConv augmentation: a freshly randomized, never-trained shallow
// convolutional stack applied to the image, blended with the input and
// re-normalized to the input's Frobenius norm so training gradients stay
// bounded.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cardioseg/errors.hpp"
#include "cardioseg/rng.hpp"
#include "cardioseg/tensor.hpp"
#include "cardioseg/volume.hpp"

namespace cardioseg {

// Four convolution layers, channel plan 1 -> 2 -> 2 -> 2 -> 1, one shared
// kernel size k in {1, 3} per instantiation, weights ~ N(0, 1), no biases,
// leaky ReLU (slope 0.1) between layers and none after the last.
struct RandConvNet {
  static constexpr int kLayers = 4;
  static constexpr std::array<int, kLayers + 1> kChannels{1, 2, 2, 2, 1};
  static constexpr double kLeakySlope = 0.1;

  int kernel_size = 3;
  std::array<std::vector<float>, kLayers> weights;  // [co][ci][kz][ky][kx]
};

inline RandConvNet sample_randconv(Rng& rng) {
  RandConvNet net;
  net.kernel_size = rng.uniform_int(0, 1) == 0 ? 1 : 3;
  const int k3 = net.kernel_size * net.kernel_size * net.kernel_size;
  for (int layer = 0; layer < RandConvNet::kLayers; ++layer) {
    const int cin = RandConvNet::kChannels[layer];
    const int cout = RandConvNet::kChannels[layer + 1];
    net.weights[layer].resize(static_cast<std::size_t>(cout) * cin * k3);
    for (float& w : net.weights[layer]) w = static_cast<float>(rng.normal(0.0, 1.0));
  }
  return net;
}

inline Volume3 randconv_forward(const RandConvNet& net, const Volume3& vol) {
  for (float v : vol.data)
    if (!std::isfinite(v)) fail(Errc::numeric, "randconv_forward: non-finite input");
  static const std::vector<float> no_bias;
  Tensor<float> x = volume_to_tensor<float>(vol);
  for (int layer = 0; layer < RandConvNet::kLayers; ++layer) {
    Tensor<float> y;
    conv3d_forward(x, net.weights[layer], no_bias, net.kernel_size,
                   RandConvNet::kChannels[layer + 1], y);
    if (layer + 1 < RandConvNet::kLayers) leaky_relu_inplace(y, RandConvNet::kLeakySlope);
    x = std::move(y);
  }
  return tensor_to_volume(x, vol.spacing);
}

inline double frobenius_norm(const Volume3& vol) {
  double s = 0.0;
  for (float v : vol.data) s += double(v) * double(v);
  return std::sqrt(s);
}

// b = alpha * rc_out + (1 - alpha) * vol, rescaled so the output keeps the
// input's Frobenius norm. A vanishing blend norm falls back to the input.
inline Volume3 blend_renorm(const Volume3& vol, const Volume3& rc_out, double alpha) {
  check_same_dims(vol.dims, rc_out.dims, "blend_renorm");
  if (alpha < 0.0 || alpha > 1.0) fail(Errc::config, "blend_renorm: alpha must be in [0, 1]");
  Volume3 blend = make_volume(vol.dims, vol.spacing);
  const float a = static_cast<float>(alpha);
  const float one_minus = static_cast<float>(1.0 - alpha);
  for (std::size_t i = 0; i < vol.data.size(); ++i)
    blend.data[i] = a * rc_out.data[i] + one_minus * vol.data[i];
  const double norm_in = frobenius_norm(vol);
  const double norm_blend = frobenius_norm(blend);
  if (norm_blend < 1e-12) return vol;
  const float scale = static_cast<float>(norm_in / norm_blend);
  for (float& v : blend.data) v *= scale;
  return blend;
}

// Convenience: full RandConv augmentation of one image.
inline Volume3 randconv_augment(const Volume3& vol, Rng& rng) {
  const RandConvNet net = sample_randconv(rng);
  const Volume3 rc = randconv_forward(net, vol);
  const double alpha = rng.uniform01();
  return blend_renorm(vol, rc, alpha);
}

}  // namespace cardioseg
