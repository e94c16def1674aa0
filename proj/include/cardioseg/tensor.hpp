#pragma once

// Minimal dense channel-major tensors and the handful of layer primitives
// the segmentation network needs, each with its reverse-mode counterpart.
// Templated on the scalar type: float for training/inference, double for
// finite-difference verification.

#include <cmath>
#include <cstdint>
#include <vector>

#include "cardioseg/errors.hpp"
#include "cardioseg/rng.hpp"
#include "cardioseg/volume.hpp"

namespace cardioseg {

// Layout: v[((c * nz + z) * ny + y) * nx + x], x fastest.
template <typename T>
struct Tensor {
  int channels = 0;
  Vec3i dims;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int c, Vec3i d)
      : channels(c), dims(d), v(static_cast<std::size_t>(c) * voxel_count(d)) {}

  std::size_t plane() const { return voxel_count(dims); }
  std::size_t size() const { return v.size(); }

  T* channel(int c) { return v.data() + static_cast<std::size_t>(c) * plane(); }
  const T* channel(int c) const { return v.data() + static_cast<std::size_t>(c) * plane(); }

  T& at(int c, int x, int y, int z) {
    return v[static_cast<std::size_t>(c) * plane() + linear_index(dims, x, y, z)];
  }
  T at(int c, int x, int y, int z) const {
    return v[static_cast<std::size_t>(c) * plane() + linear_index(dims, x, y, z)];
  }
};

template <typename T>
Tensor<T> volume_to_tensor(const Volume3& vol) {
  Tensor<T> t(1, vol.dims);
  for (std::size_t i = 0; i < vol.data.size(); ++i) t.v[i] = static_cast<T>(vol.data[i]);
  return t;
}

template <typename T>
Volume3 tensor_to_volume(const Tensor<T>& t, const Vec3d& spacing) {
  if (t.channels != 1) fail(Errc::shape, "tensor_to_volume: expected a single channel");
  Volume3 v = make_volume(t.dims, spacing);
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<float>(t.v[i]);
  return v;
}

// ---------------------------------------------------------------------------
// Convolution, kernel k x k x k (k odd), stride 1, zero "same" padding.
// Weight layout: w[(((co * cin) + ci) * k + kz) * k + ky) * k + kx].

template <typename T>
void conv3d_forward(const Tensor<T>& in, const std::vector<T>& w, const std::vector<T>& bias,
                    int k, int cout, Tensor<T>& out) {
  const int cin = in.channels;
  const Vec3i d = in.dims;
  const int pad = k / 2;
  if (w.size() != static_cast<std::size_t>(cout) * cin * k * k * k)
    fail(Errc::shape, "conv3d: weight size mismatch");
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(cout))
    fail(Errc::shape, "conv3d: bias size mismatch");
  if (out.channels != cout || !(out.dims == d)) out = Tensor<T>(cout, d);

  const std::size_t row = static_cast<std::size_t>(d.x);
  const std::size_t slice = row * d.y;
  for (int co = 0; co < cout; ++co) {
    const T b = bias.empty() ? T(0) : bias[co];
    T* outc = out.channel(co);
    for (int z = 0; z < d.z; ++z) {
      for (int y = 0; y < d.y; ++y) {
        T* acc = outc + z * slice + y * row;
        for (int x = 0; x < d.x; ++x) acc[x] = b;
        for (int ci = 0; ci < cin; ++ci) {
          const T* inc = in.channel(ci);
          const T* wc = w.data() + (static_cast<std::size_t>(co) * cin + ci) * k * k * k;
          for (int kz = 0; kz < k; ++kz) {
            const int zz = z + kz - pad;
            if (zz < 0 || zz >= d.z) continue;
            for (int ky = 0; ky < k; ++ky) {
              const int yy = y + ky - pad;
              if (yy < 0 || yy >= d.y) continue;
              const T* src = inc + zz * slice + yy * row;
              const T* wrow = wc + (static_cast<std::size_t>(kz) * k + ky) * k;
              for (int kx = 0; kx < k; ++kx) {
                const T wv = wrow[kx];
                const int ox = kx - pad;
                const int x0 = ox < 0 ? -ox : 0;
                const int x1 = ox > 0 ? d.x - ox : d.x;
                const T* s = src + ox;
                for (int x = x0; x < x1; ++x) acc[x] += wv * s[x];
              }
            }
          }
        }
      }
    }
  }
}

// Gradients w.r.t. input, weights and bias given d(loss)/d(out). gin is
// overwritten; gw/gb are accumulated into (sized and zeroed when empty) so a
// caller can sum contributions from several samples.
template <typename T>
void conv3d_backward(const Tensor<T>& in, const std::vector<T>& w, int k, int cout,
                     const Tensor<T>& gout, Tensor<T>* gin, std::vector<T>* gw,
                     std::vector<T>* gb) {
  const int cin = in.channels;
  const Vec3i d = in.dims;
  const int pad = k / 2;
  const std::size_t row = static_cast<std::size_t>(d.x);
  const std::size_t slice = row * d.y;

  if (gin) {
    if (gin->channels != cin || !(gin->dims == d)) *gin = Tensor<T>(cin, d);
    std::fill(gin->v.begin(), gin->v.end(), T(0));
    for (int co = 0; co < cout; ++co) {
      const T* gc = gout.channel(co);
      for (int ci = 0; ci < cin; ++ci) {
        T* gic = gin->channel(ci);
        const T* wc = w.data() + (static_cast<std::size_t>(co) * cin + ci) * k * k * k;
        for (int kz = 0; kz < k; ++kz)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const T wv = wc[(static_cast<std::size_t>(kz) * k + ky) * k + kx];
              const int oz = kz - pad, oy = ky - pad, ox = kx - pad;
              for (int z = 0; z < d.z; ++z) {
                const int zz = z + oz;
                if (zz < 0 || zz >= d.z) continue;
                for (int y = 0; y < d.y; ++y) {
                  const int yy = y + oy;
                  if (yy < 0 || yy >= d.y) continue;
                  const T* g = gc + z * slice + y * row;
                  T* gi = gic + zz * slice + yy * row + ox;
                  const int x0 = ox < 0 ? -ox : 0;
                  const int x1 = ox > 0 ? d.x - ox : d.x;
                  for (int x = x0; x < x1; ++x) gi[x] += wv * g[x];
                }
              }
            }
      }
    }
  }

  if (gw) {
    const std::size_t wn = static_cast<std::size_t>(cout) * cin * k * k * k;
    if (gw->empty()) gw->assign(wn, T(0));
    if (gw->size() != wn) fail(Errc::shape, "conv3d_backward: weight grad size mismatch");
    for (int co = 0; co < cout; ++co) {
      const T* gc = gout.channel(co);
      for (int ci = 0; ci < cin; ++ci) {
        const T* inc = in.channel(ci);
        T* gwc = gw->data() + (static_cast<std::size_t>(co) * cin + ci) * k * k * k;
        for (int kz = 0; kz < k; ++kz)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int oz = kz - pad, oy = ky - pad, ox = kx - pad;
              T sum = 0;
              for (int z = 0; z < d.z; ++z) {
                const int zz = z + oz;
                if (zz < 0 || zz >= d.z) continue;
                for (int y = 0; y < d.y; ++y) {
                  const int yy = y + oy;
                  if (yy < 0 || yy >= d.y) continue;
                  const T* g = gc + z * slice + y * row;
                  const T* s = inc + zz * slice + yy * row + ox;
                  const int x0 = ox < 0 ? -ox : 0;
                  const int x1 = ox > 0 ? d.x - ox : d.x;
                  for (int x = x0; x < x1; ++x) sum += s[x] * g[x];
                }
              }
              gwc[(static_cast<std::size_t>(kz) * k + ky) * k + kx] += sum;
            }
      }
    }
  }

  if (gb) {
    if (gb->empty()) gb->assign(cout, T(0));
    if (gb->size() != static_cast<std::size_t>(cout))
      fail(Errc::shape, "conv3d_backward: bias grad size mismatch");
    for (int co = 0; co < cout; ++co) {
      const T* gc = gout.channel(co);
      T sum = 0;
      for (std::size_t i = 0; i < gout.plane(); ++i) sum += gc[i];
      (*gb)[co] += sum;
    }
  }
}

// ---------------------------------------------------------------------------
// Leaky ReLU. Backward uses the activated output: slope > 0 preserves sign.

template <typename T>
void leaky_relu_inplace(Tensor<T>& t, double slope) {
  const T s = static_cast<T>(slope);
  for (T& v : t.v)
    if (v < T(0)) v *= s;
}

template <typename T>
void leaky_relu_backward(const Tensor<T>& activated, double slope, Tensor<T>& grad) {
  const T s = static_cast<T>(slope);
  for (std::size_t i = 0; i < grad.v.size(); ++i)
    if (activated.v[i] <= T(0)) grad.v[i] *= s;
}

// ---------------------------------------------------------------------------
// Inverted dropout; mask entries are 0/1 in draw order. rate == 0 or
// inference mode is the exact identity and consumes no randomness.

template <typename T>
void dropout_forward(Tensor<T>& t, double rate, Rng& rng, std::vector<std::uint8_t>& mask) {
  mask.clear();
  if (rate <= 0.0) return;
  if (rate >= 1.0) fail(Errc::config, "dropout: rate must be < 1");
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  mask.resize(t.v.size());
  for (std::size_t i = 0; i < t.v.size(); ++i) {
    const bool keep = rng.uniform01() >= rate;
    mask[i] = keep ? 1 : 0;
    t.v[i] = keep ? t.v[i] * scale : T(0);
  }
}

template <typename T>
void dropout_backward(Tensor<T>& grad, double rate, const std::vector<std::uint8_t>& mask) {
  if (mask.empty()) return;
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < grad.v.size(); ++i)
    grad.v[i] = mask[i] ? grad.v[i] * scale : T(0);
}

// ---------------------------------------------------------------------------
// 2x average pooling (dims must be even) and its adjoint.

template <typename T>
Tensor<T> avgpool2_forward(const Tensor<T>& in) {
  const Vec3i d = in.dims;
  if (d.x % 2 || d.y % 2 || d.z % 2)
    fail(Errc::shape, "avgpool2: dims must be even");
  Tensor<T> out(in.channels, Vec3i{d.x / 2, d.y / 2, d.z / 2});
  for (int c = 0; c < in.channels; ++c)
    for (int z = 0; z < out.dims.z; ++z)
      for (int y = 0; y < out.dims.y; ++y)
        for (int x = 0; x < out.dims.x; ++x) {
          T s = 0;
          for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx)
                s += in.at(c, 2 * x + dx, 2 * y + dy, 2 * z + dz);
          out.at(c, x, y, z) = s / T(8);
        }
  return out;
}

template <typename T>
Tensor<T> avgpool2_backward(const Tensor<T>& gout, Vec3i in_dims) {
  Tensor<T> gin(gout.channels, in_dims);
  for (int c = 0; c < gout.channels; ++c)
    for (int z = 0; z < gout.dims.z; ++z)
      for (int y = 0; y < gout.dims.y; ++y)
        for (int x = 0; x < gout.dims.x; ++x) {
          const T g = gout.at(c, x, y, z) / T(8);
          for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx)
                gin.at(c, 2 * x + dx, 2 * y + dy, 2 * z + dz) = g;
        }
  return gin;
}

// ---------------------------------------------------------------------------
// 2x trilinear upsampling. Output voxel o samples the input at
// (o + 0.5)/2 - 0.5 with clamp-to-edge; the backward pass scatters with the
// same weights.

namespace detail {

struct UpTap {
  int i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

inline std::vector<UpTap> upsample_taps(int n_in) {
  std::vector<UpTap> taps(2 * n_in);
  for (int o = 0; o < 2 * n_in; ++o) {
    const double p = (o + 0.5) / 2.0 - 0.5;
    int i0 = static_cast<int>(std::floor(p));
    double f = p - i0;
    if (i0 < 0) { i0 = 0; f = 0.0; }
    if (i0 > n_in - 1) { i0 = n_in - 1; f = 0.0; }
    const int i1 = i0 + 1 <= n_in - 1 ? i0 + 1 : n_in - 1;
    taps[o] = {i0, i1, i0 == n_in - 1 ? 0.0 : f};
  }
  return taps;
}

}  // namespace detail

template <typename T>
Tensor<T> upsample2_forward(const Tensor<T>& in) {
  const Vec3i d = in.dims;
  Tensor<T> out(in.channels, Vec3i{2 * d.x, 2 * d.y, 2 * d.z});
  const auto tx = detail::upsample_taps(d.x);
  const auto ty = detail::upsample_taps(d.y);
  const auto tz = detail::upsample_taps(d.z);
  for (int c = 0; c < in.channels; ++c)
    for (int z = 0; z < out.dims.z; ++z)
      for (int y = 0; y < out.dims.y; ++y)
        for (int x = 0; x < out.dims.x; ++x) {
          const auto& ax = tx[x];
          const auto& ay = ty[y];
          const auto& az = tz[z];
          double s = 0;
          for (int bz = 0; bz < 2; ++bz)
            for (int by = 0; by < 2; ++by)
              for (int bx = 0; bx < 2; ++bx) {
                const double w = (bx ? ax.w1 : 1 - ax.w1) * (by ? ay.w1 : 1 - ay.w1) *
                                 (bz ? az.w1 : 1 - az.w1);
                if (w == 0.0) continue;
                s += w * double(in.at(c, bx ? ax.i1 : ax.i0, by ? ay.i1 : ay.i0,
                                      bz ? az.i1 : az.i0));
              }
          out.at(c, x, y, z) = static_cast<T>(s);
        }
  return out;
}

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& gout, Vec3i in_dims) {
  Tensor<T> gin(gout.channels, in_dims);
  const auto tx = detail::upsample_taps(in_dims.x);
  const auto ty = detail::upsample_taps(in_dims.y);
  const auto tz = detail::upsample_taps(in_dims.z);
  for (int c = 0; c < gout.channels; ++c)
    for (int z = 0; z < gout.dims.z; ++z)
      for (int y = 0; y < gout.dims.y; ++y)
        for (int x = 0; x < gout.dims.x; ++x) {
          const auto& ax = tx[x];
          const auto& ay = ty[y];
          const auto& az = tz[z];
          const double g = double(gout.at(c, x, y, z));
          for (int bz = 0; bz < 2; ++bz)
            for (int by = 0; by < 2; ++by)
              for (int bx = 0; bx < 2; ++bx) {
                const double w = (bx ? ax.w1 : 1 - ax.w1) * (by ? ay.w1 : 1 - ay.w1) *
                                 (bz ? az.w1 : 1 - az.w1);
                if (w == 0.0) continue;
                gin.at(c, bx ? ax.i1 : ax.i0, by ? ay.i1 : ay.i0, bz ? az.i1 : az.i0) +=
                    static_cast<T>(w * g);
              }
        }
  return gin;
}

// ---------------------------------------------------------------------------
// Channel concatenation (a first, then b) and the matching split.

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.dims == b.dims)) fail(Errc::shape, "concat: dims differ");
  Tensor<T> out(a.channels + b.channels, a.dims);
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
  return out;
}

template <typename T>
void split_channels(const Tensor<T>& cat, int ca, Tensor<T>& ga, Tensor<T>& gb) {
  ga = Tensor<T>(ca, cat.dims);
  gb = Tensor<T>(cat.channels - ca, cat.dims);
  std::copy(cat.v.begin(), cat.v.begin() + ga.v.size(), ga.v.begin());
  std::copy(cat.v.begin() + ga.v.size(), cat.v.end(), gb.v.begin());
}

// ---------------------------------------------------------------------------
// Channel softmax per voxel.

template <typename T>
void softmax_channels_inplace(Tensor<T>& t) {
  const std::size_t plane = t.plane();
  for (std::size_t i = 0; i < plane; ++i) {
    T mx = t.v[i];
    for (int c = 1; c < t.channels; ++c) mx = std::max(mx, t.v[c * plane + i]);
    double sum = 0;
    for (int c = 0; c < t.channels; ++c) {
      const double e = std::exp(double(t.v[c * plane + i] - mx));
      t.v[c * plane + i] = static_cast<T>(e);
      sum += e;
    }
    for (int c = 0; c < t.channels; ++c)
      t.v[c * plane + i] = static_cast<T>(double(t.v[c * plane + i]) / sum);
  }
}

// d(loss)/d(logits) from probabilities and d(loss)/d(probs).
template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& probs, const Tensor<T>& gprobs) {
  Tensor<T> glogits(probs.channels, probs.dims);
  const std::size_t plane = probs.plane();
  for (std::size_t i = 0; i < plane; ++i) {
    double dot = 0;
    for (int c = 0; c < probs.channels; ++c)
      dot += double(gprobs.v[c * plane + i]) * double(probs.v[c * plane + i]);
    for (int c = 0; c < probs.channels; ++c)
      glogits.v[c * plane + i] = static_cast<T>(
          double(probs.v[c * plane + i]) * (double(gprobs.v[c * plane + i]) - dot));
  }
  return glogits;
}

}  // namespace cardioseg
