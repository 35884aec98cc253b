#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "navgym/geometry.hpp"
#include "navgym/sim_env.hpp"

namespace navgym {

/// Layer sizes of the conv-conv-dense actor-critic. Both convolutions use
/// valid padding, so the flattened width is forced by the scan length.
struct NetShape {
  int beams = 1081;
  int history = kScanHistory;
  int bearing_bins = kBearingBins;
  int conv1_kernel = 9;
  int conv1_stride = 4;
  int conv1_channels = 16;
  int conv2_kernel = 5;
  int conv2_stride = 2;
  int conv2_channels = 32;
  int hidden = 256;
  int actions = kNumActions;

  int conv1_len() const { return (beams - conv1_kernel) / conv1_stride + 1; }
  int conv2_len() const { return (conv1_len() - conv2_kernel) / conv2_stride + 1; }
  int flat() const { return conv2_len() * conv2_channels; }
  int dense_in() const { return flat() + bearing_bins; }

  void validate() const {
    if (beams < conv1_kernel || conv1_len() < conv2_kernel || conv1_stride < 1 || conv2_stride < 1 || hidden < 1 ||
        actions < 2 || history < 1 || bearing_bins < 1 || conv1_channels < 1 || conv2_channels < 1)
      throw std::invalid_argument("network shape is degenerate");
  }

  friend bool operator==(const NetShape&, const NetShape&) = default;
};

struct TensorRange {
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Offsets of every tensor inside the flat parameter buffer, in checkpoint
/// order. Weight layouts (outermost to innermost):
///   conv1_w [tap][in_channel][out_channel]
///   conv2_w [tap][in_channel][out_channel]
///   dense_w [input][hidden]
///   policy_w [hidden][action], value_w [hidden]
struct ParamLayout {
  TensorRange conv1_w, conv1_b, conv2_w, conv2_b, dense_w, dense_b, policy_w, policy_b, value_w, value_b;
  std::size_t total = 0;

  explicit ParamLayout(const NetShape& s) {
    auto take = [this](std::size_t n) {
      TensorRange r{total, n};
      total += n;
      return r;
    };
    conv1_w = take(std::size_t(s.conv1_kernel) * s.history * s.conv1_channels);
    conv1_b = take(s.conv1_channels);
    conv2_w = take(std::size_t(s.conv2_kernel) * s.conv1_channels * s.conv2_channels);
    conv2_b = take(s.conv2_channels);
    dense_w = take(std::size_t(s.dense_in()) * s.hidden);
    dense_b = take(s.hidden);
    policy_w = take(std::size_t(s.hidden) * s.actions);
    policy_b = take(s.actions);
    value_w = take(s.hidden);
    value_b = take(1);
  }

  std::vector<TensorRange> tensors() const {
    return {conv1_w, conv1_b, conv2_w, conv2_b, dense_w, dense_b, policy_w, policy_b, value_w, value_b};
  }
};

template <class T>
struct NetParams {
  NetShape shape;
  ParamLayout layout{shape};
  std::vector<T> values;

  NetParams() : values(layout.total, T(0)) {}
  explicit NetParams(const NetShape& s) : shape(s), layout(s), values(layout.total, T(0)) { s.validate(); }

  T* at(const TensorRange& r) { return values.data() + r.offset; }
  const T* at(const TensorRange& r) const { return values.data() + r.offset; }

  template <class U>
  NetParams<U> cast() const {
    NetParams<U> out(shape);
    std::transform(values.begin(), values.end(), out.values.begin(), [](T v) { return static_cast<U>(v); });
    return out;
  }
};

/// Glorot-uniform weights, zero biases.
template <class T>
NetParams<T> init_params(const NetShape& shape, Rng& rng) {
  NetParams<T> p(shape);
  const auto& L = p.layout;
  auto fill = [&](const TensorRange& r, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t i = 0; i < r.size; ++i) p.values[r.offset + i] = static_cast<T>(u(rng));
  };
  fill(L.conv1_w, shape.conv1_kernel * shape.history, shape.conv1_kernel * shape.conv1_channels);
  fill(L.conv2_w, shape.conv2_kernel * shape.conv1_channels, shape.conv2_kernel * shape.conv2_channels);
  fill(L.dense_w, shape.dense_in(), shape.hidden);
  fill(L.policy_w, shape.hidden, shape.actions);
  fill(L.value_w, shape.hidden, 1);
  return p;
}

struct NetOutput {
  std::vector<double> policy;
  double value = 0.0;
};

struct TrainingSample {
  Observation observation;
  int action = 0;
  double return_R = 0.0;
};

struct LossHyper {
  double entropy_beta = 0.01;
  double value_coef = 0.5;
};

struct Losses {
  double policy = 0.0;   // mean of -log pi(a|s) * advantage
  double value = 0.0;    // mean of value_coef * (R - V)^2
  double entropy = 0.0;  // mean policy entropy (nats)
  double total = 0.0;    // policy - beta * entropy + value
};

namespace kernels {

template <class T>
inline void axpy(T* __restrict y, const T* __restrict x, T a, int n) {
#pragma omp simd
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class T>
inline T dot(const T* __restrict a, const T* __restrict b, int n) {
  T s = 0;
#pragma omp simd reduction(+ : s)
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <class T>
inline void relu(T* x, int n) {
#pragma omp simd
  for (int i = 0; i < n; ++i) x[i] = x[i] > T(0) ? x[i] : T(0);
}

}  // namespace kernels

/// Per-sample activations kept for the backward pass.
template <class T>
struct Activations {
  std::vector<T> input;  // [position][history]
  std::vector<T> h1;     // [conv1 position][channel], post-ReLU
  std::vector<T> x;      // dense input: conv2 output [position][channel] post-ReLU, then bearing one-hot
  std::vector<T> h3;     // hidden, post-ReLU
  std::vector<T> logits;
  std::vector<T> log_policy;
  T value = 0;

  void resize(const NetShape& s) {
    input.resize(std::size_t(s.beams) * s.history);
    h1.resize(std::size_t(s.conv1_len()) * s.conv1_channels);
    x.resize(s.dense_in());
    h3.resize(s.hidden);
    logits.resize(s.actions);
    log_policy.resize(s.actions);
  }
};

namespace detail {

template <class T>
void check_observation(const NetShape& s, const Observation& obs) {
  if (obs.beams != s.beams || obs.scan_stack.size() != std::size_t(s.beams) * s.history ||
      static_cast<int>(obs.bearing_onehot.size()) != s.bearing_bins)
    throw std::invalid_argument("observation does not match network shape");
}

template <class T>
void log_softmax(const T* z, T* out, int n) {
  T m = z[0];
  for (int i = 1; i < n; ++i) m = std::max(m, z[i]);
  T sum = 0;
  for (int i = 0; i < n; ++i) sum += std::exp(z[i] - m);
  const T lse = m + std::log(sum);
  for (int i = 0; i < n; ++i) out[i] = z[i] - lse;
}

// Convolutions and bearing injection, everything up to the dense input.
template <class T>
void forward_features(const NetParams<T>& p, const Observation& obs, Activations<T>& a) {
  const auto& s = p.shape;
  const auto& L = p.layout;
  const int H = s.history, C1 = s.conv1_channels, C2 = s.conv2_channels;
  for (int c = 0; c < H; ++c) {
    const float* src = obs.scan_stack.data() + std::size_t(c) * s.beams;
    for (int q = 0; q < s.beams; ++q) a.input[std::size_t(q) * H + c] = static_cast<T>(src[q]);
  }

  const T* w1 = p.at(L.conv1_w);
  const T* b1 = p.at(L.conv1_b);
  const int taps1 = s.conv1_kernel * H;
  for (int q = 0; q < s.conv1_len(); ++q) {
    T* y = a.h1.data() + std::size_t(q) * C1;
    std::copy(b1, b1 + C1, y);
    const T* win = a.input.data() + std::size_t(q) * s.conv1_stride * H;
    for (int j = 0; j < taps1; ++j) kernels::axpy(y, w1 + std::size_t(j) * C1, win[j], C1);
    kernels::relu(y, C1);
  }

  const T* w2 = p.at(L.conv2_w);
  const T* b2 = p.at(L.conv2_b);
  const int taps2 = s.conv2_kernel * C1;
  for (int q = 0; q < s.conv2_len(); ++q) {
    T* y = a.x.data() + std::size_t(q) * C2;
    std::copy(b2, b2 + C2, y);
    const T* win = a.h1.data() + std::size_t(q) * s.conv2_stride * C1;
    for (int j = 0; j < taps2; ++j) {
      if (win[j] != T(0)) kernels::axpy(y, w2 + std::size_t(j) * C2, win[j], C2);
    }
    kernels::relu(y, C2);
  }
  std::copy(obs.bearing_onehot.begin(), obs.bearing_onehot.end(), a.x.begin() + s.flat());
}

template <class T>
void forward_heads(const NetParams<T>& p, Activations<T>& a) {
  const auto& s = p.shape;
  const auto& L = p.layout;
  kernels::relu(a.h3.data(), s.hidden);
  const T* pw = p.at(L.policy_w);
  const T* pb = p.at(L.policy_b);
  std::copy(pb, pb + s.actions, a.logits.begin());
  for (int i = 0; i < s.hidden; ++i) {
    if (a.h3[i] != T(0)) kernels::axpy(a.logits.data(), pw + std::size_t(i) * s.actions, a.h3[i], s.actions);
  }
  a.value = *p.at(L.value_b) + kernels::dot(a.h3.data(), p.at(L.value_w), s.hidden);
  log_softmax(a.logits.data(), a.log_policy.data(), s.actions);
}

// Register tiles for the dense layer: kTileB samples x kTileH hidden units.
inline constexpr int kTileB = 4;
inline constexpr int kTileH = 32;
inline constexpr int kBlockI = 256;  // input rows per cache block

template <int BN, class T>
inline void dense_tile(const T* w, int H, int h0, int hn, int i0, int i1, const T* const* xs, T (*acc)[kTileH]) {
  if (hn == kTileH) {
    for (int i = i0; i < i1; ++i) {
      if constexpr (BN == 1) {
        if (xs[0][i] == T(0)) continue;  // small batches are bandwidth bound; skip dead inputs
      }
      const T* row = w + std::size_t(i) * H + h0;
      for (int k = 0; k < BN; ++k) {
        const T xi = xs[k][i];
#pragma omp simd
        for (int h = 0; h < kTileH; ++h) acc[k][h] += xi * row[h];
      }
    }
  } else {
    for (int i = i0; i < i1; ++i) {
      const T* row = w + std::size_t(i) * H + h0;
      for (int k = 0; k < BN; ++k) {
        const T xi = xs[k][i];
        for (int h = 0; h < hn; ++h) acc[k][h] += xi * row[h];
      }
    }
  }
}

// h3[b] = bias + sum_i x[b][i] * W[i]. Each sample's sum runs over i in the
// same order whatever the batch size, so batched and single-sample results
// are bitwise identical.
template <class T>
void forward_dense(const NetParams<T>& p, std::span<Activations<T>> acts) {
  const auto& s = p.shape;
  const T* w = p.at(p.layout.dense_w);
  const T* bias = p.at(p.layout.dense_b);
  const int H = s.hidden, I = s.dense_in();
  const std::size_t B = acts.size();
  for (auto& a : acts) std::copy(bias, bias + H, a.h3.begin());
  for (int i0 = 0; i0 < I; i0 += kBlockI) {
    const int i1 = std::min(I, i0 + kBlockI);
    for (int h0 = 0; h0 < H; h0 += kTileH) {
      const int hn = std::min(kTileH, H - h0);
      for (std::size_t b0 = 0; b0 < B; b0 += kTileB) {
        const int bn = static_cast<int>(std::min<std::size_t>(kTileB, B - b0));
        T acc[kTileB][kTileH] = {};
        const T* xs[kTileB] = {};
        for (int k = 0; k < bn; ++k) {
          xs[k] = acts[b0 + k].x.data();
          std::copy_n(acts[b0 + k].h3.data() + h0, hn, acc[k]);
        }
        switch (bn) {
          case 1: dense_tile<1>(w, H, h0, hn, i0, i1, xs, acc); break;
          case 2: dense_tile<2>(w, H, h0, hn, i0, i1, xs, acc); break;
          case 3: dense_tile<3>(w, H, h0, hn, i0, i1, xs, acc); break;
          default: dense_tile<4>(w, H, h0, hn, i0, i1, xs, acc); break;
        }
        for (int k = 0; k < bn; ++k) std::copy_n(acc[k], hn, acts[b0 + k].h3.data() + h0);
      }
    }
  }
}

}  // namespace detail

/// Runs the network on a batch, filling `acts` (resized as needed).
template <class T>
void forward(const NetParams<T>& params, std::span<const Observation* const> batch, std::vector<Activations<T>>& acts) {
  if (acts.size() < batch.size()) acts.resize(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    detail::check_observation<T>(params.shape, *batch[b]);
    acts[b].resize(params.shape);
    detail::forward_features(params, *batch[b], acts[b]);
  }
  std::span<Activations<T>> used(acts.data(), batch.size());
  detail::forward_dense(params, used);
  for (auto& a : used) detail::forward_heads(params, a);
}

template <class T>
std::vector<NetOutput> forward(const NetParams<T>& params, std::span<const Observation* const> batch) {
  std::vector<Activations<T>> acts;
  forward(params, batch, acts);
  std::vector<NetOutput> out(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    out[b].policy.resize(params.shape.actions);
    for (int k = 0; k < params.shape.actions; ++k) out[b].policy[k] = std::exp(double(acts[b].log_policy[k]));
    out[b].value = acts[b].value;
  }
  return out;
}

template <class T>
NetOutput forward(const NetParams<T>& params, const Observation& obs) {
  const Observation* one[] = {&obs};
  return forward(params, std::span<const Observation* const>(one)).front();
}

namespace detail {

template <class T>
void backward_sample(const NetParams<T>& p, const Activations<T>& a, std::span<const T> dlogits, T dvalue,
                     std::span<T> dh3, NetParams<T>& g) {
  const auto& s = p.shape;
  const auto& L = p.layout;
  const T* pw = p.at(L.policy_w);
  const T* vw = p.at(L.value_w);
  T* gpw = g.at(L.policy_w);
  T* gpb = g.at(L.policy_b);
  T* gvw = g.at(L.value_w);
  for (int k = 0; k < s.actions; ++k) gpb[k] += dlogits[k];
  *g.at(L.value_b) += dvalue;
  for (int i = 0; i < s.hidden; ++i) {
    const T h = a.h3[i];
    if (h <= T(0)) {
      dh3[i] = 0;
      continue;
    }
    kernels::axpy(gpw + std::size_t(i) * s.actions, dlogits.data(), h, s.actions);
    gvw[i] += h * dvalue;
    dh3[i] = kernels::dot(pw + std::size_t(i) * s.actions, dlogits.data(), s.actions) + vw[i] * dvalue;
  }
}

template <class T>
void backward_features(const NetParams<T>& p, const Activations<T>& a, std::vector<T>& dx, std::vector<T>& dh1,
                       NetParams<T>& g) {
  const auto& s = p.shape;
  const auto& L = p.layout;
  const int H = s.history, C1 = s.conv1_channels, C2 = s.conv2_channels;

  const T* w2 = p.at(L.conv2_w);
  T* gw2 = g.at(L.conv2_w);
  T* gb2 = g.at(L.conv2_b);
  const int taps2 = s.conv2_kernel * C1;
  std::fill(dh1.begin(), dh1.end(), T(0));
  for (int q = 0; q < s.conv2_len(); ++q) {
    T* dy = dx.data() + std::size_t(q) * C2;
    const T* y = a.x.data() + std::size_t(q) * C2;
    bool any = false;
    for (int c = 0; c < C2; ++c) {
      if (y[c] <= T(0)) dy[c] = 0;
      any |= dy[c] != T(0);
    }
    if (!any) continue;
    for (int c = 0; c < C2; ++c) gb2[c] += dy[c];
    const std::size_t base = std::size_t(q) * s.conv2_stride * C1;
    const T* win = a.h1.data() + base;
    T* dwin = dh1.data() + base;
    for (int j = 0; j < taps2; ++j) {
      if (win[j] == T(0)) continue;  // ReLU output zero: no weight or input gradient
      kernels::axpy(gw2 + std::size_t(j) * C2, dy, win[j], C2);
      dwin[j] += kernels::dot(w2 + std::size_t(j) * C2, dy, C2);
    }
  }

  T* gw1 = g.at(L.conv1_w);
  T* gb1 = g.at(L.conv1_b);
  const int taps1 = s.conv1_kernel * H;
  for (int q = 0; q < s.conv1_len(); ++q) {
    const T* dy = dh1.data() + std::size_t(q) * C1;
    bool any = false;
    for (int c = 0; c < C1; ++c) any |= dy[c] != T(0);
    if (!any) continue;
    for (int c = 0; c < C1; ++c) gb1[c] += dy[c];
    const T* win = a.input.data() + std::size_t(q) * s.conv1_stride * H;
    for (int j = 0; j < taps1; ++j) {
      if (win[j] != T(0)) kernels::axpy(gw1 + std::size_t(j) * C1, dy, win[j], C1);
    }
  }
}

// Dense layer backward over a batch: dW[i] += sum_b x_b[i] * dh_b and
// dx_b[i] = W[i] . dh_b. A block of RB rows x BN samples keeps RB*BN
// independent lane accumulators so the dot products are not latency bound.
inline constexpr int kRowBlock = 4;
inline constexpr int kLanes = 16;

template <int RB, int BN, class T>
void backward_dense_block(const T* w, T* gw, int H, int i0, int flat, const T* const* xs, const T* const* dh,
                          T* const* dx) {
  const T* rows[RB];
  T* grows[RB];
  T xi[RB][BN];
  for (int r = 0; r < RB; ++r) {
    rows[r] = w + std::size_t(i0 + r) * H;
    grows[r] = gw + std::size_t(i0 + r) * H;
    for (int k = 0; k < BN; ++k) xi[r][k] = xs[k][i0 + r];
  }
  T part[RB][BN][kLanes] = {};
  int h0 = 0;
  for (; h0 + kLanes <= H; h0 += kLanes) {
    for (int r = 0; r < RB; ++r) {
      for (int k = 0; k < BN; ++k) {
#pragma omp simd
        for (int l = 0; l < kLanes; ++l) part[r][k][l] += rows[r][h0 + l] * dh[k][h0 + l];
      }
#pragma omp simd
      for (int l = 0; l < kLanes; ++l) {
        T g = grows[r][h0 + l];
        for (int k = 0; k < BN; ++k) g += xi[r][k] * dh[k][h0 + l];
        grows[r][h0 + l] = g;
      }
    }
  }
  for (; h0 < H; ++h0) {
    for (int r = 0; r < RB; ++r) {
      for (int k = 0; k < BN; ++k) {
        part[r][k][0] += rows[r][h0] * dh[k][h0];
        grows[r][h0] += xi[r][k] * dh[k][h0];
      }
    }
  }
  for (int r = 0; r < RB; ++r) {
    if (i0 + r >= flat) continue;
    for (int k = 0; k < BN; ++k) {
      T acc = 0;
      for (int l = 0; l < kLanes; ++l) acc += part[r][k][l];
      dx[k][i0 + r] = acc;
    }
  }
}

template <int RB, class T>
void backward_dense_rows(const T* w, T* gw, int H, int i0, int flat, std::size_t B, const T* const* xs,
                         const T* const* dh, T* const* dx) {
  for (std::size_t b0 = 0; b0 < B; b0 += kTileB) {
    const int bn = static_cast<int>(std::min<std::size_t>(kTileB, B - b0));
    const T* const* x = xs + b0;
    const T* const* d = dh + b0;
    T* const* o = dx + b0;
    switch (bn) {
      case 1: backward_dense_block<RB, 1>(w, gw, H, i0, flat, x, d, o); break;
      case 2: backward_dense_block<RB, 2>(w, gw, H, i0, flat, x, d, o); break;
      case 3: backward_dense_block<RB, 3>(w, gw, H, i0, flat, x, d, o); break;
      default: backward_dense_block<RB, 4>(w, gw, H, i0, flat, x, d, o); break;
    }
  }
}

template <class T>
void backward_dense(const NetParams<T>& p, std::span<const Activations<T>> acts, const std::vector<std::vector<T>>& dh3,
                    std::vector<std::vector<T>>& dx, NetParams<T>& g) {
  const auto& s = p.shape;
  const int H = s.hidden, I = s.dense_in(), flat = s.flat();
  const T* w = p.at(p.layout.dense_w);
  T* gw = g.at(p.layout.dense_w);
  const std::size_t B = acts.size();
  std::vector<const T*> xs(B), dh(B);
  std::vector<T*> dxs(B);
  for (std::size_t b = 0; b < B; ++b) {
    xs[b] = acts[b].x.data();
    dh[b] = dh3[b].data();
    dxs[b] = dx[b].data();
  }
  int i = 0;
  for (; i + kRowBlock <= I; i += kRowBlock)
    backward_dense_rows<kRowBlock>(w, gw, H, i, flat, B, xs.data(), dh.data(), dxs.data());
  for (; i < I; ++i) backward_dense_rows<1>(w, gw, H, i, flat, B, xs.data(), dh.data(), dxs.data());
}

}  // namespace detail

/// Reusable buffers for compute_gradients.
template <class T>
struct GradWorkspace {
  std::vector<Activations<T>> acts;
  std::vector<std::vector<T>> dh3;
  std::vector<std::vector<T>> dx;
  std::vector<T> dh1;
  std::vector<T> dlogits;
};

/// Actor-critic loss per sample:
///   -log pi(a|s) * A  -  beta * H(pi)  +  c_v * (R - V)^2,   A = R - V held constant.
/// Gradients are averaged over the batch and written to `grads` (overwritten).
/// `fixed_advantages`, when given, replaces R - V in the policy term.
template <class T>
Losses compute_gradients(const NetParams<T>& params, std::span<const TrainingSample> batch, NetParams<T>& grads,
                         GradWorkspace<T>& ws, const LossHyper& hyper = {},
                         std::span<const double> fixed_advantages = {}) {
  if (batch.empty()) throw std::invalid_argument("compute_gradients needs a nonempty batch");
  const auto& s = params.shape;
  const auto& L = params.layout;
  if (!(grads.shape == s)) grads = NetParams<T>(s);
  std::fill(grads.values.begin(), grads.values.end(), T(0));

  std::vector<const Observation*> obs(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) obs[b] = &batch[b].observation;
  forward(params, std::span<const Observation* const>(obs), ws.acts);

  const std::size_t B = batch.size();
  const T inv_b = T(1) / static_cast<T>(B);
  ws.dh3.resize(B);
  ws.dx.resize(B);
  ws.dlogits.resize(s.actions);
  ws.dh1.resize(std::size_t(s.conv1_len()) * s.conv1_channels);

  Losses losses;
  for (std::size_t b = 0; b < B; ++b) {
    const auto& a = ws.acts[b];
    const auto& smp = batch[b];
    if (smp.action < 0 || smp.action >= s.actions) throw std::invalid_argument("training sample action out of range");
    const T R = static_cast<T>(smp.return_R);
    const T V = a.value;
    const T adv = fixed_advantages.empty() ? R - V : static_cast<T>(fixed_advantages[b]);
    T entropy = 0;
    for (int k = 0; k < s.actions; ++k) entropy -= std::exp(a.log_policy[k]) * a.log_policy[k];
    const T beta = static_cast<T>(hyper.entropy_beta);
    for (int k = 0; k < s.actions; ++k) {
      const T pk = std::exp(a.log_policy[k]);
      const T pg = -adv * ((k == smp.action ? T(1) : T(0)) - pk);
      // d(-beta * H)/dz_k = beta * p_k * (log p_k + H)
      const T ent = beta * pk * (a.log_policy[k] + entropy);
      ws.dlogits[k] = (pg + ent) * inv_b;
    }
    const T dv = T(-2) * static_cast<T>(hyper.value_coef) * (R - V) * inv_b;

    losses.policy += double(-a.log_policy[smp.action] * adv);
    losses.value += hyper.value_coef * double((R - V) * (R - V));
    losses.entropy += double(entropy);

    ws.dh3[b].resize(s.hidden);
    detail::backward_sample(params, a, std::span<const T>(ws.dlogits), dv, std::span<T>(ws.dh3[b]), grads);
  }

  for (std::size_t b = 0; b < B; ++b) {
    T* gb = grads.at(L.dense_b);
    for (int h = 0; h < s.hidden; ++h) gb[h] += ws.dh3[b][h];
    ws.dx[b].assign(s.flat(), T(0));
  }
  detail::backward_dense(params, std::span<const Activations<T>>(ws.acts.data(), B), ws.dh3, ws.dx, grads);
  for (std::size_t b = 0; b < B; ++b) detail::backward_features(params, ws.acts[b], ws.dx[b], ws.dh1, grads);

  losses.policy /= double(B);
  losses.value /= double(B);
  losses.entropy /= double(B);
  losses.total = losses.policy - hyper.entropy_beta * losses.entropy + losses.value;
  return losses;
}

template <class T>
Losses compute_gradients(const NetParams<T>& params, std::span<const TrainingSample> batch, NetParams<T>& grads,
                         const LossHyper& hyper = {}) {
  GradWorkspace<T> ws;
  return compute_gradients(params, batch, grads, ws, hyper);
}

/// Batch-mean loss with the same definition as compute_gradients; used by
/// finite-difference checks.
template <class T>
double evaluate_loss(const NetParams<T>& params, std::span<const TrainingSample> batch, const LossHyper& hyper,
                     std::span<const double> fixed_advantages) {
  std::vector<const Observation*> obs(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) obs[b] = &batch[b].observation;
  std::vector<Activations<T>> acts;
  forward(params, std::span<const Observation* const>(obs), acts);
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& a = acts[b];
    double entropy = 0.0;
    for (int k = 0; k < params.shape.actions; ++k) entropy -= std::exp(double(a.log_policy[k])) * double(a.log_policy[k]);
    const double r_minus_v = batch[b].return_R - double(a.value);
    total += -double(a.log_policy[batch[b].action]) * fixed_advantages[b] - hyper.entropy_beta * entropy +
             hyper.value_coef * r_minus_v * r_minus_v;
  }
  return total / double(batch.size());
}

/// RMSProp state: acc = decay * acc + (1 - decay) * g^2; p -= lr * g / sqrt(acc + eps).
struct OptState {
  std::vector<float> accum;
  double learning_rate = 3e-4;
  double decay = 0.99;
  double epsilon = 1e-6;
  std::uint64_t steps = 0;

  OptState() = default;
  OptState(std::size_t n, double lr) : accum(n, 0.0f), learning_rate(lr) {}
};

template <class T>
void apply_update(NetParams<T>& params, OptState& opt, const NetParams<T>& grads) {
  if (grads.values.size() != params.values.size() || opt.accum.size() != params.values.size())
    throw std::invalid_argument("apply_update: size mismatch");
  const float decay = static_cast<float>(opt.decay);
  const float keep = 1.0f - decay;
  const float lr = static_cast<float>(opt.learning_rate);
  const float eps = static_cast<float>(opt.epsilon);
  float* acc = opt.accum.data();
  T* p = params.values.data();
  const T* g = grads.values.data();
  const std::size_t n = params.values.size();
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) {
    const float gi = static_cast<float>(g[i]);
    acc[i] = decay * acc[i] + keep * gi * gi;
    p[i] -= static_cast<T>(lr * gi / std::sqrt(acc[i] + eps));
  }
  ++opt.steps;
}

inline double policy_entropy(std::span<const double> policy) {
  double h = 0.0;
  for (double p : policy)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

}  // namespace navgym
