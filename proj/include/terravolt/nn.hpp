#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "terravolt/parallel.hpp"
#include "terravolt/random.hpp"
#include "terravolt/swath.hpp"
#include "terravolt/textio.hpp"

namespace terravolt {

// Time-major 2D tensor: v[t * channels + c].
struct Tensor2 {
  int t = 0;
  int channels = 0;
  std::vector<double> v;

  void resize(int t_, int c_) {
    t = t_;
    channels = c_;
    v.assign(static_cast<std::size_t>(t_) * c_, 0.0);
  }
  double& at(int ti, int ci) { return v[static_cast<std::size_t>(ti) * channels + ci]; }
  double at(int ti, int ci) const { return v[static_cast<std::size_t>(ti) * channels + ci]; }
};

// 1D cross-correlation along the temporal axis. Weight layout is
// [cout][k][cin]; with same_zero padding the window is aligned so that
// y(t) = sum_j x(t + j - (k-1)/2) * w_j with zeros outside the input.
struct Conv1dLayer {
  int cin = 0;
  int cout = 0;
  int k = 0;
  bool pad_same = false;
  std::vector<double> w;
  std::vector<double> b;

  void allocate() {
    w.assign(static_cast<std::size_t>(cout) * k * cin, 0.0);
    b.assign(static_cast<std::size_t>(cout), 0.0);
  }
  int out_len(int t_in) const { return pad_same ? t_in : t_in - k + 1; }
  int pad_left() const { return pad_same ? (k - 1) / 2 : 0; }

  void forward(const Tensor2& x, Tensor2& y) const {
    if (x.channels != cin) throw std::invalid_argument("conv1d: channel mismatch");
    if (!pad_same && x.t < k) throw std::invalid_argument("conv1d: input shorter than kernel");
    const int t_out = out_len(x.t);
    y.resize(t_out, cout);
    const int pl = pad_left();
    for (int t = 0; t < t_out; ++t) {
      for (int co = 0; co < cout; ++co) {
        double acc = b[co];
        for (int j = 0; j < k; ++j) {
          const int ts = t + j - pl;
          if (ts < 0 || ts >= x.t) continue;
          const double* xr = &x.v[static_cast<std::size_t>(ts) * cin];
          const double* wr = &w[(static_cast<std::size_t>(co) * k + j) * cin];
          for (int ci = 0; ci < cin; ++ci) acc += xr[ci] * wr[ci];
        }
        y.at(t, co) = acc;
      }
    }
  }

  // Accumulates dW/dB into grad_w/grad_b; writes dX into dx when non-null.
  void backward(const Tensor2& x, const Tensor2& dy, std::vector<double>& grad_w,
                std::vector<double>& grad_b, Tensor2* dx) const {
    const int pl = pad_left();
    if (dx) dx->resize(x.t, cin);
    for (int t = 0; t < dy.t; ++t) {
      const double* gr = &dy.v[static_cast<std::size_t>(t) * cout];
      for (int co = 0; co < cout; ++co) {
        const double g = gr[co];
        grad_b[co] += g;
        for (int j = 0; j < k; ++j) {
          const int ts = t + j - pl;
          if (ts < 0 || ts >= x.t) continue;
          const double* xr = &x.v[static_cast<std::size_t>(ts) * cin];
          double* dwr = &grad_w[(static_cast<std::size_t>(co) * k + j) * cin];
          for (int ci = 0; ci < cin; ++ci) dwr[ci] += g * xr[ci];
          if (dx) {
            double* dxr = &dx->v[static_cast<std::size_t>(ts) * cin];
            const double* wr = &w[(static_cast<std::size_t>(co) * k + j) * cin];
            for (int ci = 0; ci < cin; ++ci) dxr[ci] += g * wr[ci];
          }
        }
      }
    }
  }
};

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // [out][in]
  std::vector<double> b;

  void allocate() {
    w.assign(static_cast<std::size_t>(out) * in, 0.0);
    b.assign(static_cast<std::size_t>(out), 0.0);
  }

  void forward(const std::vector<double>& x, std::vector<double>& y) const {
    y.assign(static_cast<std::size_t>(out), 0.0);
    for (int o = 0; o < out; ++o) {
      double acc = b[o];
      const double* wr = &w[static_cast<std::size_t>(o) * in];
      for (int i = 0; i < in; ++i) acc += wr[i] * x[i];
      y[o] = acc;
    }
  }

  void backward(const std::vector<double>& x, const std::vector<double>& dy,
                std::vector<double>& grad_w, std::vector<double>& grad_b,
                std::vector<double>* dx) const {
    if (dx) dx->assign(static_cast<std::size_t>(in), 0.0);
    for (int o = 0; o < out; ++o) {
      const double g = dy[o];
      grad_b[o] += g;
      const double* wr = &w[static_cast<std::size_t>(o) * in];
      double* dwr = &grad_w[static_cast<std::size_t>(o) * in];
      for (int i = 0; i < in; ++i) dwr[i] += g * x[i];
      if (dx)
        for (int i = 0; i < in; ++i) (*dx)[i] += g * wr[i];
    }
  }
};

// Non-overlapping max pooling with window 2 along the temporal axis; ties
// resolve to the earlier element.
inline void maxpool1d_forward(const Tensor2& x, Tensor2& y, std::vector<int>& argmax) {
  if (x.t % 2 != 0) throw std::invalid_argument("maxpool1d: temporal length must be even");
  y.resize(x.t / 2, x.channels);
  argmax.assign(y.v.size(), 0);
  for (int t = 0; t < y.t; ++t) {
    for (int c = 0; c < x.channels; ++c) {
      const double a = x.at(2 * t, c);
      const double bb = x.at(2 * t + 1, c);
      if (bb > a) {
        y.at(t, c) = bb;
        argmax[static_cast<std::size_t>(t) * x.channels + c] = 1;
      } else {
        y.at(t, c) = a;
      }
    }
  }
}

inline void maxpool1d_backward(const Tensor2& dy, const std::vector<int>& argmax, Tensor2& dx) {
  dx.resize(dy.t * 2, dy.channels);
  for (int t = 0; t < dy.t; ++t)
    for (int c = 0; c < dy.channels; ++c)
      dx.at(2 * t + argmax[static_cast<std::size_t>(t) * dy.channels + c], c) = dy.at(t, c);
}

inline Tensor2 maxpool1d(const Tensor2& x) {
  Tensor2 y;
  std::vector<int> argmax;
  maxpool1d_forward(x, y, argmax);
  return y;
}

inline void relu_inplace(Tensor2& x) {
  for (auto& v : x.v) v = std::max(0.0, v);
}

struct TrainConfig {
  int epochs = 100;
  int batch_size = 64;
  double learning_rate = 1e-4;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;
  std::uint64_t seed = 0;
  double validation_fraction = 0.2;
  bool guarded_descent = false;  // test mode: halve lr and retry on any loss increase
  int threads = 2;
};

// The fixed regression topology: three stacks of two conv layers (the first
// stack k=2 with zero padding, the others k=3 unpadded) interleaved with
// pool-2, then dense 128 -> dense 2. Temporal lengths run
// 32 -> 32 -> 32 -> 16 -> 14 -> 12 -> 6 -> 4 -> 2 -> 1.
struct NetParams {
  Conv1dLayer c1{8, 32, 2, true};
  Conv1dLayer c2{32, 32, 2, true};
  Conv1dLayer c3{32, 64, 3, false};
  Conv1dLayer c4{64, 64, 3, false};
  Conv1dLayer c5{64, 128, 3, false};
  Conv1dLayer c6{128, 128, 3, false};
  DenseLayer d1{128, 128};
  DenseLayer d2{128, 2};

  NetParams() {
    c1.allocate(); c2.allocate(); c3.allocate();
    c4.allocate(); c5.allocate(); c6.allocate();
    d1.allocate(); d2.allocate();
  }

  struct NamedArray {
    const char* name;
    std::vector<double>* values;
    std::vector<int> shape;
  };

  std::vector<NamedArray> arrays() {
    return {
        {"c1.kernel", &c1.w, {c1.cout, c1.k, c1.cin}}, {"c1.bias", &c1.b, {c1.cout}},
        {"c2.kernel", &c2.w, {c2.cout, c2.k, c2.cin}}, {"c2.bias", &c2.b, {c2.cout}},
        {"c3.kernel", &c3.w, {c3.cout, c3.k, c3.cin}}, {"c3.bias", &c3.b, {c3.cout}},
        {"c4.kernel", &c4.w, {c4.cout, c4.k, c4.cin}}, {"c4.bias", &c4.b, {c4.cout}},
        {"c5.kernel", &c5.w, {c5.cout, c5.k, c5.cin}}, {"c5.bias", &c5.b, {c5.cout}},
        {"c6.kernel", &c6.w, {c6.cout, c6.k, c6.cin}}, {"c6.bias", &c6.b, {c6.cout}},
        {"d1.weight", &d1.w, {d1.out, d1.in}}, {"d1.bias", &d1.b, {d1.out}},
        {"d2.weight", &d2.w, {d2.out, d2.in}}, {"d2.bias", &d2.b, {d2.out}},
    };
  }

  void fill_zero() {
    for (auto& a : arrays()) std::fill(a.values->begin(), a.values->end(), 0.0);
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto& a : arrays()) n += a.values->size();
    return n;
  }
};

// Trainable weights plus the normalization constants needed to map between
// patch elevations / joules and network units.
struct EnergyNetWeights {
  NetParams params;
  double input_scale = 0.5;  // [m]; patch values are divided by this
  std::array<double, 2> target_mean{0.0, 0.0};
  std::array<double, 2> target_std{1.0, 1.0};
  std::string version = "v1";
  TrainConfig train_config;
};

// Intermediate activations of one forward pass, kept for backprop. Reused
// across samples to avoid churn.
struct Activations {
  Tensor2 x, a1, h1, a2, h2, p1, a3, h3, a4, h4, p2, a5, h5, a6, h6, p3;
  std::vector<int> i1, i2, i3;
  std::vector<double> flat, z1, h7, z2;
};

namespace detail {

inline void relu_copy(const Tensor2& a, Tensor2& h) {
  h.resize(a.t, a.channels);
  for (std::size_t i = 0; i < a.v.size(); ++i) h.v[i] = std::max(0.0, a.v[i]);
}

inline void maxpool_capture(const Tensor2& x, Tensor2& y, std::vector<int>& idx) {
  maxpool1d_forward(x, y, idx);
}

}  // namespace detail

// Runs the network on one patch; returns the two head outputs in normalized
// units (denormalization is the caller's job).
inline std::array<double, 2> net_forward(const NetParams& p, const TerrainPatch& patch,
                                         double input_scale, Activations& act) {
  act.x.resize(kPatchRows, kPatchCols);
  for (int r = 0; r < kPatchRows; ++r)
    for (int c = 0; c < kPatchCols; ++c)
      act.x.at(r, c) = patch.at(r, c) / input_scale;

  p.c1.forward(act.x, act.a1);
  detail::relu_copy(act.a1, act.h1);
  p.c2.forward(act.h1, act.a2);
  detail::relu_copy(act.a2, act.h2);
  detail::maxpool_capture(act.h2, act.p1, act.i1);

  p.c3.forward(act.p1, act.a3);
  detail::relu_copy(act.a3, act.h3);
  p.c4.forward(act.h3, act.a4);
  detail::relu_copy(act.a4, act.h4);
  detail::maxpool_capture(act.h4, act.p2, act.i2);

  p.c5.forward(act.p2, act.a5);
  detail::relu_copy(act.a5, act.h5);
  p.c6.forward(act.h5, act.a6);
  detail::relu_copy(act.a6, act.h6);
  detail::maxpool_capture(act.h6, act.p3, act.i3);

  act.flat.assign(act.p3.v.begin(), act.p3.v.end());
  p.d1.forward(act.flat, act.z1);
  act.h7.resize(act.z1.size());
  for (std::size_t i = 0; i < act.z1.size(); ++i) act.h7[i] = std::max(0.0, act.z1[i]);
  p.d2.forward(act.h7, act.z2);
  return {act.z2[0], act.z2[1]};
}

// Temporal length after each stage (input, conv x2, pool, conv x2, pool,
// conv x2, pool).
inline std::vector<int> temporal_trace(const NetParams& p) {
  std::vector<int> trace;
  int t = kPatchRows;
  trace.push_back(t);
  t = p.c1.out_len(t); trace.push_back(t);
  t = p.c2.out_len(t); trace.push_back(t);
  t /= 2; trace.push_back(t);
  t = p.c3.out_len(t); trace.push_back(t);
  t = p.c4.out_len(t); trace.push_back(t);
  t /= 2; trace.push_back(t);
  t = p.c5.out_len(t); trace.push_back(t);
  t = p.c6.out_len(t); trace.push_back(t);
  t /= 2; trace.push_back(t);
  return trace;
}

// Predicted (consumption, recovery) in joules.
inline std::pair<double, double> energynet_forward(const TerrainPatch& patch,
                                                   const EnergyNetWeights& w) {
  Activations act;
  const auto z = net_forward(w.params, patch, w.input_scale, act);
  return {z[0] * w.target_std[0] + w.target_mean[0],
          z[1] * w.target_std[1] + w.target_mean[1]};
}

struct TrainSample {
  TerrainPatch patch;
  double e_c = 0.0;  // [J]
  double e_r = 0.0;  // [J]
};

namespace detail {

inline void relu_grad_inplace(const Tensor2& pre, Tensor2& grad) {
  for (std::size_t i = 0; i < grad.v.size(); ++i)
    if (pre.v[i] <= 0.0) grad.v[i] = 0.0;
}

// Backprop of one sample given d(loss)/d(head outputs). Gradients are
// accumulated into `g`.
inline void net_backward(const NetParams& p, const Activations& act,
                         const std::array<double, 2>& dz2, NetParams& g,
                         Activations& scratch) {
  std::vector<double>& dz2v = scratch.z2;
  dz2v.assign(dz2.begin(), dz2.end());
  std::vector<double> dh7;
  p.d2.backward(act.h7, dz2v, g.d2.w, g.d2.b, &dh7);
  for (std::size_t i = 0; i < dh7.size(); ++i)
    if (act.z1[i] <= 0.0) dh7[i] = 0.0;
  std::vector<double> dflat;
  p.d1.backward(act.flat, dh7, g.d1.w, g.d1.b, &dflat);

  Tensor2& dp3 = scratch.p3;
  dp3.resize(act.p3.t, act.p3.channels);
  dp3.v = dflat;
  Tensor2& dh6 = scratch.h6;
  maxpool1d_backward(dp3, act.i3, dh6);
  relu_grad_inplace(act.a6, dh6);
  Tensor2& dh5 = scratch.h5;
  p.c6.backward(act.h5, dh6, g.c6.w, g.c6.b, &dh5);
  relu_grad_inplace(act.a5, dh5);
  Tensor2& dp2 = scratch.p2;
  p.c5.backward(act.p2, dh5, g.c5.w, g.c5.b, &dp2);

  Tensor2& dh4 = scratch.h4;
  maxpool1d_backward(dp2, act.i2, dh4);
  relu_grad_inplace(act.a4, dh4);
  Tensor2& dh3 = scratch.h3;
  p.c4.backward(act.h3, dh4, g.c4.w, g.c4.b, &dh3);
  relu_grad_inplace(act.a3, dh3);
  Tensor2& dp1 = scratch.p1;
  p.c3.backward(act.p1, dh3, g.c3.w, g.c3.b, &dp1);

  Tensor2& dh2 = scratch.h2;
  maxpool1d_backward(dp1, act.i1, dh2);
  relu_grad_inplace(act.a2, dh2);
  Tensor2& dh1 = scratch.h1;
  p.c2.backward(act.h1, dh2, g.c2.w, g.c2.b, &dh1);
  relu_grad_inplace(act.a1, dh1);
  p.c1.backward(act.x, dh1, g.c1.w, g.c1.b, nullptr);
}

}  // namespace detail

// Mean-squared-error loss over a batch, averaged over samples and the two
// outputs; targets are expected in normalized units. Returns the loss and
// fills `grads` with d(loss)/d(parameters).
inline double batch_gradients(const NetParams& params, const std::vector<TrainSample>& batch,
                              const std::vector<std::array<double, 2>>& targets,
                              double input_scale, NetParams& grads, int threads) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const std::size_t n = batch.size();
  constexpr std::size_t kChunk = 8;  // fixed so results do not depend on thread count
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;

  static thread_local std::vector<NetParams> chunk_grads;
  static thread_local std::vector<double> chunk_loss;
  if (chunk_grads.size() < n_chunks) chunk_grads.resize(n_chunks);
  chunk_loss.assign(n_chunks, 0.0);

  parallel_for(n_chunks, static_cast<unsigned>(std::max(1, threads)), [&](std::size_t ci) {
    NetParams& g = chunk_grads[ci];
    g.fill_zero();
    Activations act, scratch;
    double loss = 0.0;
    const std::size_t lo = ci * kChunk;
    const std::size_t hi = std::min(n, lo + kChunk);
    for (std::size_t i = lo; i < hi; ++i) {
      const auto z = net_forward(params, batch[i].patch, input_scale, act);
      std::array<double, 2> dz{};
      for (int o = 0; o < 2; ++o) {
        const double e = z[o] - targets[i][o];
        loss += e * e;
        dz[o] = e / static_cast<double>(n);
      }
      detail::net_backward(params, act, dz, g, scratch);
    }
    chunk_loss[ci] = loss;
  });

  grads.fill_zero();
  auto dst = grads.arrays();
  for (std::size_t ci = 0; ci < n_chunks; ++ci) {
    auto src = chunk_grads[ci].arrays();
    for (std::size_t a = 0; a < dst.size(); ++a) {
      const auto& s = *src[a].values;
      auto& d = *dst[a].values;
      for (std::size_t j = 0; j < d.size(); ++j) d[j] += s[j];
    }
  }
  double loss = 0.0;
  for (std::size_t ci = 0; ci < n_chunks; ++ci) loss += chunk_loss[ci];
  return loss / (2.0 * static_cast<double>(n));
}

// RMSprop: s <- rho*s + (1-rho)*g^2; p <- p - lr*g/(sqrt(s) + eps).
inline void rmsprop_step(NetParams& params, NetParams& grads, NetParams& state,
                         const TrainConfig& cfg, double lr_override = -1.0) {
  const double lr = lr_override > 0.0 ? lr_override : cfg.learning_rate;
  auto pa = params.arrays();
  auto ga = grads.arrays();
  auto sa = state.arrays();
  for (std::size_t a = 0; a < pa.size(); ++a) {
    auto& p = *pa[a].values;
    const auto& g = *ga[a].values;
    auto& s = *sa[a].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      s[i] = cfg.rmsprop_decay * s[i] + (1.0 - cfg.rmsprop_decay) * g[i] * g[i];
      p[i] -= lr * g[i] / (std::sqrt(s[i]) + cfg.rmsprop_epsilon);
    }
  }
}

struct EpochStats {
  double train_mse = 0.0;  // normalized units, mean over samples and outputs
  double val_mse = 0.0;
};

struct TrainResult {
  EnergyNetWeights weights;
  std::vector<EpochStats> history;
};

namespace detail {

inline void init_weights(NetParams& params, Rng& rng) {
  auto arrays = params.arrays();
  for (auto& a : arrays) {
    const std::string name = a.name;
    if (name.find("bias") != std::string::npos) {
      std::fill(a.values->begin(), a.values->end(), 0.0);
      continue;
    }
    // fan_in / fan_out per layer kind
    double fan_in = 0, fan_out = 0;
    if (a.shape.size() == 3) {
      fan_in = static_cast<double>(a.shape[2]) * a.shape[1];
      fan_out = static_cast<double>(a.shape[0]) * a.shape[1];
    } else {
      fan_in = a.shape[1];
      fan_out = a.shape[0];
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : *a.values) v = rng.uniform(-limit, limit);
  }
}

inline double dataset_mse(const NetParams& params, const std::vector<TrainSample>& samples,
                          const std::vector<std::array<double, 2>>& targets,
                          const std::vector<std::size_t>& idx, double input_scale,
                          int threads) {
  if (idx.empty()) return 0.0;
  constexpr std::size_t kChunk = 64;
  const std::size_t n_chunks = (idx.size() + kChunk - 1) / kChunk;
  std::vector<double> chunk_sums(n_chunks, 0.0);
  parallel_for(n_chunks, static_cast<unsigned>(std::max(1, threads)), [&](std::size_t ci) {
    Activations act;
    double acc = 0.0;
    const std::size_t lo = ci * kChunk;
    const std::size_t hi = std::min(idx.size(), lo + kChunk);
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& s = samples[idx[i]];
      const auto z = net_forward(params, s.patch, input_scale, act);
      for (int o = 0; o < 2; ++o) {
        const double e = z[o] - targets[idx[i]][o];
        acc += e * e;
      }
    }
    chunk_sums[ci] = acc;
  });
  double total = 0.0;
  for (double s : chunk_sums) total += s;
  return total / (2.0 * static_cast<double>(idx.size()));
}

}  // namespace detail

// Mini-batch RMSprop training on normalized targets with a seeded split into
// train/validation parts. Deterministic in cfg.seed for any thread count.
inline TrainResult train(const std::vector<TrainSample>& dataset, const TrainConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  if (static_cast<int>(dataset.size()) < cfg.batch_size)
    throw std::invalid_argument("dataset smaller than one batch");
  if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0))
    throw std::invalid_argument("validation_fraction must be in (0,1)");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0))
    throw std::invalid_argument("invalid training configuration");

  Rng rng(cfg.seed);
  TrainResult result;
  result.weights.train_config = cfg;
  detail::init_weights(result.weights.params, rng);

  // Seeded shuffle, then the tail becomes the validation split.
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size() - 1; i > 0; --i)
    std::swap(order[i], order[rng.below(i + 1)]);
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(cfg.validation_fraction * static_cast<double>(dataset.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, dataset.size() - 1);
  std::vector<std::size_t> train_idx(order.begin(), order.end() - static_cast<long>(n_val));
  std::vector<std::size_t> val_idx(order.end() - static_cast<long>(n_val), order.end());

  // Target normalization from the training split only.
  auto& w = result.weights;
  for (int o = 0; o < 2; ++o) {
    double mean = 0.0;
    for (std::size_t i : train_idx)
      mean += (o == 0 ? dataset[i].e_c : dataset[i].e_r);
    mean /= static_cast<double>(train_idx.size());
    double var = 0.0;
    for (std::size_t i : train_idx) {
      const double v = (o == 0 ? dataset[i].e_c : dataset[i].e_r) - mean;
      var += v * v;
    }
    var /= static_cast<double>(train_idx.size());
    w.target_mean[o] = mean;
    w.target_std[o] = std::max(std::sqrt(var), 1e-9);
  }
  std::vector<std::array<double, 2>> targets(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    targets[i][0] = (dataset[i].e_c - w.target_mean[0]) / w.target_std[0];
    targets[i][1] = (dataset[i].e_r - w.target_mean[1]) / w.target_std[1];
  }

  NetParams grads, opt_state;
  grads.fill_zero();
  opt_state.fill_zero();
  std::vector<TrainSample> batch(static_cast<std::size_t>(cfg.batch_size));
  std::vector<std::array<double, 2>> batch_targets(static_cast<std::size_t>(cfg.batch_size));

  double lr = cfg.learning_rate;
  double prev_mse = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Snapshots make the guarded-descent retry possible; skipped otherwise.
    NetParams params_snap;
    NetParams state_snap;
    Rng rng_snap(0);
    if (cfg.guarded_descent) {
      params_snap = result.weights.params;
      state_snap = opt_state;
      rng_snap = rng;
    }

    for (int attempt = 0;; ++attempt) {
      for (std::size_t i = train_idx.size() - 1; i > 0; --i)
        std::swap(train_idx[i], train_idx[rng.below(i + 1)]);
      const std::size_t n_batches = train_idx.size() / static_cast<std::size_t>(cfg.batch_size);
      for (std::size_t bi = 0; bi < n_batches; ++bi) {
        for (int j = 0; j < cfg.batch_size; ++j) {
          const std::size_t src = train_idx[bi * cfg.batch_size + j];
          batch[static_cast<std::size_t>(j)] = dataset[src];
          batch_targets[static_cast<std::size_t>(j)] = targets[src];
        }
        batch_gradients(result.weights.params, batch, batch_targets, w.input_scale, grads,
                        cfg.threads);
        rmsprop_step(result.weights.params, grads, opt_state, cfg, lr);
      }
      const double train_mse = detail::dataset_mse(result.weights.params, dataset, targets,
                                                   train_idx, w.input_scale, cfg.threads);
      if (!cfg.guarded_descent || train_mse <= prev_mse || attempt >= 64) {
        const double val_mse = detail::dataset_mse(result.weights.params, dataset, targets,
                                                   val_idx, w.input_scale, cfg.threads);
        result.history.push_back({train_mse, val_mse});
        prev_mse = train_mse;
        break;
      }
      // Loss went up: rewind the epoch and retry at half the step size.
      result.weights.params = params_snap;
      opt_state = state_snap;
      rng = rng_snap;
      lr *= 0.5;
    }
  }
  return result;
}

struct Metrics {
  double mae = 0.0;  // [J]
  double mse = 0.0;  // [J^2]
  double r2 = 0.0;
};

// mae/mse/r2 of predictions against ground truth. r2 is NaN when the truth
// has zero variance.
inline Metrics metrics(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw std::invalid_argument("metrics: size mismatch or empty input");
  const double n = static_cast<double>(pred.size());
  double mean_truth = 0.0;
  for (double y : truth) mean_truth += y;
  mean_truth /= n;
  Metrics m;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    m.mae += std::abs(e);
    m.mse += e * e;
    ss_res += e * e;
    const double d = truth[i] - mean_truth;
    ss_tot += d * d;
  }
  m.mae /= n;
  m.mse /= n;
  m.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : std::numeric_limits<double>::quiet_NaN();
  return m;
}

// ---- weights file -------------------------------------------------------

inline void save_weights(const EnergyNetWeights& w, const std::string& path) {
  auto f = open_output(path);
  f << "terravolt-weights " << w.version << "\n";
  f << "input_scale " << format_double(w.input_scale) << "\n";
  f << "target_mean " << format_double(w.target_mean[0]) << ' '
    << format_double(w.target_mean[1]) << "\n";
  f << "target_std " << format_double(w.target_std[0]) << ' '
    << format_double(w.target_std[1]) << "\n";
  const TrainConfig& c = w.train_config;
  f << "train_config epochs " << c.epochs << " batch_size " << c.batch_size
    << " learning_rate " << format_double(c.learning_rate) << " rmsprop_decay "
    << format_double(c.rmsprop_decay) << " rmsprop_epsilon "
    << format_double(c.rmsprop_epsilon) << " seed " << c.seed
    << " validation_fraction " << format_double(c.validation_fraction) << "\n";
  auto arrays = const_cast<EnergyNetWeights&>(w).params.arrays();
  for (const auto& a : arrays) {
    f << "layer " << a.name;
    for (int d : a.shape) f << ' ' << d;
    f << "\n";
    std::size_t per_line = a.values->size();
    if (a.shape.size() > 1) per_line = a.values->size() / static_cast<std::size_t>(a.shape[0]);
    for (std::size_t i = 0; i < a.values->size(); ++i) {
      f << format_double((*a.values)[i]);
      f << (((i + 1) % per_line == 0) ? '\n' : ' ');
    }
  }
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

inline EnergyNetWeights load_weights(const std::string& path) {
  auto f = open_input(path);
  EnergyNetWeights w;
  std::string line;
  int line_no = 0;
  auto next = [&]() {
    if (!std::getline(f, line))
      throw parse_error("line " + std::to_string(line_no + 1) + ": unexpected end of file");
    ++line_no;
    return split_ws(line);
  };
  auto head = next();
  if (head.size() != 2 || head[0] != "terravolt-weights")
    throw parse_error("not a terravolt weights file");
  w.version = head[1];

  auto scale = next();
  if (scale.size() != 2 || scale[0] != "input_scale") throw parse_error("expected input_scale");
  w.input_scale = parse_double(scale[1], line_no);
  auto tm = next();
  if (tm.size() != 3 || tm[0] != "target_mean") throw parse_error("expected target_mean");
  w.target_mean = {parse_double(tm[1], line_no), parse_double(tm[2], line_no)};
  auto ts = next();
  if (ts.size() != 3 || ts[0] != "target_std") throw parse_error("expected target_std");
  w.target_std = {parse_double(ts[1], line_no), parse_double(ts[2], line_no)};
  if (!(w.target_std[0] > 0.0 && w.target_std[1] > 0.0))
    throw parse_error("target_std must be positive");
  auto tc = next();
  if (tc.size() != 15 || tc[0] != "train_config") throw parse_error("expected train_config");
  w.train_config.epochs = static_cast<int>(parse_long(tc[2], line_no));
  w.train_config.batch_size = static_cast<int>(parse_long(tc[4], line_no));
  w.train_config.learning_rate = parse_double(tc[6], line_no);
  w.train_config.rmsprop_decay = parse_double(tc[8], line_no);
  w.train_config.rmsprop_epsilon = parse_double(tc[10], line_no);
  w.train_config.seed = static_cast<std::uint64_t>(parse_long(tc[12], line_no));
  w.train_config.validation_fraction = parse_double(tc[14], line_no);

  auto arrays = w.params.arrays();
  for (auto& a : arrays) {
    auto hdr = next();
    if (hdr.size() != 2 + a.shape.size() || hdr[0] != "layer" || hdr[1] != a.name)
      throw parse_error("line " + std::to_string(line_no) + ": expected layer " + a.name);
    for (std::size_t d = 0; d < a.shape.size(); ++d)
      if (parse_long(hdr[2 + d], line_no) != a.shape[d])
        throw parse_error("line " + std::to_string(line_no) + ": shape mismatch for " + a.name);
    std::size_t per_line = a.values->size();
    if (a.shape.size() > 1) per_line = a.values->size() / static_cast<std::size_t>(a.shape[0]);
    std::size_t filled = 0;
    while (filled < a.values->size()) {
      auto toks = next();
      if (toks.size() != per_line)
        throw parse_error("line " + std::to_string(line_no) + ": expected " +
                          std::to_string(per_line) + " values");
      for (const auto& t : toks) (*a.values)[filled++] = parse_double(t, line_no);
    }
  }
  return w;
}

}  // namespace terravolt
