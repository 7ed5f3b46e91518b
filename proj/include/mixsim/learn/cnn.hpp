#pragma once

// 1D CNN over a single-channel feature sequence:
//
//   conv(3, C1, same) -> BN -> ReLU -> maxpool(2)
//   conv(3, C2, same) -> BN -> ReLU -> maxpool(2)
//   global average pool -> dense(out)
//
// out = 1 (sigmoid, binary) or number of classes (softmax). Convolutions have
// no bias since batch norm follows. Buffers are [batch][channel][time].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mixsim/error.hpp"
#include "mixsim/rng.hpp"

namespace mixsim::learn {

struct CnnArch {
  std::size_t input_length = 0;
  std::size_t conv1 = 32;
  std::size_t conv2 = 64;
  std::size_t kernel = 3;
  std::size_t outputs = 1;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;

  std::size_t len1() const { return input_length / 2; }
  std::size_t len2() const { return len1() / 2; }
  bool binary() const { return outputs == 1; }
  friend bool operator==(const CnnArch&, const CnnArch&) = default;
};

/// Trainable parameters. The same layout holds gradients and Adam moments.
struct CnnParams {
  std::vector<double> w1;  // [C1][1][K]
  std::vector<double> gamma1, beta1;
  std::vector<double> w2;  // [C2][C1][K]
  std::vector<double> gamma2, beta2;
  std::vector<double> wd;  // [out][C2]
  std::vector<double> bd;

  static CnnParams zeros(const CnnArch& a) {
    CnnParams p;
    p.w1.assign(a.conv1 * a.kernel, 0.0);
    p.gamma1.assign(a.conv1, 0.0);
    p.beta1.assign(a.conv1, 0.0);
    p.w2.assign(a.conv2 * a.conv1 * a.kernel, 0.0);
    p.gamma2.assign(a.conv2, 0.0);
    p.beta2.assign(a.conv2, 0.0);
    p.wd.assign(a.outputs * a.conv2, 0.0);
    p.bd.assign(a.outputs, 0.0);
    return p;
  }

  template <class F>
  void for_each_group(F&& f) {
    f("conv1.kernel", w1);
    f("bn1.gamma", gamma1);
    f("bn1.beta", beta1);
    f("conv2.kernel", w2);
    f("bn2.gamma", gamma2);
    f("bn2.beta", beta2);
    f("dense.weight", wd);
    f("dense.bias", bd);
  }
  template <class F>
  void for_each_group(F&& f) const {
    const_cast<CnnParams*>(this)->for_each_group([&](const char* name, std::vector<double>& v) {
      f(name, static_cast<const std::vector<double>&>(v));
    });
  }
  friend bool operator==(const CnnParams&, const CnnParams&) = default;
};

struct BnRunning {
  std::vector<double> mean1, var1, mean2, var2;
  friend bool operator==(const BnRunning&, const BnRunning&) = default;
};

struct CnnNet {
  CnnArch arch;
  CnnParams params;
  BnRunning running;
  friend bool operator==(const CnnNet&, const CnnNet&) = default;
};

/// He-normal kernels and dense weights, gamma = 1, beta = 0.
inline CnnNet init_cnn(const CnnArch& a, Rng& rng) {
  if (a.input_length < 4) fail(Errc::ShapeMismatch, "input length must be at least 4");
  if (a.outputs == 0 || a.kernel % 2 == 0) fail(Errc::ShapeMismatch, "invalid architecture");
  CnnNet n;
  n.arch = a;
  n.params = CnnParams::zeros(a);
  const double s1 = std::sqrt(2.0 / static_cast<double>(a.kernel));
  for (auto& w : n.params.w1) w = rng.normal(0.0, s1);
  const double s2 = std::sqrt(2.0 / static_cast<double>(a.conv1 * a.kernel));
  for (auto& w : n.params.w2) w = rng.normal(0.0, s2);
  const double sd = std::sqrt(2.0 / static_cast<double>(a.conv2));
  for (auto& w : n.params.wd) w = rng.normal(0.0, sd);
  std::fill(n.params.gamma1.begin(), n.params.gamma1.end(), 1.0);
  std::fill(n.params.gamma2.begin(), n.params.gamma2.end(), 1.0);
  n.running.mean1.assign(a.conv1, 0.0);
  n.running.var1.assign(a.conv1, 1.0);
  n.running.mean2.assign(a.conv2, 0.0);
  n.running.var2.assign(a.conv2, 1.0);
  return n;
}

enum class Mode { Train, Infer };

/// Forward activations kept for the backward pass.
struct CnnCache {
  std::size_t batch = 0;
  std::vector<double> x;
  std::vector<double> xhat1, a1, p1;
  std::vector<std::uint32_t> idx1;
  std::vector<double> invstd1;
  std::vector<double> xhat2, a2, p2;
  std::vector<std::uint32_t> idx2;
  std::vector<double> invstd2;
  std::vector<double> g;
  std::vector<double> logits;
  std::vector<double> probs;
};

namespace detail {

inline constexpr std::size_t kBlock = 8;

// Copies `rows` rows of `len` into rows of len + 2*half with zero borders, plus
// kBlock slack at the end so blocked loops may over-read.
inline void pad_rows(const double* src, std::size_t rows, std::size_t len, std::size_t half,
                     std::vector<double>& out) {
  const std::size_t w = len + 2 * half;
  out.assign(rows * w + kBlock, 0.0);
  for (std::size_t r = 0; r < rows; ++r) std::copy(src + r * len, src + (r + 1) * len, &out[r * w + half]);
}

// out[b][o][t] = sum_i sum_k w[o][i][k] * in[b][i][t + k - K/2], zero padded.
inline void conv_forward(const std::vector<double>& in, std::size_t batch, std::size_t cin, std::size_t len,
                         const std::vector<double>& w, std::size_t cout, std::size_t kernel,
                         std::vector<double>& out) {
  out.assign(batch * cout * len, 0.0);
  const std::size_t half = kernel / 2;
  const std::size_t pw = len + 2 * half;
  std::vector<double> padded;
  for (std::size_t b = 0; b < batch; ++b) {
    pad_rows(&in[b * cin * len], cin, len, half, padded);
    for (std::size_t o = 0; o < cout; ++o) {
      double* dst = &out[(b * cout + o) * len];
      for (std::size_t t0 = 0; t0 < len; t0 += kBlock) {
        double acc[kBlock] = {};
        for (std::size_t i = 0; i < cin; ++i) {
          const double* src = &padded[i * pw + t0];
          const double* wv = &w[(o * cin + i) * kernel];
          for (std::size_t k = 0; k < kernel; ++k) {
            const double wk = wv[k];
            for (std::size_t j = 0; j < kBlock; ++j) acc[j] += wk * src[k + j];
          }
        }
        const std::size_t n = std::min(kBlock, len - t0);
        for (std::size_t j = 0; j < n; ++j) dst[t0 + j] = acc[j];
      }
    }
  }
}

// dw[o][i][k] = sum_b sum_t dout[b][o][t] * in[b][i][t + k - K/2]
// din[b][i][t] = sum_o sum_k w[o][i][k] * dout[b][o][t - k + K/2]
inline void conv_backward(const std::vector<double>& in, std::size_t batch, std::size_t cin, std::size_t len,
                          const std::vector<double>& w, std::size_t cout, std::size_t kernel,
                          const std::vector<double>& dout, std::vector<double>& dw, std::vector<double>* din) {
  const std::size_t half = kernel / 2;
  const std::size_t pw = len + 2 * half;
  const std::size_t cpad = (cout + kBlock - 1) / kBlock * kBlock;
  std::vector<double> dwt(cin * kernel * cpad, 0.0);  // [i][k][o]
  std::vector<double> gt(len * cpad, 0.0);            // dout transposed to [t][o]
  std::vector<double> padded;
  std::vector<double> gpad;
  if (din) din->assign(batch * cin * len, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* g = &dout[b * cout * len];
    for (std::size_t o = 0; o < cout; ++o) {
      for (std::size_t t = 0; t < len; ++t) gt[t * cpad + o] = g[o * len + t];
    }
    pad_rows(&in[b * cin * len], cin, len, half, padded);
    for (std::size_t i = 0; i < cin; ++i) {
      const double* src = &padded[i * pw];
      for (std::size_t k = 0; k < kernel; ++k) {
        double* accp = &dwt[(i * kernel + k) * cpad];
        for (std::size_t o0 = 0; o0 < cpad; o0 += kBlock) {
          double acc[kBlock] = {};
          for (std::size_t t = 0; t < len; ++t) {
            const double s = src[t + k];
            const double* gr = &gt[t * cpad + o0];
            for (std::size_t j = 0; j < kBlock; ++j) acc[j] += gr[j] * s;
          }
          for (std::size_t j = 0; j < kBlock; ++j) accp[o0 + j] += acc[j];
        }
      }
    }
    if (!din) continue;
    pad_rows(g, cout, len, half, gpad);
    for (std::size_t i = 0; i < cin; ++i) {
      double* dst = &(*din)[(b * cin + i) * len];
      for (std::size_t t0 = 0; t0 < len; t0 += kBlock) {
        double acc[kBlock] = {};
        for (std::size_t o = 0; o < cout; ++o) {
          const double* gr = &gpad[o * pw + t0];
          const double* wv = &w[(o * cin + i) * kernel];
          for (std::size_t k = 0; k < kernel; ++k) {
            const double wk = wv[k];
            const double* s = gr + 2 * half - k;
            for (std::size_t j = 0; j < kBlock; ++j) acc[j] += wk * s[j];
          }
        }
        const std::size_t n = std::min(kBlock, len - t0);
        for (std::size_t j = 0; j < n; ++j) dst[t0 + j] = acc[j];
      }
    }
  }
  dw.assign(w.size(), 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t i = 0; i < cin; ++i) {
      for (std::size_t k = 0; k < kernel; ++k) dw[(o * cin + i) * kernel + k] = dwt[(i * kernel + k) * cpad + o];
    }
  }
}

// Batch norm + ReLU in place on z; writes xhat and the per-channel 1/std.
inline void bn_relu_forward(std::vector<double>& z, std::size_t batch, std::size_t ch, std::size_t len,
                            const std::vector<double>& gamma, const std::vector<double>& beta,
                            std::vector<double>& run_mean, std::vector<double>& run_var, const CnnArch& a, Mode mode,
                            bool update_running, std::vector<double>& xhat, std::vector<double>& invstd) {
  xhat.resize(z.size());
  invstd.assign(ch, 0.0);
  const double n = static_cast<double>(batch * len);
  for (std::size_t c = 0; c < ch; ++c) {
    double mean = run_mean[c];
    double var = run_var[c];
    if (mode == Mode::Train) {
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* p = &z[(b * ch + c) * len];
        for (std::size_t t = 0; t < len; ++t) s += p[t];
      }
      mean = s / n;
      double ss = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* p = &z[(b * ch + c) * len];
        for (std::size_t t = 0; t < len; ++t) ss += (p[t] - mean) * (p[t] - mean);
      }
      var = ss / n;
      if (update_running) {
        run_mean[c] = a.bn_momentum * run_mean[c] + (1.0 - a.bn_momentum) * mean;
        run_var[c] = a.bn_momentum * run_var[c] + (1.0 - a.bn_momentum) * var;
      }
    }
    const double is = 1.0 / std::sqrt(var + a.bn_eps);
    invstd[c] = is;
    for (std::size_t b = 0; b < batch; ++b) {
      double* p = &z[(b * ch + c) * len];
      double* xh = &xhat[(b * ch + c) * len];
      for (std::size_t t = 0; t < len; ++t) {
        xh[t] = (p[t] - mean) * is;
        const double y = gamma[c] * xh[t] + beta[c];
        p[t] = y > 0.0 ? y : 0.0;
      }
    }
  }
}

// da is the gradient w.r.t. the ReLU output; returns dz in place of da.
inline void bn_relu_backward(std::vector<double>& da, const std::vector<double>& a_out,
                             const std::vector<double>& xhat, const std::vector<double>& invstd, std::size_t batch,
                             std::size_t ch, std::size_t len, const std::vector<double>& gamma,
                             std::vector<double>& dgamma, std::vector<double>& dbeta) {
  dgamma.assign(ch, 0.0);
  dbeta.assign(ch, 0.0);
  const double n = static_cast<double>(batch * len);
  for (std::size_t c = 0; c < ch; ++c) {
    double sg = 0.0;
    double sb = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t base = (b * ch + c) * len;
      for (std::size_t t = 0; t < len; ++t) {
        const double dy = a_out[base + t] > 0.0 ? da[base + t] : 0.0;
        da[base + t] = dy;
        sg += dy * xhat[base + t];
        sb += dy;
      }
    }
    dgamma[c] = sg;
    dbeta[c] = sb;
    const double k = gamma[c] * invstd[c] / n;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t base = (b * ch + c) * len;
      for (std::size_t t = 0; t < len; ++t) {
        da[base + t] = k * (n * da[base + t] - sb - xhat[base + t] * sg);
      }
    }
  }
}

// Max over pairs (2t, 2t+1); a trailing odd element is dropped.
inline void pool_forward(const std::vector<double>& in, std::size_t rows, std::size_t len, std::vector<double>& out,
                         std::vector<std::uint32_t>& idx) {
  const std::size_t half = len / 2;
  out.resize(rows * half);
  idx.resize(rows * half);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = &in[r * len];
    for (std::size_t t = 0; t < half; ++t) {
      const bool second = src[2 * t + 1] > src[2 * t];
      out[r * half + t] = second ? src[2 * t + 1] : src[2 * t];
      idx[r * half + t] = static_cast<std::uint32_t>(2 * t + (second ? 1 : 0));
    }
  }
}

inline void pool_backward(const std::vector<double>& dout, const std::vector<std::uint32_t>& idx, std::size_t rows,
                          std::size_t len, std::vector<double>& din) {
  const std::size_t half = len / 2;
  din.assign(rows * len, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < half; ++t) din[r * len + idx[r * half + t]] += dout[r * half + t];
  }
}

}  // namespace detail

/// Runs the network on `batch` row-major inputs of arch.input_length. In
/// Train mode batch statistics are used (and folded into the running stats
/// when update_running is set).
inline const std::vector<double>& cnn_forward(CnnNet& net, const std::vector<double>& x, std::size_t batch, Mode mode,
                                              CnnCache& c, bool update_running = true) {
  const auto& a = net.arch;
  const auto& p = net.params;
  if (x.size() != batch * a.input_length) fail(Errc::ShapeMismatch, "input batch has the wrong size");
  const std::size_t L = a.input_length;
  const std::size_t L1 = a.len1();
  const std::size_t L2 = a.len2();
  c.batch = batch;
  c.x = x;

  std::vector<double> z;
  detail::conv_forward(c.x, batch, 1, L, p.w1, a.conv1, a.kernel, z);
  detail::bn_relu_forward(z, batch, a.conv1, L, p.gamma1, p.beta1, net.running.mean1, net.running.var1, a, mode,
                          update_running, c.xhat1, c.invstd1);
  c.a1 = std::move(z);
  detail::pool_forward(c.a1, batch * a.conv1, L, c.p1, c.idx1);

  detail::conv_forward(c.p1, batch, a.conv1, L1, p.w2, a.conv2, a.kernel, z);
  detail::bn_relu_forward(z, batch, a.conv2, L1, p.gamma2, p.beta2, net.running.mean2, net.running.var2, a, mode,
                          update_running, c.xhat2, c.invstd2);
  c.a2 = std::move(z);
  detail::pool_forward(c.a2, batch * a.conv2, L1, c.p2, c.idx2);

  c.g.assign(batch * a.conv2, 0.0);
  for (std::size_t r = 0; r < batch * a.conv2; ++r) {
    double s = 0.0;
    for (std::size_t t = 0; t < L2; ++t) s += c.p2[r * L2 + t];
    c.g[r] = s / static_cast<double>(L2);
  }

  c.logits.assign(batch * a.outputs, 0.0);
  c.probs.assign(batch * a.outputs, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < a.outputs; ++o) {
      double s = p.bd[o];
      for (std::size_t k = 0; k < a.conv2; ++k) s += p.wd[o * a.conv2 + k] * c.g[b * a.conv2 + k];
      c.logits[b * a.outputs + o] = s;
    }
    if (a.binary()) {
      const double z0 = c.logits[b];
      c.probs[b] = z0 >= 0.0 ? 1.0 / (1.0 + std::exp(-z0)) : std::exp(z0) / (1.0 + std::exp(z0));
    } else {
      double mx = c.logits[b * a.outputs];
      for (std::size_t o = 1; o < a.outputs; ++o) mx = std::max(mx, c.logits[b * a.outputs + o]);
      double sum = 0.0;
      for (std::size_t o = 0; o < a.outputs; ++o) {
        c.probs[b * a.outputs + o] = std::exp(c.logits[b * a.outputs + o] - mx);
        sum += c.probs[b * a.outputs + o];
      }
      for (std::size_t o = 0; o < a.outputs; ++o) c.probs[b * a.outputs + o] /= sum;
    }
  }
  return c.probs;
}

/// Mean cross-entropy of the cached logits against class indices.
inline double cnn_loss(const CnnArch& a, const CnnCache& c, const std::vector<std::size_t>& target) {
  double loss = 0.0;
  for (std::size_t b = 0; b < c.batch; ++b) {
    if (a.binary()) {
      const double z = c.logits[b];
      const double y = target[b] == 1 ? 1.0 : 0.0;
      // log(1 + e^z) - y z, stable for large |z|
      loss += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y * z;
    } else {
      const double* lg = &c.logits[b * a.outputs];
      double mx = lg[0];
      for (std::size_t o = 1; o < a.outputs; ++o) mx = std::max(mx, lg[o]);
      double sum = 0.0;
      for (std::size_t o = 0; o < a.outputs; ++o) sum += std::exp(lg[o] - mx);
      loss += mx + std::log(sum) - lg[target[b]];
    }
  }
  return loss / static_cast<double>(c.batch);
}

/// Gradient of cnn_loss w.r.t. every parameter, for the cached Train-mode
/// forward pass.
inline CnnParams cnn_backward(const CnnNet& net, CnnCache& c, const std::vector<std::size_t>& target) {
  const auto& a = net.arch;
  const auto& p = net.params;
  const std::size_t B = c.batch;
  const std::size_t L = a.input_length;
  const std::size_t L1 = a.len1();
  const std::size_t L2 = a.len2();
  CnnParams grad = CnnParams::zeros(a);

  std::vector<double> dlogit(B * a.outputs);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t o = 0; o < a.outputs; ++o) {
      const double y = a.binary() ? (target[b] == 1 ? 1.0 : 0.0) : (target[b] == o ? 1.0 : 0.0);
      dlogit[b * a.outputs + o] = (c.probs[b * a.outputs + o] - y) / static_cast<double>(B);
    }
  }
  std::vector<double> dg(B * a.conv2, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t o = 0; o < a.outputs; ++o) {
      const double d = dlogit[b * a.outputs + o];
      grad.bd[o] += d;
      for (std::size_t k = 0; k < a.conv2; ++k) {
        grad.wd[o * a.conv2 + k] += d * c.g[b * a.conv2 + k];
        dg[b * a.conv2 + k] += p.wd[o * a.conv2 + k] * d;
      }
    }
  }
  std::vector<double> dp2(B * a.conv2 * L2);
  for (std::size_t r = 0; r < B * a.conv2; ++r) {
    for (std::size_t t = 0; t < L2; ++t) dp2[r * L2 + t] = dg[r] / static_cast<double>(L2);
  }
  std::vector<double> da2;
  detail::pool_backward(dp2, c.idx2, B * a.conv2, L1, da2);
  detail::bn_relu_backward(da2, c.a2, c.xhat2, c.invstd2, B, a.conv2, L1, p.gamma2, grad.gamma2, grad.beta2);
  std::vector<double> dp1;
  detail::conv_backward(c.p1, B, a.conv1, L1, p.w2, a.conv2, a.kernel, da2, grad.w2, &dp1);
  std::vector<double> da1;
  detail::pool_backward(dp1, c.idx1, B * a.conv1, L, da1);
  detail::bn_relu_backward(da1, c.a1, c.xhat1, c.invstd1, B, a.conv1, L, p.gamma1, grad.gamma1, grad.beta1);
  detail::conv_backward(c.x, B, 1, L, p.w1, a.conv1, a.kernel, da1, grad.w1, nullptr);
  return grad;
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const CnnArch& a, AdamConfig cfg) : cfg_(cfg), m_(CnnParams::zeros(a)), v_(CnnParams::zeros(a)) {}

  void step(CnnParams& params, const CnnParams& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::vector<std::vector<double>*> ps, ms, vs;
    std::vector<const std::vector<double>*> gs;
    params.for_each_group([&](const char*, std::vector<double>& v) { ps.push_back(&v); });
    m_.for_each_group([&](const char*, std::vector<double>& v) { ms.push_back(&v); });
    v_.for_each_group([&](const char*, std::vector<double>& v) { vs.push_back(&v); });
    grad.for_each_group([&](const char*, const std::vector<double>& v) { gs.push_back(&v); });
    for (std::size_t gidx = 0; gidx < ps.size(); ++gidx) {
      auto& p = *ps[gidx];
      auto& m = *ms[gidx];
      auto& v = *vs[gidx];
      const auto& g = *gs[gidx];
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        p[i] -= cfg_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
      }
    }
  }

 private:
  AdamConfig cfg_;
  CnnParams m_;
  CnnParams v_;
  std::uint64_t t_ = 0;
};

}  // namespace mixsim::learn
