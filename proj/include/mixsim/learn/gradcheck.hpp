#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mixsim/learn/cnn.hpp"
#include "mixsim/rng.hpp"

namespace mixsim::learn {

struct GradientCheck {
  std::string group;
  double relative_error = 0.0;  // |a - n| / (|a| + |n|) over the whole group
  double max_abs_error = 0.0;
  std::size_t parameters = 0;
};

/// Central differences of the Train-mode loss against cnn_backward, one
/// entry per parameter group.
inline std::vector<GradientCheck> check_gradients(CnnNet net, const std::vector<double>& x, std::size_t batch,
                                                  const std::vector<std::size_t>& target, double h = 1e-5) {
  CnnCache cache;
  cnn_forward(net, x, batch, Mode::Train, cache, false);
  const CnnParams analytic = cnn_backward(net, cache, target);

  const auto loss_at = [&](CnnNet& n) {
    CnnCache c;
    cnn_forward(n, x, batch, Mode::Train, c, false);
    return cnn_loss(n.arch, c, target);
  };

  std::vector<GradientCheck> out;
  std::vector<const std::vector<double>*> grads;
  analytic.for_each_group([&](const char*, const std::vector<double>& g) { grads.push_back(&g); });
  std::size_t gi = 0;
  net.params.for_each_group([&](const char* name, std::vector<double>& p) {
    const auto& g = *grads[gi++];
    double diff2 = 0.0;
    double a2 = 0.0;
    double n2 = 0.0;
    GradientCheck r;
    r.group = name;
    r.parameters = p.size();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double keep = p[i];
      p[i] = keep + h;
      const double up = loss_at(net);
      p[i] = keep - h;
      const double down = loss_at(net);
      p[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      diff2 += (g[i] - numeric) * (g[i] - numeric);
      a2 += g[i] * g[i];
      n2 += numeric * numeric;
      r.max_abs_error = std::max(r.max_abs_error, std::abs(g[i] - numeric));
    }
    const double denom = std::sqrt(a2) + std::sqrt(n2);
    r.relative_error = denom > 0.0 ? std::sqrt(diff2) / denom : 0.0;
    out.push_back(r);
  });
  return out;
}

/// Small fixed network and batch used by the gradient tests.
struct GradientProbe {
  CnnNet net;
  std::vector<double> x;
  std::size_t batch = 0;
  std::vector<std::size_t> target;
};

inline GradientProbe make_gradient_probe(std::size_t outputs, std::uint64_t seed) {
  Rng rng(seed);
  CnnArch a;
  a.input_length = 14;
  a.conv1 = 3;
  a.conv2 = 4;
  a.outputs = outputs;
  GradientProbe p;
  p.net = init_cnn(a, rng);
  // Non-trivial BN affine parameters so their gradients are exercised.
  for (auto& g : p.net.params.gamma1) g = rng.uniform(0.5, 1.5);
  for (auto& g : p.net.params.gamma2) g = rng.uniform(0.5, 1.5);
  for (auto& b : p.net.params.beta1) b = rng.uniform(-0.2, 0.2);
  for (auto& b : p.net.params.beta2) b = rng.uniform(-0.2, 0.2);
  p.batch = 5;
  p.x.resize(p.batch * a.input_length);
  for (auto& v : p.x) v = rng.normal();
  for (std::size_t b = 0; b < p.batch; ++b) p.target.push_back(outputs == 1 ? b % 2 : b % outputs);
  return p;
}

}  // namespace mixsim::learn
