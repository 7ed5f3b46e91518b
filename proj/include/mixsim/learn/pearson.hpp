#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mixsim/error.hpp"
#include "mixsim/learn/dataset.hpp"

namespace mixsim::learn {

struct Correlation {
  std::string feature;
  double r = 0.0;
  bool zero_variance = false;
};

/// Pearson r. A constant input reports r = 0 with the flag set.
inline Correlation pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) fail(Errc::ShapeMismatch, "pearson inputs differ in length");
  if (x.size() < 2) fail(Errc::TooFewSamples, "pearson needs at least two samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  Correlation c;
  if (sxx <= 0.0 || syy <= 0.0) {
    c.zero_variance = true;
    return c;
  }
  c.r = sxy / std::sqrt(sxx * syy);
  return c;
}

/// r between every feature column and the numeric class label.
inline std::vector<Correlation> pearson_correlations(const Dataset& d) {
  if (d.size() < 2) fail(Errc::TooFewSamples, "pearson needs at least two samples");
  const auto names = trace::feature_names(d.spec);
  std::vector<double> y(d.labels.begin(), d.labels.end());
  std::vector<Correlation> out;
  std::vector<double> x(d.size());
  for (std::size_t j = 0; j < d.dim(); ++j) {
    for (std::size_t i = 0; i < d.size(); ++i) x[i] = d.vectors[i][j];
    auto c = pearson(x, y);
    c.feature = j < names.size() ? names[j] : "f" + std::to_string(j);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace mixsim::learn
