#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mixsim/bytes.hpp"
#include "mixsim/error.hpp"

namespace mixsim::anonymity {

inline constexpr double kSumTolerance = 1e-9;

struct DiscreteDistribution {
  std::vector<std::string> outcomes;
  std::vector<double> probabilities;
};

struct JointDistribution {
  std::vector<std::string> x_outcomes;
  std::vector<std::string> y_outcomes;
  std::vector<std::vector<double>> matrix;  // [x][y]

  std::vector<double> marginal_x() const {
    std::vector<double> px(matrix.size(), 0.0);
    for (std::size_t i = 0; i < matrix.size(); ++i) {
      for (double p : matrix[i]) px[i] += p;
    }
    return px;
  }
  std::vector<double> marginal_y() const {
    std::vector<double> py(y_outcomes.size(), 0.0);
    for (const auto& row : matrix) {
      for (std::size_t j = 0; j < row.size(); ++j) py[j] += row[j];
    }
    return py;
  }
};

/// Grid with unnamed outcomes 0..n-1.
inline JointDistribution make_joint(std::vector<std::vector<double>> matrix) {
  JointDistribution j;
  for (std::size_t i = 0; i < matrix.size(); ++i) j.x_outcomes.push_back(std::to_string(i));
  const std::size_t cols = matrix.empty() ? 0 : matrix.front().size();
  for (std::size_t i = 0; i < cols; ++i) j.y_outcomes.push_back(std::to_string(i));
  j.matrix = std::move(matrix);
  return j;
}

inline void check_probabilities(const std::vector<double>& p) {
  if (p.empty()) fail(Errc::InvalidDistribution, "empty distribution");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail(Errc::InvalidDistribution, "negative or non-finite probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    fail(Errc::InvalidDistribution, "probabilities sum to " + std::to_string(sum));
  }
}

inline void validate(const DiscreteDistribution& d) {
  if (d.outcomes.size() != d.probabilities.size()) fail(Errc::InvalidDistribution, "outcome/probability mismatch");
  check_probabilities(d.probabilities);
}

inline void validate(const JointDistribution& j) {
  if (j.matrix.size() != j.x_outcomes.size()) fail(Errc::InvalidDistribution, "row count mismatch");
  std::vector<double> flat;
  for (const auto& row : j.matrix) {
    if (row.size() != j.y_outcomes.size()) fail(Errc::InvalidDistribution, "ragged joint matrix");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  check_probabilities(flat);
}

inline double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) fail(Errc::OutOfRange, "binary entropy needs p in [0,1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

inline double entropy_of(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return h;
}

inline double plugin_entropy(const DiscreteDistribution& d) {
  validate(d);
  return entropy_of(d.probabilities);
}

/// I(X;Y) over positive-mass cells. Results in (-1e-12, 0) are rounded to 0.
inline double plugin_mi(const JointDistribution& j) {
  validate(j);
  const auto px = j.marginal_x();
  const auto py = j.marginal_y();
  double mi = 0.0;
  for (std::size_t x = 0; x < j.matrix.size(); ++x) {
    for (std::size_t y = 0; y < py.size(); ++y) {
      const double p = j.matrix[x][y];
      if (p > 0.0) mi += p * std::log2(p / (px[x] * py[y]));
    }
  }
  return mi < 0.0 && mi > -1e-12 ? 0.0 : mi;
}

/// p(x) p(y) built from the marginals of `j`.
inline JointDistribution product_of_marginals(const JointDistribution& j) {
  JointDistribution out = j;
  const auto px = j.marginal_x();
  const auto py = j.marginal_y();
  for (std::size_t x = 0; x < px.size(); ++x) {
    for (std::size_t y = 0; y < py.size(); ++y) out.matrix[x][y] = px[x] * py[y];
  }
  return out;
}

namespace detail {
template <class T>
std::string symbol(const T& v) {
  if constexpr (std::is_convertible_v<T, std::string>) {
    return std::string(v);
  } else {
    std::ostringstream os;
    os << v;
    return os.str();
  }
}
}  // namespace detail

/// Empirical joint of (x, y) pairs. Outcomes are listed in first-seen order.
template <class X, class Y>
JointDistribution estimate_joint_from_samples(const std::vector<std::pair<X, Y>>& pairs) {
  if (pairs.empty()) fail(Errc::EmptySample, "no samples");
  std::map<std::string, std::size_t> xi;
  std::map<std::string, std::size_t> yi;
  JointDistribution j;
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  cells.reserve(pairs.size());
  for (const auto& [x, y] : pairs) {
    const auto xs = detail::symbol(x);
    const auto ys = detail::symbol(y);
    auto [itx, newx] = xi.emplace(xs, j.x_outcomes.size());
    if (newx) j.x_outcomes.push_back(xs);
    auto [ity, newy] = yi.emplace(ys, j.y_outcomes.size());
    if (newy) j.y_outcomes.push_back(ys);
    cells.emplace_back(itx->second, ity->second);
  }
  j.matrix.assign(j.x_outcomes.size(), std::vector<double>(j.y_outcomes.size(), 0.0));
  std::vector<std::vector<std::size_t>> counts(j.x_outcomes.size(), std::vector<std::size_t>(j.y_outcomes.size()));
  for (auto [x, y] : cells) ++counts[x][y];
  const double n = static_cast<double>(pairs.size());
  for (std::size_t x = 0; x < counts.size(); ++x) {
    for (std::size_t y = 0; y < counts[x].size(); ++y) j.matrix[x][y] = static_cast<double>(counts[x][y]) / n;
  }
  return j;
}

struct FanoReport {
  double entropy_x = 0.0;
  double mutual_information = 0.0;
  std::size_t anonymity_set_size = 0;
  double lower_bound_pe = 0.0;
  bool clamped = false;
};

/// P_e >= (H(X) - I(X;Y) - 1) / log2 |Theta|, using h(P_e) <= 1. Negative
/// values are clamped to 0 and flagged.
inline FanoReport fano_lower_bound(double entropy_x, double mutual_information, std::size_t anonymity_set_size) {
  if (anonymity_set_size < 2) fail(Errc::DegenerateSet, "anonymity set must have at least 2 members");
  if (entropy_x < 0.0) fail(Errc::NegativeEntropy, "H(X) < 0");
  if (mutual_information < 0.0 || mutual_information > entropy_x + 1e-9) {
    fail(Errc::OutOfRange, "mutual information must lie in [0, H(X)]");
  }
  FanoReport r;
  r.entropy_x = entropy_x;
  r.mutual_information = mutual_information;
  r.anonymity_set_size = anonymity_set_size;
  const double raw = (entropy_x - mutual_information - 1.0) / std::log2(static_cast<double>(anonymity_set_size));
  r.clamped = raw < 0.0;
  r.lower_bound_pe = std::min(1.0, std::max(0.0, raw));
  return r;
}

inline nlohmann::ordered_json to_json(const FanoReport& r) {
  nlohmann::ordered_json j;
  j["entropy_x"] = r.entropy_x;
  j["mutual_information"] = r.mutual_information;
  j["anonymity_set_size"] = r.anonymity_set_size;
  j["lower_bound_pe"] = r.lower_bound_pe;
  j["clamped"] = r.clamped;
  return j;
}

/// Nodes online at every tick of the window.
inline std::set<NodeAddress> stable_core_reduction(const std::vector<std::set<NodeAddress>>& online_sets) {
  if (online_sets.empty()) fail(Errc::EmptyWindow, "stable core of an empty window");
  std::set<NodeAddress> core = online_sets.front();
  for (std::size_t i = 1; i < online_sets.size() && !core.empty(); ++i) {
    std::set<NodeAddress> next;
    std::set_intersection(core.begin(), core.end(), online_sets[i].begin(), online_sets[i].end(),
                          std::inserter(next, next.end()));
    core = std::move(next);
  }
  return core;
}

/// Window [from, to] over a time-indexed history.
inline std::set<NodeAddress> stable_core_reduction(
    const std::vector<std::pair<double, std::set<NodeAddress>>>& history, double from, double to) {
  std::vector<std::set<NodeAddress>> window;
  for (const auto& [t, s] : history) {
    if (t >= from && t <= to) window.push_back(s);
  }
  return stable_core_reduction(window);
}

}  // namespace mixsim::anonymity
