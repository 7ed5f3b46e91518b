#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "mixsim/error.hpp"
#include "mixsim/rng.hpp"
#include "mixsim/trace/features.hpp"
#include "mixsim/trace/record.hpp"

namespace mixsim::learn {

/// Per-feature affine transform. Payload columns keep mean 0 / stddev 1.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> stddev;

  void apply(std::vector<double>& v) const {
    if (v.size() != mean.size()) fail(Errc::ShapeMismatch, "normalization width differs from vector");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - mean[i]) / stddev[i];
  }
  friend bool operator==(const Normalization&, const Normalization&) = default;
};

struct Dataset {
  std::vector<std::vector<double>> vectors;
  std::vector<int> labels;
  trace::FeatureSpec spec;
  std::optional<Normalization> normalization;  // set once vectors are normalized

  std::size_t size() const { return vectors.size(); }
  std::size_t dim() const { return vectors.empty() ? trace::feature_length(spec) : vectors.front().size(); }

  Dataset subset(const std::vector<std::size_t>& idx) const {
    Dataset out;
    out.spec = spec;
    out.normalization = normalization;
    out.vectors.reserve(idx.size());
    out.labels.reserve(idx.size());
    for (auto i : idx) {
      out.vectors.push_back(vectors[i]);
      out.labels.push_back(labels[i]);
    }
    return out;
  }
};

/// One vector per record. Records without ground truth get label 0.
inline Dataset build_dataset(const trace::Trace& trace, const trace::FeatureSpec& spec) {
  Dataset d;
  d.spec = spec;
  d.vectors.reserve(trace.records.size());
  for (const auto& r : trace.records) {
    d.vectors.push_back(trace::extract_features(r, spec));
    d.labels.push_back(r.ground_truth_class.value_or(0));
  }
  return d;
}

inline std::map<int, std::size_t> class_counts(const std::vector<int>& labels) {
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[l];
  return counts;
}

inline std::map<int, std::size_t> class_counts(const Dataset& d) { return class_counts(d.labels); }

/// Downsamples every class to the minority count. Survivors keep their
/// original relative order.
inline Dataset balance_classes(const Dataset& d, Rng& rng) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < d.size(); ++i) by_class[d.labels[i]].push_back(i);
  if (by_class.size() < 2) fail(Errc::SingleClass, "balancing needs at least two classes");
  std::size_t minority = d.size();
  for (const auto& [c, idx] : by_class) minority = std::min(minority, idx.size());
  std::vector<std::size_t> keep;
  for (auto& [c, idx] : by_class) {
    rng.shuffle(idx);
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(minority));
  }
  std::sort(keep.begin(), keep.end());
  return d.subset(keep);
}

/// Per-class seeded split; each class contributes round(n * (1 - train_fraction))
/// validation samples, at least one when n >= 2.
inline std::pair<Dataset, Dataset> stratified_split(const Dataset& d, double train_fraction, Rng& rng) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < d.size(); ++i) by_class[d.labels[i]].push_back(i);
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  for (auto& [c, idx] : by_class) {
    rng.shuffle(idx);
    auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(idx.size()) * (1.0 - train_fraction)));
    if (n_val == 0 && idx.size() >= 2) n_val = 1;
    if (n_val >= idx.size()) n_val = idx.size() - 1;
    val.insert(val.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    train.insert(train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }
  if (train.empty() || val.empty()) fail(Errc::EmptySplit, "split produced an empty side");
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {d.subset(train), d.subset(val)};
}

/// z-score for metadata columns, identity for payload columns. Constant
/// columns get stddev 1.
inline Normalization fit_normalization(const Dataset& d) {
  if (d.size() == 0) fail(Errc::EmptySplit, "cannot fit normalization on an empty dataset");
  const std::size_t dim = d.dim();
  const std::size_t meta = trace::metadata_columns(d.spec).size();
  Normalization n;
  n.mean.assign(dim, 0.0);
  n.stddev.assign(dim, 1.0);
  const double count = static_cast<double>(d.size());
  for (std::size_t j = 0; j < meta; ++j) {
    double sum = 0.0;
    for (const auto& v : d.vectors) sum += v[j];
    const double mu = sum / count;
    double ss = 0.0;
    for (const auto& v : d.vectors) ss += (v[j] - mu) * (v[j] - mu);
    const double sd = std::sqrt(ss / count);
    n.mean[j] = mu;
    n.stddev[j] = sd > 1e-12 ? sd : 1.0;
  }
  return n;
}

inline Dataset normalized(const Dataset& d, const Normalization& n) {
  if (d.normalization) fail(Errc::ShapeMismatch, "dataset is already normalized");
  Dataset out = d;
  for (auto& v : out.vectors) n.apply(v);
  out.normalization = n;
  return out;
}

}  // namespace mixsim::learn
