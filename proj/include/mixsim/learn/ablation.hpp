#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "mixsim/learn/dataset.hpp"
#include "mixsim/learn/train.hpp"
#include "mixsim/rng.hpp"
#include "mixsim/trace/features.hpp"
#include "mixsim/trace/record.hpp"

namespace mixsim::learn {

/// Record indices of a balanced, stratified train/validation split.
struct IndexSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

inline IndexSplit balanced_split(const std::vector<int>& labels, double train_fraction, std::uint64_t seed) {
  Dataset idx;
  idx.spec = {trace::FeatureVariant::WithoutPayload, {}};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    idx.vectors.push_back({static_cast<double>(i)});
    idx.labels.push_back(labels[i]);
  }
  Rng rng(seed);
  Rng balance_rng = rng.fork(1);
  Rng split_rng = rng.fork(2);
  const auto balanced = balance_classes(idx, balance_rng);
  const auto [tr, va] = stratified_split(balanced, train_fraction, split_rng);
  IndexSplit out;
  for (const auto& v : tr.vectors) out.train.push_back(static_cast<std::size_t>(v[0]));
  for (const auto& v : va.vectors) out.val.push_back(static_cast<std::size_t>(v[0]));
  return out;
}

struct AblationResult {
  trace::FeatureSpec spec;
  CnnModel model;
  TrainReport report;
};

/// Variants and column drops compared side by side by default.
inline std::vector<trace::FeatureSpec> default_ablation_specs() {
  using trace::FeatureVariant;
  return {
      {FeatureVariant::PayloadOnly, {}},
      {FeatureVariant::AllRaw, {}},
      {FeatureVariant::WithoutPayload, {}},
      {FeatureVariant::WithoutPort, {}},
      {FeatureVariant::WithoutPayload, {"tcp_ack", "tcp_seq"}},
      {FeatureVariant::WithoutPayload, {"dst_port"}},
      {FeatureVariant::WithoutPayload, {"payload_size"}},
  };
}

/// Trains one model per spec on the same balanced split of `trace`.
inline std::vector<AblationResult> ablation_suite(const trace::Trace& trace,
                                                  const std::vector<trace::FeatureSpec>& specs,
                                                  const TrainHyper& hyper, std::uint64_t seed) {
  std::vector<int> labels;
  for (const auto& r : trace.records) labels.push_back(r.ground_truth_class.value_or(0));
  const auto split = balanced_split(labels, 0.9, seed);
  std::vector<AblationResult> out;
  for (const auto& spec : specs) {
    const auto all = build_dataset(trace, spec);
    auto [model, report] = cnn_train(all.subset(split.train), all.subset(split.val), hyper, seed);
    out.push_back({spec, std::move(model), std::move(report)});
  }
  return out;
}

}  // namespace mixsim::learn
