#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mixsim/error.hpp"
#include "mixsim/learn/cnn.hpp"
#include "mixsim/learn/dataset.hpp"
#include "mixsim/rng.hpp"

namespace mixsim::learn {

struct TrainHyper {
  AdamConfig adam;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::size_t conv1 = 32;
  std::size_t conv2 = 64;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  double final_validation_accuracy = 0.0;
  double loss = 0.0;
  std::vector<int> classes;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted], indexed like classes
  std::map<int, double> per_class_accuracy;
  std::map<int, std::size_t> class_counts;
  double balanced_accuracy = 0.0;
};

struct CnnModel {
  CnnNet net;
  std::vector<int> classes;  // output index -> class id; binary: classes[1] is the positive class
  trace::FeatureSpec spec;
  Normalization normalization;
  std::uint64_t seed = 0;
  double validation_accuracy = 0.0;
  friend bool operator==(const CnnModel&, const CnnModel&) = default;
};

namespace detail {

inline std::vector<std::size_t> class_indices(const std::vector<int>& classes, const std::vector<int>& labels) {
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (int l : labels) {
    auto it = std::find(classes.begin(), classes.end(), l);
    if (it == classes.end()) fail(Errc::ShapeMismatch, "label " + std::to_string(l) + " unknown to the model");
    out.push_back(static_cast<std::size_t>(it - classes.begin()));
  }
  return out;
}

inline std::size_t predicted_index(const CnnArch& a, const std::vector<double>& probs, std::size_t b) {
  if (a.binary()) return probs[b] >= 0.5 ? 1 : 0;
  const double* row = &probs[b * a.outputs];
  return static_cast<std::size_t>(std::max_element(row, row + a.outputs) - row);
}

inline void gather(const Dataset& d, const std::vector<std::size_t>& order, std::size_t from, std::size_t count,
                   std::vector<double>& x) {
  const std::size_t dim = d.dim();
  x.resize(count * dim);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& v = d.vectors[order[from + i]];
    std::copy(v.begin(), v.end(), x.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
}

struct Pass {
  double loss = 0.0;
  std::vector<std::size_t> predicted;
};

// Inference over a normalized dataset in fixed-size chunks.
inline Pass infer(CnnNet& net, const Dataset& d, const std::vector<std::size_t>& target, std::size_t chunk) {
  Pass out;
  CnnCache cache;
  std::vector<double> x;
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  double total = 0.0;
  for (std::size_t from = 0; from < d.size(); from += chunk) {
    const std::size_t n = std::min(chunk, d.size() - from);
    gather(d, order, from, n, x);
    const auto& probs = cnn_forward(net, x, n, Mode::Infer, cache, false);
    if (!target.empty()) {
      std::vector<std::size_t> t(target.begin() + static_cast<std::ptrdiff_t>(from),
                                 target.begin() + static_cast<std::ptrdiff_t>(from + n));
      total += cnn_loss(net.arch, cache, t) * static_cast<double>(n);
    }
    for (std::size_t b = 0; b < n; ++b) out.predicted.push_back(predicted_index(net.arch, probs, b));
  }
  out.loss = d.size() ? total / static_cast<double>(d.size()) : 0.0;
  return out;
}

inline double accuracy(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& target) {
  if (target.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < target.size(); ++i) ok += pred[i] == target[i];
  return static_cast<double>(ok) / static_cast<double>(target.size());
}

inline void fill_confusion(TrainReport& r, const std::vector<int>& classes, const std::vector<std::size_t>& pred,
                           const std::vector<std::size_t>& target) {
  r.classes = classes;
  r.confusion.assign(classes.size(), std::vector<std::size_t>(classes.size(), 0));
  for (std::size_t i = 0; i < target.size(); ++i) ++r.confusion[target[i]][pred[i]];
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::size_t row = 0;
    for (auto v : r.confusion[c]) row += v;
    r.class_counts[classes[c]] = row;
    if (row == 0) continue;
    const double acc = static_cast<double>(r.confusion[c][c]) / static_cast<double>(row);
    r.per_class_accuracy[classes[c]] = acc;
    sum += acc;
    ++present;
  }
  r.balanced_accuracy = present ? sum / static_cast<double>(present) : 0.0;
  r.final_validation_accuracy = accuracy(pred, target);
}

}  // namespace detail

/// Mini-batch Adam on the cross-entropy of the output head. Normalization is
/// fitted on `train` only. Stops when validation loss has not improved for
/// `patience` epochs and returns the best-validation weights.
inline std::pair<CnnModel, TrainReport> cnn_train(const Dataset& train, const Dataset& val, const TrainHyper& hyper,
                                                  std::uint64_t seed) {
  if (train.size() == 0 || val.size() == 0) fail(Errc::EmptySplit, "train and validation sets must be non-empty");
  if (train.dim() != val.dim() || !(train.spec == val.spec)) {
    fail(Errc::ShapeMismatch, "train and validation use different feature layouts");
  }
  if (train.normalization || val.normalization) fail(Errc::ShapeMismatch, "expected raw (unnormalized) datasets");
  for (const auto& v : train.vectors) {
    if (v.size() != train.dim()) fail(Errc::ShapeMismatch, "ragged training vectors");
  }

  CnnModel model;
  model.spec = train.spec;
  model.seed = seed;
  for (const auto& [c, n] : class_counts(train)) model.classes.push_back(c);
  if (model.classes.size() < 2) fail(Errc::SingleClass, "training needs at least two classes");
  model.normalization = fit_normalization(train);
  const Dataset tr = normalized(train, model.normalization);
  const Dataset va = normalized(val, model.normalization);
  const auto ytr = detail::class_indices(model.classes, tr.labels);
  const auto yva = detail::class_indices(model.classes, va.labels);

  Rng rng(seed);
  Rng init_rng = rng.fork(1);
  Rng order_rng = rng.fork(2);
  CnnArch arch;
  arch.input_length = tr.dim();
  arch.conv1 = hyper.conv1;
  arch.conv2 = hyper.conv2;
  arch.outputs = model.classes.size() == 2 ? 1 : model.classes.size();
  arch.bn_momentum = hyper.bn_momentum;
  arch.bn_eps = hyper.bn_eps;
  model.net = init_cnn(arch, init_rng);
  Adam adam(arch, hyper.adam);

  TrainReport report;
  CnnNet best = model.net;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<std::size_t> order(tr.size());
  std::iota(order.begin(), order.end(), 0);
  CnnCache cache;
  std::vector<double> x;
  std::vector<std::size_t> y;
  for (std::size_t epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t from = 0; from < tr.size(); from += hyper.batch_size) {
      const std::size_t n = std::min(hyper.batch_size, tr.size() - from);
      detail::gather(tr, order, from, n, x);
      y.resize(n);
      for (std::size_t i = 0; i < n; ++i) y[i] = ytr[order[from + i]];
      const auto& probs = cnn_forward(model.net, x, n, Mode::Train, cache);
      loss_sum += cnn_loss(arch, cache, y) * static_cast<double>(n);
      for (std::size_t b = 0; b < n; ++b) correct += detail::predicted_index(arch, probs, b) == y[b];
      adam.step(model.net.params, cnn_backward(model.net, cache, y));
    }
    const auto vpass = detail::infer(model.net, va, yva, 256);
    EpochStats es;
    es.epoch = epoch;
    es.train_loss = loss_sum / static_cast<double>(tr.size());
    es.train_accuracy = static_cast<double>(correct) / static_cast<double>(tr.size());
    es.val_loss = vpass.loss;
    es.val_accuracy = detail::accuracy(vpass.predicted, yva);
    report.epochs.push_back(es);
    if (es.val_loss < best_loss) {
      best_loss = es.val_loss;
      best = model.net;
      report.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= hyper.patience) {
      break;
    }
  }
  model.net = std::move(best);
  const auto final_pass = detail::infer(model.net, va, yva, 256);
  detail::fill_confusion(report, model.classes, final_pass.predicted, yva);
  report.loss = final_pass.loss;
  model.validation_accuracy = report.final_validation_accuracy;
  return {std::move(model), std::move(report)};
}

/// Predicted class id per sample of a raw dataset.
inline std::vector<int> cnn_predict(const CnnModel& model, const Dataset& raw) {
  if (raw.dim() != model.net.arch.input_length || !(raw.spec == model.spec)) {
    fail(Errc::ShapeMismatch, "dataset layout does not match the model");
  }
  CnnNet net = model.net;
  const Dataset d = raw.normalization ? raw : normalized(raw, model.normalization);
  const auto pass = detail::infer(net, d, {}, 256);
  std::vector<int> out;
  out.reserve(pass.predicted.size());
  for (auto p : pass.predicted) out.push_back(model.classes[p]);
  return out;
}

/// Accuracy, confusion matrix and per-class accuracy against ground truth.
/// Samples whose label the model does not know are rejected.
inline TrainReport cnn_evaluate(const CnnModel& model, const Dataset& raw) {
  if (raw.dim() != model.net.arch.input_length || !(raw.spec == model.spec)) {
    fail(Errc::ShapeMismatch, "dataset layout does not match the model");
  }
  CnnNet net = model.net;
  const Dataset d = raw.normalization ? raw : normalized(raw, model.normalization);
  const auto target = detail::class_indices(model.classes, d.labels);
  const auto pass = detail::infer(net, d, target, 256);
  TrainReport r;
  detail::fill_confusion(r, model.classes, pass.predicted, target);
  r.loss = pass.loss;
  return r;
}

/// Assignment counts per predicted class, for data without ground truth.
inline std::map<int, std::size_t> cnn_assignments(const CnnModel& model, const Dataset& raw) {
  std::map<int, std::size_t> out;
  for (int c : model.classes) out[c] = 0;
  for (int p : cnn_predict(model, raw)) ++out[p];
  return out;
}

// ---- serialization ----

inline nlohmann::ordered_json to_json(const TrainReport& r) {
  nlohmann::ordered_json j;
  j["final_validation_accuracy"] = r.final_validation_accuracy;
  j["balanced_accuracy"] = r.balanced_accuracy;
  j["loss"] = r.loss;
  j["best_epoch"] = r.best_epoch;
  j["classes"] = r.classes;
  j["confusion"] = r.confusion;
  nlohmann::ordered_json pc = nlohmann::ordered_json::object();
  for (const auto& [c, a] : r.per_class_accuracy) pc[std::to_string(c)] = a;
  j["per_class_accuracy"] = std::move(pc);
  nlohmann::ordered_json cc = nlohmann::ordered_json::object();
  for (const auto& [c, n] : r.class_counts) cc[std::to_string(c)] = n;
  j["class_counts"] = std::move(cc);
  nlohmann::ordered_json ep = nlohmann::ordered_json::array();
  for (const auto& e : r.epochs) {
    ep.push_back({{"epoch", e.epoch},
                  {"train_loss", e.train_loss},
                  {"train_accuracy", e.train_accuracy},
                  {"val_loss", e.val_loss},
                  {"val_accuracy", e.val_accuracy}});
  }
  j["epochs"] = std::move(ep);
  return j;
}

inline constexpr std::string_view kCheckpointFormat = "mixsim-cnn";

inline nlohmann::ordered_json to_json(const CnnModel& m) {
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = 1;
  const auto& a = m.net.arch;
  j["arch"] = {{"input_length", a.input_length}, {"conv1", a.conv1},           {"conv2", a.conv2},
               {"kernel", a.kernel},             {"outputs", a.outputs},       {"bn_momentum", a.bn_momentum},
               {"bn_eps", a.bn_eps}};
  j["classes"] = m.classes;
  j["variant"] = std::string(trace::to_string(m.spec.variant));
  j["dropped"] = m.spec.dropped;
  j["seed"] = m.seed;
  j["validation_accuracy"] = m.validation_accuracy;
  nlohmann::ordered_json w = nlohmann::ordered_json::object();
  m.net.params.for_each_group([&](const char* name, const std::vector<double>& v) { w[name] = v; });
  j["weights"] = std::move(w);
  j["bn_running"] = {{"mean1", m.net.running.mean1},
                     {"var1", m.net.running.var1},
                     {"mean2", m.net.running.mean2},
                     {"var2", m.net.running.var2}};
  j["normalization"] = {{"mean", m.normalization.mean}, {"stddev", m.normalization.stddev}};
  return j;
}

inline CnnModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != kCheckpointFormat) fail(Errc::BadCheckpoint, "not a model checkpoint");
    CnnModel m;
    auto& a = m.net.arch;
    const auto& ja = j.at("arch");
    a.input_length = ja.at("input_length");
    a.conv1 = ja.at("conv1");
    a.conv2 = ja.at("conv2");
    a.kernel = ja.at("kernel");
    a.outputs = ja.at("outputs");
    a.bn_momentum = ja.at("bn_momentum");
    a.bn_eps = ja.at("bn_eps");
    m.classes = j.at("classes").get<std::vector<int>>();
    m.spec.variant = trace::parse_variant(j.at("variant").get<std::string>());
    m.spec.dropped = j.at("dropped").get<std::set<std::string>>();
    m.seed = j.at("seed");
    m.validation_accuracy = j.at("validation_accuracy");
    const auto expect = CnnParams::zeros(a);
    m.net.params = expect;
    m.net.params.for_each_group([&](const char* name, std::vector<double>& v) {
      const auto loaded = j.at("weights").at(name).get<std::vector<double>>();
      if (loaded.size() != v.size()) fail(Errc::BadCheckpoint, std::string("wrong size for ") + name);
      v = loaded;
    });
    const auto& bn = j.at("bn_running");
    m.net.running.mean1 = bn.at("mean1").get<std::vector<double>>();
    m.net.running.var1 = bn.at("var1").get<std::vector<double>>();
    m.net.running.mean2 = bn.at("mean2").get<std::vector<double>>();
    m.net.running.var2 = bn.at("var2").get<std::vector<double>>();
    m.normalization.mean = j.at("normalization").at("mean").get<std::vector<double>>();
    m.normalization.stddev = j.at("normalization").at("stddev").get<std::vector<double>>();
    if (m.net.running.mean1.size() != a.conv1 || m.net.running.mean2.size() != a.conv2 ||
        m.normalization.mean.size() != a.input_length || m.classes.size() < 2) {
      fail(Errc::BadCheckpoint, "inconsistent checkpoint dimensions");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::BadCheckpoint, e.what());
  }
}

}  // namespace mixsim::learn
