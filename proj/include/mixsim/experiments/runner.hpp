#pragma once

// Runs one experiment end to end and writes its artifacts. Every artifact is
// a pure function of the spec, so reruns are byte-identical.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixsim/anonymity/information.hpp"
#include "mixsim/anonymity/leakage.hpp"
#include "mixsim/experiments/experiment.hpp"
#include "mixsim/experiments/lab.hpp"
#include "mixsim/learn/ablation.hpp"
#include "mixsim/learn/kmeans.hpp"
#include "mixsim/learn/pearson.hpp"
#include "mixsim/report/csv.hpp"
#include "mixsim/report/figures.hpp"
#include "mixsim/report/svg.hpp"
#include "mixsim/trace/curate.hpp"
#include "mixsim/trace/jsonl.hpp"
#include "mixsim/trace/pcap.hpp"

namespace mixsim::experiments {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr const char* kOutputRootEnv = "MIXSIM_OUTPUT_ROOT";

inline fs::path output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? fs::path(env) : fs::path("results");
}

inline fs::path output_dir(const ExperimentSpec& spec) {
  if (!spec.output.empty()) return spec.output;
  return output_root() / (std::string(to_string(spec.id)) + "-seed" + std::to_string(spec.seed));
}

struct Assertion {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentResult {
  ExperimentId id = ExperimentId::Exp2_Binary;
  fs::path directory;
  std::vector<Assertion> assertions;
  std::vector<std::string> artifacts;
  json summary;

  bool ok() const {
    for (const auto& a : assertions) {
      if (!a.passed) return false;
    }
    return true;
  }
  int exit_status() const { return ok() ? 0 : 1; }
};

/// Sharpest bend of an elbow curve over k = 2..k_hi (reported, not judged).
struct ElbowStrength {
  std::size_t k = 0;
  double ratio = 0.0;
};

inline ElbowStrength elbow_strength(const std::vector<learn::ElbowPoint>& curve, std::size_t k_hi) {
  ElbowStrength best;
  for (std::size_t k = 2; k <= k_hi; ++k) {
    const double r = learn::elbow_ratio(curve, k);
    if (best.k == 0 || r > best.ratio) best = {k, r};
  }
  return best;
}

inline bool non_increasing(const std::vector<learn::ElbowPoint>& curve) {
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (curve[i].wcss > curve[i - 1].wcss) return false;
  }
  return true;
}

/// Four well-separated 2-D Gaussian blobs; the clustering control.
inline learn::Points blob_points(std::uint64_t seed, std::size_t per_blob = 100) {
  Rng rng(seed);
  learn::Points pts;
  const double centers[4][2] = {{0, 0}, {10, 0}, {0, 10}, {10, 10}};
  for (std::size_t i = 0; i < 4 * per_blob; ++i) {
    const auto& c = centers[i % 4];
    pts.push_back({c[0] + rng.normal(), c[1] + rng.normal()});
  }
  return pts;
}

/// The features the clustering experiment uses: destination port, payload
/// length and protocol.
inline learn::Points port_size_protocol(const trace::Trace& t) {
  learn::Points pts;
  for (const auto& r : t.records) {
    pts.push_back({static_cast<double>(r.dst_port), static_cast<double>(r.payload_size),
                   static_cast<double>(static_cast<int>(r.protocol))});
  }
  return pts;
}

/// Best of `restarts` seeded k-means fits at one k.
inline learn::KMeansModel best_kmeans(const learn::Points& pts, std::size_t k, std::size_t restarts,
                                      std::uint64_t seed) {
  Rng rng(seed);
  std::optional<learn::KMeansModel> best;
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    Rng run = rng.fork(k * 1000 + r);
    auto m = learn::kmeans_fit(pts, k, run);
    if (!best || m.wcss < best->wcss) best = std::move(m);
  }
  return *best;
}

namespace detail {

class Artifacts {
 public:
  Artifacts(fs::path dir, ExperimentResult& result) : dir_(std::move(dir)), result_(result) {
    fs::create_directories(dir_);
  }
  void put(const std::string& name, const std::string& text) {
    report::write_file(dir_ / name, text);
    result_.artifacts.push_back(name);
  }
  void put_json(const std::string& name, const json& j) { put(name, j.dump(2) + "\n"); }
  void put_trace_figures(const trace::Trace& t, const std::string& sub) {
    for (const auto& f : report::report_trace(t, dir_ / sub)) result_.artifacts.push_back(sub + "/" + f);
  }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  ExperimentResult& result_;
};

inline void check(ExperimentResult& r, std::string name, bool passed, std::string detail) {
  r.assertions.push_back({std::move(name), passed, std::move(detail)});
}

inline std::string confusion_csv(const learn::TrainReport& rep) {
  report::Table t;
  t.header.push_back("true\\predicted");
  for (int c : rep.classes) t.header.push_back("class_" + std::to_string(c));
  for (std::size_t i = 0; i < rep.classes.size(); ++i) {
    std::vector<std::string> row{"class_" + std::to_string(rep.classes[i])};
    for (auto n : rep.confusion[i]) row.push_back(std::to_string(n));
    t.add(std::move(row));
  }
  return report::to_csv(t);
}

inline std::string history_csv(const learn::TrainReport& rep) {
  report::Table t{{"epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy"}, {}};
  for (const auto& e : rep.epochs) {
    t.add({std::to_string(e.epoch), report::num(e.train_loss), report::num(e.train_accuracy), report::num(e.val_loss),
           report::num(e.val_accuracy)});
  }
  return report::to_csv(t);
}

inline std::string history_svg(const learn::TrainReport& rep, const std::string& label) {
  report::XYPlot p{"Training history (" + label + ")", "epoch", "accuracy", {}, {}, std::make_pair(0.0, 1.0)};
  report::Series tr{"train", {}, report::SeriesStyle::Line};
  report::Series va{"validation", {}, report::SeriesStyle::Line};
  for (const auto& e : rep.epochs) {
    tr.points.emplace_back(static_cast<double>(e.epoch), e.train_accuracy);
    va.points.emplace_back(static_cast<double>(e.epoch), e.val_accuracy);
  }
  p.series = {tr, va};
  return report::render(p);
}

inline json spec_json(const LabScenario& sc) {
  json j;
  const auto& c = sc.sim;
  j["node_count"] = c.node_count;
  j["outbound_length"] = c.outbound_tunnel_length;
  j["inbound_length"] = c.inbound_tunnel_length;
  j["latency_mean_ms"] = c.link_latency.mean_ms;
  j["latency_jitter_ms"] = c.link_latency.jitter_ms;
  j["udp_probability"] = c.udp_probability;
  j["cell_size"] = c.cell_size;
  j["onion_mode"] = c.onion_mode == crypto::OnionMode::Padded ? "padded" : "naive";
  j["background_flows"] = c.background_flows;
  j["background_rate"] = c.background_rate;
  j["background_tunnel_flows"] = c.background_tunnel_flows;
  j["background_tunnel_rate"] = c.background_tunnel_rate;
  j["link_padding_max"] = c.link_padding_max;
  j["first_address"] = c.first_address;
  j["sim_seed"] = c.seed;
  json targets = json::array();
  for (const auto& t : sc.targets) targets.push_back({{"node", t.node_index}, {"class", t.class_tag}, {"requests", t.requests}});
  j["targets"] = targets;
  j["warmup"] = sc.warmup;
  j["request_rate"] = sc.request_rate;
  j["request_size"] = {sc.min_request_size, sc.max_request_size};
  j["script_seed"] = sc.script_seed;
  return j;
}

inline json lab_json(const LabRun& run) {
  json j;
  j["duration"] = run.duration;
  j["requests_sent"] = run.requests_sent;
  j["deliveries"] = run.deliveries;
  j["raw_records"] = run.raw.records.size();
  j["curated_records"] = run.curated.records.size();
  json vantages = json::array();
  for (const auto& v : run.vantages) vantages.push_back(v.to_string());
  j["vantages"] = vantages;
  json counts = json::object();
  std::map<int, std::size_t> by_class;
  for (const auto& r : run.curated.records) ++by_class[r.ground_truth_class.value_or(0)];
  for (auto [c, n] : by_class) counts[std::to_string(c)] = n;
  j["class_counts"] = counts;
  const auto s = trace::summarize(run.curated);
  if (s.mean_entropy) j["mean_entropy"] = *s.mean_entropy;
  if (auto m = trace::size_mode(s, trace::Protocol::TCP)) j["tcp_size_mode"] = *m;
  if (auto m = trace::size_mode(s, trace::Protocol::UDP)) j["udp_size_mode"] = *m;
  return j;
}

inline LabRun run_world(const LabScenario& sc, Artifacts& out, const std::string& prefix) {
  LabRun run = run_lab(sc);
  std::ostringstream trace_text;
  trace::write_jsonl(run.curated, trace_text);
  out.put(prefix + "capture.jsonl", trace_text.str());
  out.put_trace_figures(run.curated, prefix + "figures");
  return run;
}

inline trace::Trace load_pcap(const std::string& path) {
  const std::string bytes = report::read_file(path);
  auto imported = trace::import_pcap(ByteView(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
  return trace::curate(imported.trace);
}

struct TrainedVariant {
  trace::FeatureSpec spec;
  learn::CnnModel model;
  learn::TrainReport validation;
  learn::TrainReport full;
};

/// Trains every variant on one shared split of `t`, evaluates on the whole
/// trace, and writes per-variant reports.
inline std::vector<TrainedVariant> train_variants(const ExperimentSpec& spec, const trace::Trace& t, Artifacts& out,
                                                  const std::optional<trace::Trace>& pcap) {
  std::vector<int> labels;
  for (const auto& r : t.records) labels.push_back(r.ground_truth_class.value_or(0));
  const auto split = learn::balanced_split(labels, spec.train_fraction, spec.seed);
  std::vector<TrainedVariant> out_v;
  report::Table acc{{"variant", "validation_accuracy", "validation_balanced_accuracy", "epochs", "best_epoch"}, {}};
  std::set<int> all_classes(labels.begin(), labels.end());
  for (int c : all_classes) acc.header.push_back("full_class_" + std::to_string(c) + "_accuracy");
  acc.header.push_back("full_balanced_accuracy");

  for (const auto& fs_spec : spec.variants) {
    const auto all = learn::build_dataset(t, fs_spec);
    auto [model, rep] = learn::cnn_train(all.subset(split.train), all.subset(split.val), spec.hyper, spec.seed);
    auto full = learn::cnn_evaluate(model, all);
    const std::string label = fs_spec.label();
    json j;
    j["variant"] = label;
    j["train_size"] = split.train.size();
    j["validation_size"] = split.val.size();
    j["validation"] = learn::to_json(rep);
    j["full_trace"] = learn::to_json(full);
    out.put_json(label + ".report.json", j);
    out.put(label + ".confusion.csv", confusion_csv(rep));
    out.put(label + ".full_confusion.csv", confusion_csv(full));
    out.put(label + ".history.csv", history_csv(rep));
    out.put(label + ".history.svg", history_svg(rep, label));
    out.put_json(label + ".model.json", learn::to_json(model));
    if (pcap) {
      json a = json::object();
      for (auto [c, n] : learn::cnn_assignments(model, learn::build_dataset(*pcap, fs_spec))) a[std::to_string(c)] = n;
      out.put_json(label + ".pcap_assignments.json", json{{"variant", label}, {"records", pcap->records.size()}, {"assignments", a}});
    }
    std::vector<std::string> row{label, report::num(rep.final_validation_accuracy), report::num(rep.balanced_accuracy),
                                 std::to_string(rep.epochs.size()), std::to_string(rep.best_epoch)};
    for (int c : all_classes) {
      auto it = full.per_class_accuracy.find(c);
      row.push_back(it == full.per_class_accuracy.end() ? "" : report::num(it->second));
    }
    row.push_back(report::num(full.balanced_accuracy));
    acc.add(std::move(row));
    out_v.push_back({fs_spec, std::move(model), std::move(rep), std::move(full)});
  }
  out.put("accuracy.csv", report::to_csv(acc));
  return out_v;
}

inline const TrainedVariant* find_variant(const std::vector<TrainedVariant>& v, trace::FeatureVariant which) {
  for (const auto& t : v) {
    if (t.spec.variant == which && t.spec.dropped.empty()) return &t;
  }
  return nullptr;
}

inline double class_accuracy(const learn::TrainReport& r, int c) {
  auto it = r.per_class_accuracy.find(c);
  return it == r.per_class_accuracy.end() ? std::nan("") : it->second;
}

inline void run_exp1(const ExperimentSpec& spec, ExperimentResult& res, Artifacts& out) {
  const auto run = run_world(spec.world, out, "");
  res.summary["world"] = lab_json(run);
  const auto pts = learn::standardize(port_size_protocol(run.curated));
  const auto curve = learn::elbow_scan(pts, 1, spec.k_max, spec.restarts, spec.seed);
  const auto blobs = blob_points(spec.seed);
  const auto blob_curve = learn::elbow_scan(blobs, 1, spec.k_max, spec.restarts, spec.seed);
  out.put("elbow.csv", report::to_csv(report::elbow_table(curve)));
  out.put("elbow.svg", report::render(report::elbow_plot(curve, "Elbow curve (dst_port, payload_size, protocol)")));
  out.put("blob_elbow.csv", report::to_csv(report::elbow_table(blob_curve)));
  out.put("blob_elbow.svg", report::render(report::elbow_plot(blob_curve, "Elbow curve (four-blob control)")));

  // The 14 metadata columns, reported for comparison only.
  learn::Points meta;
  for (const auto& r : run.curated.records) meta.push_back(trace::extract_features(r, trace::FeatureVariant::WithoutPayload));
  const auto meta_curve = learn::elbow_scan(learn::standardize(meta), 1, spec.elbow_k + 1, spec.restarts, spec.seed);
  out.put("metadata_elbow.csv", report::to_csv(report::elbow_table(meta_curve)));

  const double ratio = learn::elbow_ratio(curve, spec.elbow_k);
  const double blob_ratio = learn::elbow_ratio(blob_curve, spec.elbow_k);
  const double meta_ratio = learn::elbow_ratio(meta_curve, spec.elbow_k);
  const auto sharpest = elbow_strength(curve, std::min<std::size_t>(10, spec.k_max - 1));

  const auto model = best_kmeans(pts, spec.elbow_k, spec.restarts, spec.seed);
  report::Table clusters{{"cluster", "size"}, {}};
  std::set<int> classes;
  for (const auto& r : run.curated.records) classes.insert(r.ground_truth_class.value_or(0));
  for (int c : classes) clusters.header.push_back("class_" + std::to_string(c));
  std::vector<std::map<int, std::size_t>> composition(model.k);
  for (std::size_t i = 0; i < model.assignments.size(); ++i) {
    ++composition[model.assignments[i]][run.curated.records[i].ground_truth_class.value_or(0)];
  }
  const auto sizes = model.cluster_sizes();
  for (std::size_t c = 0; c < model.k; ++c) {
    std::vector<std::string> row{std::to_string(c), std::to_string(sizes[c])};
    for (int cls : classes) row.push_back(std::to_string(composition[c][cls]));
    clusters.add(std::move(row));
  }
  out.put("clusters.csv", report::to_csv(clusters));

  res.summary["elbow_k"] = spec.elbow_k;
  res.summary["elbow_ratio"] = ratio;
  res.summary["blob_elbow_ratio"] = blob_ratio;
  res.summary["metadata_elbow_ratio"] = meta_ratio;
  res.summary["sharpest_bend"] = json{{"k", sharpest.k}, {"ratio", sharpest.ratio}};
  res.summary["cluster_wcss"] = model.wcss;

  const std::string at = " at k=" + std::to_string(spec.elbow_k);
  check(res, "capture WCSS non-increasing in k", non_increasing(curve), "k = 1.." + std::to_string(spec.k_max));
  check(res, "blob WCSS non-increasing in k", non_increasing(blob_curve), "k = 1.." + std::to_string(spec.k_max));
  check(res, "blob control shows an elbow", blob_ratio > spec.elbow_threshold,
        "ratio " + report::num(blob_ratio, 3) + at + " > " + report::num(spec.elbow_threshold, 1));
  check(res, "capture shows no elbow", ratio <= spec.elbow_threshold,
        "ratio " + report::num(ratio, 3) + at + " <= " + report::num(spec.elbow_threshold, 1));
}

inline void run_classification(const ExperimentSpec& spec, ExperimentResult& res, Artifacts& out) {
  const auto run = run_world(spec.world, out, "");
  res.summary["world"] = lab_json(run);
  const auto wp = learn::build_dataset(run.curated, {trace::FeatureVariant::WithoutPayload, {}});
  report::Table corr{{"feature", "pearson_r", "zero_variance"}, {}};
  for (const auto& c : learn::pearson_correlations(wp)) {
    corr.add({c.feature, report::num(c.r), c.zero_variance ? "true" : "false"});
  }
  out.put("pearson.csv", report::to_csv(corr));

  std::optional<trace::Trace> pcap;
  if (!spec.pcap.empty()) pcap = load_pcap(spec.pcap);
  const auto trained = train_variants(spec, run.curated, out, pcap);
  json variants = json::object();
  for (const auto& t : trained) {
    json v;
    v["validation_accuracy"] = t.validation.final_validation_accuracy;
    v["epochs"] = t.validation.epochs.size();
    json pc = json::object();
    for (auto [c, a] : t.full.per_class_accuracy) pc[std::to_string(c)] = a;
    v["full_trace_class_accuracy"] = pc;
    variants[t.spec.label()] = v;
  }
  res.summary["variants"] = variants;

  using trace::FeatureVariant;
  const auto* without = find_variant(trained, FeatureVariant::WithoutPayload);
  const auto* payload = find_variant(trained, FeatureVariant::PayloadOnly);
  const auto* all = find_variant(trained, FeatureVariant::AllRaw);
  if (spec.id == ExperimentId::Exp2_Binary) {
    if (without) {
      const double a = without->validation.final_validation_accuracy;
      check(res, "without-payload validation accuracy >= 0.95", a >= 0.95, report::num(a, 4));
    }
    if (without && payload) {
      const double a = without->validation.final_validation_accuracy;
      const double b = payload->validation.final_validation_accuracy;
      check(res, "without-payload beats payload-only", a > b, report::num(a, 4) + " > " + report::num(b, 4));
    }
  } else {
    const std::size_t classes = trained.empty() ? 0 : trained.front().model.classes.size();
    check(res, "three classes trained", classes == 3, std::to_string(classes) + " classes");
  }
  if (without && all) {
    const double a = class_accuracy(without->full, 1);
    const double b = class_accuracy(all->full, 1);
    const bool strict = spec.id == ExperimentId::Exp2_Binary;
    check(res, strict ? "without-payload class-1 accuracy > all-raw" : "without-payload class-1 accuracy >= all-raw",
          strict ? a > b : a >= b, report::num(a, 4) + (strict ? " > " : " >= ") + report::num(b, 4));
  }
}

inline void run_exp4(const ExperimentSpec& spec, ExperimentResult& res, Artifacts& out) {
  const auto a = run_world(spec.world, out, "");
  const auto b = run_world(*spec.eval_world, out, "eval_world_");
  res.summary["world"] = lab_json(a);
  res.summary["eval_world"] = lab_json(b);
  out.put_json("eval_world.json", spec_json(*spec.eval_world));
  std::optional<trace::Trace> pcap;
  if (!spec.pcap.empty()) pcap = load_pcap(spec.pcap);
  const auto trained = train_variants(spec, a.curated, out, pcap);
  report::Table deg{{"variant", "train_world_validation_balanced_accuracy", "eval_world_balanced_accuracy", "drop"}, {}};
  json variants = json::object();
  for (const auto& t : trained) {
    const auto eval = learn::cnn_evaluate(t.model, learn::build_dataset(b.curated, t.spec));
    const std::string label = t.spec.label();
    out.put_json(label + ".eval_world.json", learn::to_json(eval));
    out.put(label + ".eval_world_confusion.csv", confusion_csv(eval));
    const double before = t.validation.balanced_accuracy;
    const double after = eval.balanced_accuracy;
    deg.add({label, report::num(before), report::num(after), report::num(before - after)});
    variants[label] = json{{"train_world_validation_balanced_accuracy", before},
                           {"eval_world_balanced_accuracy", after}};
    check(res, label + " balanced accuracy drops >= 10 points in the eval world", before - after >= 0.10,
          report::num(before, 4) + " -> " + report::num(after, 4));
  }
  out.put("degradation.csv", report::to_csv(deg));
  res.summary["variants"] = variants;
}

inline void run_fano(const ExperimentSpec& spec, ExperimentResult& res, Artifacts& out) {
  const double h = std::log2(static_cast<double>(spec.nodes));
  const std::size_t set = spec.nodes - 1;
  const auto leak = anonymity::length_leakage_demo(spec.leakage_lengths, spec.leakage_requests, spec.seed);
  const auto none = anonymity::fano_lower_bound(h, 0.0, set);
  const auto naive = anonymity::fano_lower_bound(h, leak.mi_naive, set);
  const auto padded = anonymity::fano_lower_bound(h, leak.mi_padded, set);
  json j;
  j["nodes"] = spec.nodes;
  j["no_leakage"] = anonymity::to_json(none);
  j["naive_length_leakage"] = anonymity::to_json(naive);
  j["padded_length_leakage"] = anonymity::to_json(padded);
  out.put_json("fano.json", j);
  json l;
  l["route_lengths"] = spec.leakage_lengths;
  l["requests_per_length"] = spec.leakage_requests;
  l["mi_naive"] = leak.mi_naive;
  l["mi_padded"] = leak.mi_padded;
  out.put_json("leakage.json", l);
  report::Table t{{"mode", "mutual_information_bits", "lower_bound_pe"}, {}};
  t.add({"none", report::num(0.0), report::num(none.lower_bound_pe)});
  t.add({"naive", report::num(leak.mi_naive), report::num(naive.lower_bound_pe)});
  t.add({"padded", report::num(leak.mi_padded), report::num(padded.lower_bound_pe)});
  out.put("fano.csv", report::to_csv(t));
  res.summary["lower_bound_pe"] = none.lower_bound_pe;
  res.summary["mi_naive"] = leak.mi_naive;
  res.summary["mi_padded"] = leak.mi_padded;

  const double full = std::log2(static_cast<double>(spec.leakage_lengths.size()));
  check(res, "naive routes leak the route length", std::abs(leak.mi_naive - full) <= 0.05,
        report::num(leak.mi_naive, 4) + " ~ " + report::num(full, 4));
  check(res, "padded routes leak nothing", leak.mi_padded <= 0.01, report::num(leak.mi_padded, 6));
  check(res, "leakage lowers the error bound", naive.lower_bound_pe <= padded.lower_bound_pe,
        report::num(naive.lower_bound_pe, 5) + " <= " + report::num(padded.lower_bound_pe, 5));
}

}  // namespace detail

/// Runs `spec`, writes artifacts under output_dir(spec) and returns the
/// assertion outcomes; exit_status() is 0 iff all of them passed.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  ExperimentResult res;
  res.id = spec.id;
  res.directory = output_dir(spec);
  detail::Artifacts out(res.directory, res);
  res.summary["experiment"] = std::string(to_string(spec.id));
  res.summary["seed"] = spec.seed;
  out.put_json("world.json", detail::spec_json(spec.world));
  switch (spec.id) {
    case ExperimentId::Exp1_KMeans: detail::run_exp1(spec, res, out); break;
    case ExperimentId::Exp2_Binary:
    case ExperimentId::Exp3_MultiClass: detail::run_classification(spec, res, out); break;
    case ExperimentId::Exp4_Shift: detail::run_exp4(spec, res, out); break;
    case ExperimentId::FanoDemo: detail::run_fano(spec, res, out); break;
  }
  json checks = json::array();
  report::Table t{{"assertion", "passed", "detail"}, {}};
  for (const auto& a : res.assertions) {
    checks.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
    t.add({a.name, a.passed ? "true" : "false", a.detail});
  }
  res.summary["assertions"] = checks;
  res.summary["passed"] = res.ok();
  out.put("assertions.csv", report::to_csv(t));
  out.put_json("summary.json", res.summary);
  return res;
}

}  // namespace mixsim::experiments
