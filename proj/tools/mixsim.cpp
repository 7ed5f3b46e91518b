// mixsim command-line front end.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mixsim/anonymity/information.hpp"
#include "mixsim/experiments/experiment.hpp"
#include "mixsim/experiments/lab.hpp"
#include "mixsim/experiments/runner.hpp"
#include "mixsim/learn/ablation.hpp"
#include "mixsim/learn/kmeans.hpp"
#include "mixsim/report/figures.hpp"
#include "mixsim/trace/curate.hpp"
#include "mixsim/trace/entropy.hpp"
#include "mixsim/trace/features.hpp"
#include "mixsim/trace/jsonl.hpp"
#include "mixsim/trace/pcap.hpp"

namespace {

using namespace mixsim;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

bool has_extension(const std::string& path, const char* ext) { return fs::path(path).extension() == ext; }

trace::Trace load_trace(const std::string& path) {
  if (!fs::exists(path)) fail(Errc::MissingInput, path + " does not exist");
  if (has_extension(path, ".pcap")) {
    const std::string bytes = report::read_file(path);
    auto imported = trace::import_pcap(ByteView(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
    if (imported.skipped_count > 0) std::cerr << "skipped " << imported.skipped_count << " non-TCP/UDP packets\n";
    return imported.trace;
  }
  std::ifstream in(path, std::ios::binary);
  return trace::read_jsonl(in);
}

void save_trace(const trace::Trace& t, const std::string& path) {
  if (has_extension(path, ".pcap")) {
    const Bytes b = trace::write_pcap(t);
    report::write_file(path, std::string(b.begin(), b.end()));
  } else if (has_extension(path, ".csv")) {
    std::ostringstream s;
    trace::write_csv(t, s);
    report::write_file(path, s.str());
  } else {
    report::write_file(path, trace::to_jsonl(t));
  }
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    report::write_file(path, text);
  }
}

experiments::LabScenario load_world(const std::string& config, const std::string& preset, std::uint64_t seed) {
  if (!config.empty()) return experiments::parse_experiment_config(report::read_file(config)).world;
  if (preset == "multiclass") return experiments::default_multiclass_lab(seed);
  if (preset == "shifted") return experiments::shifted_lab(seed);
  if (preset != "lab") fail(Errc::ConfigError, "unknown preset '" + preset + "'");
  return experiments::default_lab(seed);
}

trace::FeatureSpec feature_spec(const std::string& variant, const std::vector<std::string>& drop) {
  trace::FeatureSpec s{trace::parse_variant(variant), {drop.begin(), drop.end()}};
  (void)trace::feature_length(s);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mix-network simulator and passive traffic-analysis harness"};
  app.require_subcommand(1);

  // simulate
  std::string sim_config, sim_preset = "lab", sim_out = ".";
  std::uint64_t sim_seed = 1;
  auto* simulate = app.add_subcommand("simulate", "Run a scenario; write raw and curated captures");
  simulate->add_option("--config", sim_config, "Scenario file ([world] section is used)");
  simulate->add_option("--preset", sim_preset, "lab, multiclass or shifted")->capture_default_str();
  simulate->add_option("--seed", sim_seed, "Seed for the preset")->capture_default_str();
  simulate->add_option("--out", sim_out, "Output directory")->capture_default_str();

  // capture
  std::string cap_config, cap_preset = "lab", cap_pcap, cap_out;
  std::uint64_t cap_seed = 1;
  std::vector<std::size_t> cap_vantages;
  auto* capture = app.add_subcommand("capture", "Capture at chosen vantages, or import a pcap file");
  capture->add_option("--config", cap_config, "Scenario file");
  capture->add_option("--preset", cap_preset, "lab, multiclass or shifted")->capture_default_str();
  capture->add_option("--seed", cap_seed, "Seed for the preset")->capture_default_str();
  capture->add_option("--vantage", cap_vantages, "Node index to observe (repeatable)");
  capture->add_option("--pcap", cap_pcap, "Import this pcap instead of simulating");
  capture->add_option("--out", cap_out, "Output file (.jsonl, .pcap or .csv)")->required();

  // curate
  std::string cur_in, cur_out;
  auto* curate = app.add_subcommand("curate", "Drop retransmissions, duplicate ACKs and empty TCP segments");
  curate->add_option("input", cur_in, "Trace (.jsonl or .pcap)")->required();
  curate->add_option("output", cur_out, "Curated trace (.jsonl, .pcap or .csv)")->required();

  // features
  std::string feat_in, feat_variant = "without-payload", feat_out;
  std::vector<std::string> feat_drop;
  auto* features = app.add_subcommand("features", "Write the feature matrix of a trace as CSV");
  features->add_option("input", feat_in, "Trace")->required();
  features->add_option("--variant", feat_variant, "all-raw, without-payload, without-port, payload-only")
      ->capture_default_str();
  features->add_option("--drop", feat_drop, "Metadata column to leave out (repeatable)");
  features->add_option("--out", feat_out, "CSV file (default stdout)");

  // entropy
  std::string ent_in, ent_out;
  auto* entropy = app.add_subcommand("entropy", "Per-packet payload entropy");
  entropy->add_option("input", ent_in, "Trace")->required();
  entropy->add_option("--out", ent_out, "CSV file (default stdout)");

  // fano
  double fano_h = 0.0, fano_i = 0.0;
  std::size_t fano_set = 0;
  auto* fano = app.add_subcommand("fano", "Lower bound on the adversary's error probability");
  fano->add_option("--entropy", fano_h, "H(X) in bits")->required();
  fano->add_option("--mi", fano_i, "I(X;Y) in bits")->capture_default_str();
  fano->add_option("--set", fano_set, "Anonymity set size")->required();

  // kmeans
  std::string km_in, km_features = "port-size-protocol", km_out = ".";
  std::size_t km_kmin = 1, km_kmax = 30, km_restarts = 10, km_at = 4;
  std::uint64_t km_seed = 1;
  auto* kmeans = app.add_subcommand("kmeans", "Elbow scan over a trace");
  kmeans->add_option("input", km_in, "Trace")->required();
  kmeans->add_option("--features", km_features, "port-size-protocol or metadata")->capture_default_str();
  kmeans->add_option("--kmin", km_kmin)->capture_default_str();
  kmeans->add_option("--kmax", km_kmax)->capture_default_str();
  kmeans->add_option("--restarts", km_restarts)->capture_default_str();
  kmeans->add_option("--elbow-k", km_at, "k at which the elbow ratio is reported")->capture_default_str();
  kmeans->add_option("--seed", km_seed)->capture_default_str();
  kmeans->add_option("--out", km_out, "Output directory")->capture_default_str();

  // train
  std::string tr_in, tr_variant = "without-payload", tr_out, tr_report;
  std::vector<std::string> tr_drop;
  std::uint64_t tr_seed = 1;
  learn::TrainHyper hyper;
  double tr_fraction = 0.9;
  auto* train = app.add_subcommand("train", "Train a CNN on a labelled trace");
  train->add_option("input", tr_in, "Trace with ground truth")->required();
  train->add_option("--variant", tr_variant)->capture_default_str();
  train->add_option("--drop", tr_drop, "Metadata column to leave out (repeatable)");
  train->add_option("--seed", tr_seed)->capture_default_str();
  train->add_option("--epochs", hyper.max_epochs)->capture_default_str();
  train->add_option("--patience", hyper.patience)->capture_default_str();
  train->add_option("--batch", hyper.batch_size)->capture_default_str();
  train->add_option("--learning-rate", hyper.adam.learning_rate)->capture_default_str();
  train->add_option("--train-fraction", tr_fraction)->capture_default_str();
  train->add_option("--out", tr_out, "Model checkpoint (JSON)")->required();
  train->add_option("--report", tr_report, "Training report (JSON)");

  // eval
  std::string ev_model, ev_in, ev_pcap, ev_out;
  auto* eval = app.add_subcommand("eval", "Apply a trained model to a trace or pcap");
  eval->add_option("--model", ev_model, "Model checkpoint")->required();
  eval->add_option("input", ev_in, "Trace (.jsonl)");
  eval->add_option("--pcap", ev_pcap, "Unlabelled capture; reports class assignment counts");
  eval->add_option("--out", ev_out, "Report file (default stdout)");

  // run
  std::string run_id, run_config, run_out, run_pcap;
  std::vector<std::string> run_variants;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::size_t> run_nodes;
  auto* run = app.add_subcommand("run", "Run an experiment (Exp1..Exp4, FanoDemo)");
  run->add_option("experiment", run_id, "Exp1_KMeans, Exp2_Binary, Exp3_MultiClass, Exp4_Shift or FanoDemo")
      ->required();
  run->add_option("--config", run_config, "Scenario file");
  run->add_option("--variant", run_variants, "Feature variant (repeatable)");
  run->add_option("--seed", run_seed, "Seed for training and both worlds");
  run->add_option("--nodes", run_nodes, "Network size for FanoDemo");
  run->add_option("--pcap", run_pcap, "Also apply trained models to this capture");
  run->add_option("--out", run_out, "Output directory (default $MIXSIM_OUTPUT_ROOT/<id>-seed<seed>)");

  // report
  std::string rep_in, rep_out = ".";
  auto* report_cmd = app.add_subcommand("report", "Render CSV and SVG figures for a trace or results directory");
  report_cmd->add_option("input", rep_in, "Trace (.jsonl) or directory")->required();
  report_cmd->add_option("--out", rep_out, "Output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      const auto world = load_world(sim_config, sim_preset, sim_seed);
      const auto lab = experiments::run_lab(world);
      const fs::path dir = sim_out;
      save_trace(lab.raw, (dir / "raw.jsonl").string());
      save_trace(lab.curated, (dir / "curated.jsonl").string());
      save_trace(lab.raw, (dir / "raw.pcap").string());
      report::write_file(dir / "simulation.json", experiments::detail::lab_json(lab).dump(2) + "\n");
      std::cout << "requests " << lab.requests_sent << ", deliveries " << lab.deliveries << ", captured "
                << lab.raw.records.size() << " packets (" << lab.curated.records.size() << " after curation)\n";
    } else if (*capture) {
      trace::Trace t;
      if (!cap_pcap.empty()) {
        t = load_trace(cap_pcap);
      } else {
        auto world = load_world(cap_config, cap_preset, cap_seed);
        if (!cap_vantages.empty()) world.vantages = cap_vantages;
        t = experiments::run_lab(world).raw;
      }
      save_trace(t, cap_out);
      std::cout << t.records.size() << " packets\n";
    } else if (*curate) {
      const auto t = trace::curate(load_trace(cur_in));
      save_trace(t, cur_out);
      std::cout << t.records.size() << " packets survive\n";
    } else if (*features) {
      const auto spec = feature_spec(feat_variant, feat_drop);
      const auto t = load_trace(feat_in);
      report::Table table;
      table.header = trace::feature_names(spec);
      table.header.push_back("label");
      for (const auto& r : t.records) {
        std::vector<std::string> row;
        for (double v : trace::extract_features(r, spec)) row.push_back(report::num(v));
        row.push_back(r.ground_truth_class ? std::to_string(*r.ground_truth_class) : "");
        table.add(std::move(row));
      }
      emit(feat_out, report::to_csv(table));
    } else if (*entropy) {
      const auto s = trace::summarize(load_trace(ent_in));
      emit(ent_out, report::to_csv(report::entropy_table(s)));
      if (s.mean_entropy) std::cerr << "mean entropy " << report::num(*s.mean_entropy, 4) << " bits\n";
    } else if (*fano) {
      std::cout << anonymity::to_json(anonymity::fano_lower_bound(fano_h, fano_i, fano_set)).dump(2) << "\n";
    } else if (*kmeans) {
      const auto t = load_trace(km_in);
      learn::Points pts;
      if (km_features == "metadata") {
        for (const auto& r : t.records) pts.push_back(trace::extract_features(r, trace::FeatureVariant::WithoutPayload));
      } else if (km_features == "port-size-protocol") {
        pts = experiments::port_size_protocol(t);
      } else {
        fail(Errc::ConfigError, "unknown feature set '" + km_features + "'");
      }
      const auto curve = learn::elbow_scan(learn::standardize(pts), km_kmin, km_kmax, km_restarts, km_seed);
      const fs::path dir = km_out;
      report::write_file(dir / "elbow.csv", report::to_csv(report::elbow_table(curve)));
      report::write_file(dir / "elbow.svg", report::render(report::elbow_plot(curve, "Elbow curve")));
      if (km_at > km_kmin && km_at < km_kmax) {
        std::cout << "elbow ratio at k=" << km_at << ": " << report::num(learn::elbow_ratio(curve, km_at), 3) << "\n";
      }
    } else if (*train) {
      const auto spec = feature_spec(tr_variant, tr_drop);
      const auto t = load_trace(tr_in);
      std::vector<int> labels;
      for (const auto& r : t.records) labels.push_back(r.ground_truth_class.value_or(0));
      const auto split = learn::balanced_split(labels, tr_fraction, tr_seed);
      const auto all = learn::build_dataset(t, spec);
      auto [model, rep] = learn::cnn_train(all.subset(split.train), all.subset(split.val), hyper, tr_seed);
      report::write_file(tr_out, learn::to_json(model).dump(2) + "\n");
      if (!tr_report.empty()) report::write_file(tr_report, learn::to_json(rep).dump(2) + "\n");
      std::cout << spec.label() << ": validation accuracy " << report::num(rep.final_validation_accuracy, 4)
                << " after " << rep.epochs.size() << " epochs\n";
    } else if (*eval) {
      const auto model = learn::model_from_json(json::parse(report::read_file(ev_model)));
      if (ev_in.empty() == ev_pcap.empty()) fail(Errc::MissingInput, "give exactly one of a trace or --pcap");
      trace::Trace t = ev_pcap.empty() ? load_trace(ev_in) : load_trace(ev_pcap);
      if (!t.curation_applied) t = trace::curate(t);
      const auto data = learn::build_dataset(t, model.spec);
      json out;
      out["variant"] = model.spec.label();
      out["records"] = t.records.size();
      const bool labelled = !t.records.empty() && t.records.front().ground_truth_class.has_value();
      if (labelled) {
        out["report"] = learn::to_json(learn::cnn_evaluate(model, data));
      } else {
        json a = json::object();
        for (auto [c, n] : learn::cnn_assignments(model, data)) a[std::to_string(c)] = n;
        out["assignments"] = a;
      }
      emit(ev_out, out.dump(2) + "\n");
    } else if (*run) {
      const auto id = experiments::parse_experiment_id(run_id);
      if (!id) fail(Errc::ConfigError, "unknown experiment '" + run_id + "'");
      experiments::ExperimentSpec spec = run_config.empty()
                                             ? experiments::default_experiment(*id)
                                             : experiments::parse_experiment_config(report::read_file(run_config));
      if (spec.id != *id) fail(Errc::ConfigError, "config describes " + std::string(to_string(spec.id)));
      if (run_seed) experiments::apply_seed(spec, *run_seed);
      if (run_nodes) spec.nodes = *run_nodes;
      if (!run_variants.empty()) {
        spec.variants.clear();
        for (const auto& v : run_variants) spec.variants.push_back(feature_spec(v, {}));
      }
      if (!run_pcap.empty()) spec.pcap = run_pcap;
      if (!run_out.empty()) spec.output = run_out;
      const auto res = experiments::run_experiment(spec);
      std::cout << to_string(res.id) << " -> " << res.directory.string() << "\n";
      if (spec.id == experiments::ExperimentId::FanoDemo) {
        std::cout << "lower_bound_pe " << report::num(res.summary["lower_bound_pe"].get<double>(), 5) << "\n";
      }
      for (const auto& a : res.assertions) {
        std::cout << (a.passed ? "  ok    " : "  FAIL  ") << a.name << " (" << a.detail << ")\n";
      }
      return res.exit_status();
    } else if (*report_cmd) {
      for (const auto& f : report::report(rep_in, rep_out)) std::cout << (fs::path(rep_out) / f).string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what();
    if (e.offset()) std::cerr << " (at " << *e.offset() << ")";
    std::cerr << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
