#pragma once

// Experiment specifications and the key-value scenario file that describes
// them. Format: one `key = value` per line, `#` starts a comment, and
// `[world]` / `[eval_world]` open the train-world and eval-world sections.
// Keys before the first section describe the experiment itself.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mixsim/error.hpp"
#include "mixsim/experiments/lab.hpp"
#include "mixsim/learn/train.hpp"
#include "mixsim/trace/features.hpp"

namespace mixsim::experiments {

enum class ExperimentId { Exp1_KMeans, Exp2_Binary, Exp3_MultiClass, Exp4_Shift, FanoDemo };

constexpr std::string_view to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::Exp1_KMeans: return "Exp1_KMeans";
    case ExperimentId::Exp2_Binary: return "Exp2_Binary";
    case ExperimentId::Exp3_MultiClass: return "Exp3_MultiClass";
    case ExperimentId::Exp4_Shift: return "Exp4_Shift";
    case ExperimentId::FanoDemo: return "FanoDemo";
  }
  return "?";
}

/// Accepts the full id or its short prefix ("Exp2").
inline std::optional<ExperimentId> parse_experiment_id(std::string_view s) {
  for (auto id : {ExperimentId::Exp1_KMeans, ExperimentId::Exp2_Binary, ExperimentId::Exp3_MultiClass,
                  ExperimentId::Exp4_Shift, ExperimentId::FanoDemo}) {
    const auto name = to_string(id);
    if (s == name || (s.size() == 4 && name.substr(0, 4) == s && name[4] == '_')) return id;
  }
  return std::nullopt;
}

struct ExperimentSpec {
  ExperimentId id = ExperimentId::Exp2_Binary;
  LabScenario world;
  std::optional<LabScenario> eval_world;
  std::vector<trace::FeatureSpec> variants;
  std::uint64_t seed = 1;  // training, splitting and clustering
  learn::TrainHyper hyper;
  double train_fraction = 0.9;

  // Exp1
  std::size_t k_max = 30;
  std::size_t restarts = 10;
  std::size_t elbow_k = 4;  // (W(k-1) - W(k)) / (W(k) - W(k+1)) is judged here
  double elbow_threshold = 3.0;

  // FanoDemo
  std::size_t nodes = 1024;
  std::vector<std::size_t> leakage_lengths{1, 2, 3};
  std::size_t leakage_requests = 100;

  std::string pcap;    // optional capture evaluated with the trained models
  std::string output;  // empty = <output root>/<id>-seed<seed>
};

inline void reseed(LabScenario& sc, std::uint64_t seed) {
  sc.sim.seed = seed;
  sc.script_seed = seed * 7919 + 11;
}

/// Sets the training seed and derives both worlds' simulation seeds from it.
inline void apply_seed(ExperimentSpec& spec, std::uint64_t seed) {
  spec.seed = seed;
  reseed(spec.world, seed);
  if (spec.eval_world) reseed(*spec.eval_world, seed + 1);
}

inline ExperimentSpec default_experiment(ExperimentId id, std::uint64_t seed = 1) {
  using trace::FeatureVariant;
  ExperimentSpec spec;
  spec.id = id;
  spec.seed = seed;
  switch (id) {
    case ExperimentId::Exp1_KMeans:
    case ExperimentId::FanoDemo:
      spec.world = default_lab(seed);
      break;
    case ExperimentId::Exp2_Binary:
      spec.world = default_lab(seed);
      spec.variants = {{FeatureVariant::WithoutPayload, {}}, {FeatureVariant::PayloadOnly, {}},
                       {FeatureVariant::AllRaw, {}}};
      break;
    case ExperimentId::Exp3_MultiClass:
      spec.world = default_multiclass_lab(seed);
      spec.variants = {{FeatureVariant::WithoutPayload, {}}, {FeatureVariant::AllRaw, {}}};
      break;
    case ExperimentId::Exp4_Shift:
      spec.world = default_lab(seed);
      spec.eval_world = shifted_lab(seed + 1);
      spec.variants = {{FeatureVariant::WithoutPayload, {}}};
      break;
  }
  return spec;
}

inline void validate(const ExperimentSpec& spec) {
  const auto bad = [](const std::string& why) { fail(Errc::ConfigError, why); };
  simnet::validate(spec.world.sim);
  if (spec.eval_world) simnet::validate(spec.eval_world->sim);
  const bool trains = spec.id == ExperimentId::Exp2_Binary || spec.id == ExperimentId::Exp3_MultiClass ||
                      spec.id == ExperimentId::Exp4_Shift;
  if (trains && spec.variants.empty()) bad("experiment needs at least one feature variant");
  if (spec.id == ExperimentId::Exp3_MultiClass && spec.world.targets.size() < 2) {
    bad("Exp3_MultiClass needs two target services");
  }
  if (spec.id == ExperimentId::Exp4_Shift) {
    if (!spec.eval_world) bad("Exp4_Shift needs an [eval_world] section");
    if (*spec.eval_world == spec.world) bad("Exp4_Shift needs two distinct worlds");
  }
  if (spec.id == ExperimentId::Exp1_KMeans && (spec.elbow_k < 2 || spec.elbow_k + 1 > spec.k_max)) {
    bad("need 2 <= elbow_k < k_max");
  }
  if (spec.id == ExperimentId::FanoDemo && spec.nodes < 3) bad("FanoDemo needs nodes >= 3");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) bad("train_fraction must be in (0,1)");
}

namespace detail {

struct Entry {
  std::string section;
  std::string key;
  std::string value;
  std::size_t line = 0;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] inline void config_error(const Entry& e, const std::string& why) {
  fail(Errc::ConfigError, "line " + std::to_string(e.line) + ": field '" + e.key + "': " + why, e.line);
}

inline std::vector<std::string> split_list(const std::string& v, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_int(const Entry& e, const std::string& v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) config_error(e, "expected an integer, got '" + v + "'");
  return out;
}

inline double parse_double(const Entry& e, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    config_error(e, "expected a number, got '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const Entry& e, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  config_error(e, "expected true/false, got '" + v + "'");
}

inline LabScenario preset(const Entry& e, std::uint64_t seed) {
  if (e.value == "lab") return default_lab(seed);
  if (e.value == "multiclass") return default_multiclass_lab(seed);
  if (e.value == "shifted") return shifted_lab(seed);
  config_error(e, "unknown preset '" + e.value + "' (lab, multiclass, shifted)");
}

inline simnet::ChurnSpec& churn(LabScenario& sc) {
  if (!sc.sim.churn) sc.sim.churn = simnet::ChurnSpec{};
  return *sc.sim.churn;
}

inline void apply_world_key(LabScenario& sc, const Entry& e, bool& targets_reset) {
  const auto& k = e.key;
  const auto& v = e.value;
  auto& c = sc.sim;
  const auto size = [&] { return parse_int<std::size_t>(e, v); };
  const auto real = [&] { return parse_double(e, v); };
  if (k == "node_count") c.node_count = size();
  else if (k == "outbound_length") c.outbound_tunnel_length = size();
  else if (k == "inbound_length") c.inbound_tunnel_length = size();
  else if (k == "tunnel_lifetime") c.tunnel_lifetime = real();
  else if (k == "lease_lifetime") c.lease_lifetime = real();
  else if (k == "latency_mean_ms") c.link_latency.mean_ms = real();
  else if (k == "latency_jitter_ms") c.link_latency.jitter_ms = real();
  else if (k == "udp_probability") c.udp_probability = real();
  else if (k == "cell_size") c.cell_size = size();
  else if (k == "onion_mode") {
    if (v == "naive") c.onion_mode = crypto::OnionMode::Naive;
    else if (v == "padded") c.onion_mode = crypto::OnionMode::Padded;
    else config_error(e, "expected naive or padded");
  } else if (k == "background_flows") c.background_flows = size();
  else if (k == "background_rate") c.background_rate = real();
  else if (k == "background_min_size") c.background_min_size = size();
  else if (k == "background_max_size") c.background_max_size = size();
  else if (k == "background_tunnel_flows") c.background_tunnel_flows = size();
  else if (k == "background_tunnel_rate") c.background_tunnel_rate = real();
  else if (k == "ack_probability") c.ack_probability = real();
  else if (k == "link_padding_max") c.link_padding_max = size();
  else if (k == "ip_ttl") {
    const auto ttl = size();
    if (ttl == 0 || ttl > 255) config_error(e, "ip_ttl must be in [1,255]");
    c.ip_ttl = static_cast<std::uint8_t>(ttl);
  } else if (k == "first_address") {
    try {
      (void)NodeAddress::parse(v);
    } catch (const Error&) {
      config_error(e, "not an IPv4 address");
    }
    c.first_address = v;
  } else if (k == "strict_netdb") c.strict_netdb = parse_bool(e, v);
  else if (k == "sim_seed") c.seed = parse_int<std::uint64_t>(e, v);
  else if (k == "churn_base") churn(sc).base_online_fraction = real();
  else if (k == "churn_amplitude") churn(sc).diurnal_amplitude = real();
  else if (k == "churn_period") churn(sc).period = real();
  else if (k == "churn_tick") churn(sc).tick_interval = real();
  else if (k == "churn_stable_core") {
    const auto first = NodeAddress::parse(c.first_address);  // validated when set
    auto& core = churn(sc).stable_core;
    core.clear();
    for (const auto& item : split_list(v, ',')) {
      core.insert(NodeAddress{first.value() + parse_int<std::uint32_t>(e, item)});
    }
  } else if (k == "sender") sc.sender_index = size();
  else if (k == "sender_tunnels") sc.sender_outbound_tunnels = size();
  else if (k == "target") {
    const auto parts = split_list(v, ' ');
    if (parts.size() != 3) config_error(e, "expected '<node index> <class> <requests>'");
    if (!targets_reset) sc.targets.clear(), targets_reset = true;
    TargetSpec t{parse_int<std::size_t>(e, parts[0]), parse_int<int>(e, parts[1]), parse_int<std::size_t>(e, parts[2])};
    if (t.class_tag < 2 || t.class_tag > 3) config_error(e, "target class must be 2 or 3");
    sc.targets.push_back(t);
  } else if (k == "vantage") {
    sc.vantages.clear();
    for (const auto& item : split_list(v, ',')) sc.vantages.push_back(parse_int<std::size_t>(e, item));
  } else if (k == "warmup") sc.warmup = real();
  else if (k == "request_rate") sc.request_rate = real();
  else if (k == "tail") sc.tail = real();
  else if (k == "request_min_size") sc.min_request_size = size();
  else if (k == "request_max_size") sc.max_request_size = size();
  else if (k == "script_seed") sc.script_seed = parse_int<std::uint64_t>(e, v);
  else config_error(e, "unknown key");
}

inline void apply_top_key(ExperimentSpec& s, const Entry& e) {
  const auto& k = e.key;
  const auto& v = e.value;
  const auto size = [&] { return parse_int<std::size_t>(e, v); };
  if (k == "experiment" || k == "seed") return;  // handled first
  if (k == "variants") {
    s.variants.clear();
    for (const auto& item : split_list(v, ',')) {
      // "without-payload - tcp_ack tcp_seq" drops metadata columns
      const auto dash = item.find(" - ");
      trace::FeatureSpec fs;
      try {
        fs.variant = trace::parse_variant(trim(item.substr(0, dash)));
        if (dash != std::string::npos) {
          for (const auto& col : split_list(item.substr(dash + 3), ' ')) fs.dropped.insert(col);
          (void)trace::feature_length(fs);
        }
      } catch (const Error& err) {
        config_error(e, err.what());
      }
      s.variants.push_back(fs);
    }
  } else if (k == "epochs") s.hyper.max_epochs = size();
  else if (k == "patience") s.hyper.patience = size();
  else if (k == "batch") s.hyper.batch_size = size();
  else if (k == "learning_rate") s.hyper.adam.learning_rate = parse_double(e, v);
  else if (k == "conv1") s.hyper.conv1 = size();
  else if (k == "conv2") s.hyper.conv2 = size();
  else if (k == "train_fraction") s.train_fraction = parse_double(e, v);
  else if (k == "k_max") s.k_max = size();
  else if (k == "restarts") s.restarts = size();
  else if (k == "elbow_k") s.elbow_k = size();
  else if (k == "elbow_threshold") s.elbow_threshold = parse_double(e, v);
  else if (k == "nodes") s.nodes = size();
  else if (k == "leakage_lengths") {
    s.leakage_lengths.clear();
    for (const auto& item : split_list(v, ',')) s.leakage_lengths.push_back(parse_int<std::size_t>(e, item));
  } else if (k == "leakage_requests") s.leakage_requests = size();
  else if (k == "pcap") s.pcap = v;
  else if (k == "output") s.output = v;
  else config_error(e, "unknown key");
}

}  // namespace detail

/// Parses a scenario file. `experiment` and `seed` set the defaults the rest
/// of the file then overrides; a section's `preset` must come first in it.
inline ExperimentSpec parse_experiment_config(const std::string& text) {
  using detail::Entry;
  std::vector<Entry> entries;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(Errc::ConfigError, "line " + std::to_string(line_no) + ": unterminated section", line_no);
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "world" && section != "eval_world") {
        fail(Errc::ConfigError, "line " + std::to_string(line_no) + ": unknown section '" + section + "'", line_no);
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(Errc::ConfigError, "line " + std::to_string(line_no) + ": expected 'key = value'", line_no);
    }
    Entry e{section, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)), line_no};
    if (e.key.empty()) fail(Errc::ConfigError, "line " + std::to_string(line_no) + ": empty key", line_no);
    if (e.value.empty()) detail::config_error(e, "empty value");
    entries.push_back(std::move(e));
  }

  std::optional<ExperimentId> id;
  std::uint64_t seed = 1;
  for (const auto& e : entries) {
    if (!e.section.empty()) continue;
    if (e.key == "experiment") {
      id = parse_experiment_id(e.value);
      if (!id) detail::config_error(e, "unknown experiment '" + e.value + "'");
    } else if (e.key == "seed") {
      seed = detail::parse_int<std::uint64_t>(e, e.value);
    }
  }
  if (!id) fail(Errc::ConfigError, "missing field 'experiment'");
  ExperimentSpec spec = default_experiment(*id, seed);

  bool world_targets_reset = false;
  bool eval_targets_reset = false;
  std::string current;
  bool section_has_keys = false;
  for (const auto& e : entries) {
    if (e.section != current) current = e.section, section_has_keys = false;
    if (e.section.empty()) {
      detail::apply_top_key(spec, e);
      continue;
    }
    const bool eval = e.section == "eval_world";
    if (eval && !spec.eval_world) spec.eval_world = shifted_lab(seed + 1);
    LabScenario& sc = eval ? *spec.eval_world : spec.world;
    if (e.key == "preset") {
      if (section_has_keys) detail::config_error(e, "preset must be the first key of its section");
      sc = detail::preset(e, eval ? seed + 1 : seed);
    } else {
      detail::apply_world_key(sc, e, eval ? eval_targets_reset : world_targets_reset);
    }
    section_has_keys = true;
  }
  try {
    validate(spec);
  } catch (const Error& err) {
    fail(Errc::ConfigError, err.what());
  }
  return spec;
}

}  // namespace mixsim::experiments
