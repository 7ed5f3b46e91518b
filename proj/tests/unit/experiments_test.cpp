#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mixsim/experiments/runner.hpp"
#include "mixsim/report/figures.hpp"
#include "mixsim/trace/jsonl.hpp"

namespace mixsim::experiments {
namespace {

namespace fs = std::filesystem;

Error error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no error raised";
  return Error(Errc::NotFound, "");
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("mixsim_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(ExperimentId, FullAndShortNames) {
  EXPECT_EQ(parse_experiment_id("Exp2_Binary"), ExperimentId::Exp2_Binary);
  EXPECT_EQ(parse_experiment_id("Exp3"), ExperimentId::Exp3_MultiClass);
  EXPECT_EQ(parse_experiment_id("FanoDemo"), ExperimentId::FanoDemo);
  EXPECT_FALSE(parse_experiment_id("Exp9").has_value());
}

TEST(Config, OverridesDefaults) {
  const auto spec = parse_experiment_config(
      "# comment\n"
      "experiment = Exp2_Binary\n"
      "seed = 5\n"
      "epochs = 7   # trailing comment\n"
      "variants = without-payload, payload-only\n"
      "\n"
      "[world]\n"
      "preset = lab\n"
      "node_count = 24\n"
      "onion_mode = naive\n");
  EXPECT_EQ(spec.id, ExperimentId::Exp2_Binary);
  EXPECT_EQ(spec.seed, 5u);
  EXPECT_EQ(spec.hyper.max_epochs, 7u);
  ASSERT_EQ(spec.variants.size(), 2u);
  EXPECT_EQ(spec.variants[1].variant, trace::FeatureVariant::PayloadOnly);
  EXPECT_EQ(spec.world.sim.node_count, 24u);
  EXPECT_EQ(spec.world.sim.onion_mode, crypto::OnionMode::Naive);
}

TEST(Config, DroppedColumns) {
  const auto spec = parse_experiment_config("experiment = Exp2\nvariants = without-payload - tcp_ack tcp_seq\n");
  ASSERT_EQ(spec.variants.size(), 1u);
  EXPECT_EQ(spec.variants[0].dropped, (std::set<std::string>{"tcp_ack", "tcp_seq"}));
  EXPECT_EQ(trace::feature_length(spec.variants[0]), 12u);
}

TEST(Config, ErrorsNameLineAndField) {
  const auto e = error_of([] { parse_experiment_config("experiment = Exp2\n\nepochs = many\n"); });
  EXPECT_EQ(e.code(), Errc::ConfigError);
  EXPECT_EQ(e.offset(), 3u);
  EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  EXPECT_NE(std::string(e.what()).find("'epochs'"), std::string::npos);
}

TEST(Config, UnknownKeyAndSection) {
  const auto key = error_of([] { parse_experiment_config("experiment = Exp2\n[world]\nwarp_speed = 9\n"); });
  EXPECT_EQ(key.code(), Errc::ConfigError);
  EXPECT_EQ(key.offset(), 3u);
  EXPECT_NE(std::string(key.what()).find("warp_speed"), std::string::npos);
  const auto section = error_of([] { parse_experiment_config("experiment = Exp2\n[galaxy]\n"); });
  EXPECT_EQ(section.offset(), 2u);
}

TEST(Config, MissingExperiment) {
  EXPECT_EQ(error_of([] { parse_experiment_config("seed = 3\n"); }).code(), Errc::ConfigError);
}

TEST(Config, SemanticErrorsAreConfigErrors) {
  const auto ttl = error_of([] { parse_experiment_config("experiment = Exp2\n[world]\nip_ttl = 300\n"); });
  EXPECT_EQ(ttl.code(), Errc::ConfigError);
  EXPECT_EQ(ttl.offset(), 3u);
  EXPECT_EQ(error_of([] { parse_experiment_config("experiment = Exp2\nvariants = everything\n"); }).code(),
            Errc::ConfigError);
  EXPECT_EQ(error_of([] { parse_experiment_config("experiment = Exp2\n[world]\nnode_count = 2\n"); }).code(),
            Errc::ConfigError);
  EXPECT_EQ(error_of([] { parse_experiment_config("experiment = Exp1\nelbow_k = 1\n"); }).code(),
            Errc::ConfigError);
  EXPECT_EQ(error_of([] { parse_experiment_config("experiment = FanoDemo\nnodes = 2\n"); }).code(),
            Errc::ConfigError);
}

TEST(Config, PresetMustComeFirst) {
  const auto e = error_of([] { parse_experiment_config("experiment = Exp2\n[world]\nnode_count = 30\npreset = lab\n"); });
  EXPECT_EQ(e.offset(), 4u);
}

TEST(Config, ShippedScenariosParse) {
  const fs::path dir = MIXSIM_SOURCE_DIR "/scenarios";
  std::size_t seen = 0;
  for (const auto& f : fs::directory_iterator(dir)) {
    if (f.path().extension() != ".conf") continue;
    ++seen;
    EXPECT_NO_THROW(parse_experiment_config(report::read_file(f.path()))) << f.path();
  }
  EXPECT_GE(seen, 5u);
}

TEST(Seed, DerivesBothWorlds) {
  auto spec = default_experiment(ExperimentId::Exp4_Shift, 1);
  apply_seed(spec, 9);
  EXPECT_EQ(spec.seed, 9u);
  EXPECT_EQ(spec.world.sim.seed, 9u);
  EXPECT_EQ(spec.eval_world->sim.seed, 10u);
}

TEST(Fano, DemoMatchesClosedForm) {
  auto spec = default_experiment(ExperimentId::FanoDemo, 1);
  spec.output = scratch("fano").string();
  const auto res = run_experiment(spec);
  EXPECT_TRUE(res.ok());
  EXPECT_NEAR(res.summary.at("lower_bound_pe").get<double>(), 9.0 / std::log2(1023.0), 1e-9);
  EXPECT_TRUE(fs::exists(res.directory / "fano.json"));
  EXPECT_TRUE(fs::exists(res.directory / "summary.json"));
}

trace::Trace small_trace() {
  trace::Trace t;
  for (int i = 0; i < 12; ++i) {
    trace::TraceRecord r;
    r.frame_num = r.old_frame_num = static_cast<std::uint64_t>(i + 1);
    r.timestamp = 0.1 * i;
    r.src_ip = "10.8.0.2";
    r.dst_ip = "10.8.0.11";
    r.protocol = i % 3 ? trace::Protocol::TCP : trace::Protocol::UDP;
    r.dst_port = static_cast<std::uint16_t>(9000 + i % 4);
    r.payload.assign(static_cast<std::size_t>(20 + 7 * i), static_cast<std::uint8_t>(i));
    for (std::size_t k = 0; k < r.payload.size(); k += 3) r.payload[k] = static_cast<std::uint8_t>(k);
    r.payload_size = static_cast<std::uint32_t>(r.payload.size());
    t.records.push_back(r);
  }
  return t;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = report::read_file(e.path());
  }
  return out;
}

TEST(Report, RerenderIsDeterministic) {
  const auto in = scratch("report_in");
  {
    std::ofstream f(in / "trace.jsonl", std::ios::binary);
    trace::write_jsonl(small_trace(), f);
  }
  report::write_file(in / "elbow.csv", "k,wcss\n1,10\n2,4\n3,3\n");
  const auto a = scratch("report_a");
  const auto b = scratch("report_b");
  const auto wa = report::report(in, a);
  const auto wb = report::report(in, b);
  EXPECT_EQ(wa, wb);
  EXPECT_FALSE(wa.empty());
  EXPECT_EQ(snapshot(a), snapshot(b));
}

TEST(Report, MissingInput) {
  const auto empty = scratch("report_empty");
  EXPECT_EQ(error_of([&] { report::report(empty, scratch("report_out")); }).code(), Errc::MissingInput);
  EXPECT_EQ(error_of([&] { report::report(empty / "nope", empty); }).code(), Errc::MissingInput);
}

}  // namespace
}  // namespace mixsim::experiments
