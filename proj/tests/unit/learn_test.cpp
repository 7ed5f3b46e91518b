#include <gtest/gtest.h>

#include <cmath>

#include "mixsim/learn/ablation.hpp"
#include "mixsim/learn/gradcheck.hpp"
#include "mixsim/learn/kmeans.hpp"
#include "mixsim/learn/pearson.hpp"
#include "mixsim/learn/train.hpp"

namespace mixsim::learn {
namespace {

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::NotFound;
}

TEST(KMeans, TwoPairsOnALine) {
  const Points pts{{0.0}, {1.0}, {10.0}, {11.0}};
  Rng rng(1);
  const auto m = kmeans_fit(pts, 2, rng);
  EXPECT_NEAR(m.wcss, 1.0, 1e-9);
  std::vector<double> c{m.centers[0][0], m.centers[1][0]};
  std::sort(c.begin(), c.end());
  EXPECT_NEAR(c[0], 0.5, 1e-12);
  EXPECT_NEAR(c[1], 10.5, 1e-12);
  EXPECT_EQ(m.assignments[0], m.assignments[1]);
  EXPECT_NE(m.assignments[1], m.assignments[2]);
}

TEST(KMeans, OneClusterPerPoint) {
  const Points pts{{0.0, 1.0}, {3.0, 4.0}, {-2.0, 5.0}};
  Rng rng(2);
  EXPECT_NEAR(kmeans_fit(pts, 3, rng).wcss, 0.0, 1e-12);
}

TEST(KMeans, Errors) {
  Rng rng(3);
  EXPECT_EQ(code_of([&] { kmeans_fit(Points{{1.0}, {2.0}}, 3, rng); }), Errc::KTooLarge);
  EXPECT_EQ(code_of([&] { kmeans_fit(Points{}, 1, rng); }), Errc::EmptySample);
}

TEST(KMeans, WcssMatchesAssignments) {
  Rng data(4);
  Points pts(200, std::vector<double>(3));
  for (auto& p : pts) {
    for (auto& v : p) v = data.normal();
  }
  Rng rng(5);
  const auto m = kmeans_fit(pts, 5, rng);
  double w = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t d = 0; d < 3; ++d) w += std::pow(pts[i][d] - m.centers[m.assignments[i]][d], 2);
  }
  EXPECT_NEAR(m.wcss, w, 1e-9);
  std::size_t total = 0;
  for (auto s : m.cluster_sizes()) total += s;
  EXPECT_EQ(total, pts.size());
}

Points four_blobs(std::uint64_t seed) {
  Rng rng(seed);
  const double centers[4][2] = {{0, 0}, {10, 0}, {0, 10}, {10, 10}};
  Points pts;
  for (const auto& c : centers) {
    for (int i = 0; i < 50; ++i) pts.push_back({c[0] + 0.5 * rng.normal(), c[1] + 0.5 * rng.normal()});
  }
  return pts;
}

TEST(Elbow, CurveIsNonIncreasing) {
  const auto curve = elbow_scan(four_blobs(6), 1, 8, 3, 6);
  ASSERT_EQ(curve.size(), 8u);
  for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_LE(curve[i].wcss, curve[i - 1].wcss + 1e-9);
}

TEST(Elbow, FourBlobsBendAtFour) {
  const auto curve = elbow_scan(four_blobs(7), 1, 8, 3, 7);
  EXPECT_GT(elbow_ratio(curve, 4), 3.0);
  EXPECT_EQ(code_of([&] { elbow_ratio(curve, 8); }), Errc::OutOfRange);
}

TEST(Pearson, Examples) {
  EXPECT_NEAR(pearson({1, 2, 3, 4}, {2, 4, 6, 8}).r, 1.0, 1e-12);
  EXPECT_NEAR(pearson({1, 2, 3, 4}, {8, 6, 4, 2}).r, -1.0, 1e-12);
  EXPECT_NEAR(pearson({1, 2, 3, 4, 5}, {2, 1, 4, 3, 5}).r, 0.8, 1e-12);
  const auto flat = pearson({3, 3, 3}, {1, 2, 3});
  EXPECT_TRUE(flat.zero_variance);
  EXPECT_EQ(code_of([] { pearson({1}, {2}); }), Errc::TooFewSamples);
}

Dataset labelled(const std::map<int, std::size_t>& counts) {
  Dataset d;
  d.spec = {trace::FeatureVariant::WithoutPayload, {}};
  double v = 0.0;
  for (const auto& [c, n] : counts) {
    for (std::size_t i = 0; i < n; ++i) {
      d.vectors.push_back(std::vector<double>(14, v++));
      d.labels.push_back(c);
    }
  }
  return d;
}

TEST(Balance, DownsamplesToMinority) {
  Rng rng(8);
  const auto two = balance_classes(labelled({{1, 100}, {2, 20}}), rng);
  EXPECT_EQ(class_counts(two), (std::map<int, std::size_t>{{1, 20}, {2, 20}}));
  const auto three = balance_classes(labelled({{1, 50}, {2, 30}, {3, 10}}), rng);
  EXPECT_EQ(class_counts(three), (std::map<int, std::size_t>{{1, 10}, {2, 10}, {3, 10}}));
  EXPECT_EQ(code_of([&] { balance_classes(labelled({{1, 5}}), rng); }), Errc::SingleClass);
}

TEST(Balance, KeepsOriginalOrder) {
  Rng rng(9);
  const auto b = balance_classes(labelled({{1, 40}, {2, 10}}), rng);
  for (std::size_t i = 1; i < b.size(); ++i) EXPECT_LT(b.vectors[i - 1][0], b.vectors[i][0]);
}

TEST(Split, StratifiedAndDisjoint) {
  Rng rng(10);
  const auto [train, val] = stratified_split(labelled({{1, 30}, {2, 30}}), 0.9, rng);
  EXPECT_EQ(class_counts(val), (std::map<int, std::size_t>{{1, 3}, {2, 3}}));
  EXPECT_EQ(train.size(), 54u);
  std::set<double> seen;
  for (const auto& v : train.vectors) seen.insert(v[0]);
  for (const auto& v : val.vectors) EXPECT_FALSE(seen.contains(v[0]));
}

TEST(Normalization, MetadataOnly) {
  Dataset d;
  d.spec = {trace::FeatureVariant::AllRaw, {}};
  for (int i = 0; i < 4; ++i) {
    std::vector<double> v(270, 0.5);
    v[0] = i;
    v[1] = 7.0;
    d.vectors.push_back(v);
    d.labels.push_back(i % 2);
  }
  const auto n = fit_normalization(d);
  EXPECT_NEAR(n.mean[0], 1.5, 1e-12);
  EXPECT_NEAR(n.stddev[0], std::sqrt(1.25), 1e-12);
  EXPECT_EQ(n.stddev[1], 1.0);
  EXPECT_EQ(n.mean[14], 0.0);
  EXPECT_EQ(n.stddev[14], 1.0);
  const auto z = normalized(d, n);
  EXPECT_EQ(z.vectors[0][14], 0.5);
  EXPECT_EQ(code_of([&] { normalized(z, n); }), Errc::ShapeMismatch);
}

TEST(Cnn, SoftmaxRowsSumToOne) {
  Rng rng(11);
  CnnArch a;
  a.input_length = 20;
  a.conv1 = 4;
  a.conv2 = 6;
  a.outputs = 3;
  auto net = init_cnn(a, rng);
  std::vector<double> x(5 * 20);
  for (auto& v : x) v = rng.normal();
  CnnCache cache;
  const auto& p = cnn_forward(net, x, 5, Mode::Infer, cache);
  ASSERT_EQ(p.size(), 15u);
  for (std::size_t b = 0; b < 5; ++b) {
    double s = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_GE(p[b * 3 + k], 0.0);
      s += p[b * 3 + k];
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Cnn, SigmoidInUnitInterval) {
  Rng rng(12);
  CnnArch a;
  a.input_length = 270;
  a.conv1 = 4;
  a.conv2 = 6;
  auto net = init_cnn(a, rng);
  std::vector<double> x(3 * 270);
  for (auto& v : x) v = 5.0 * rng.normal();
  CnnCache cache;
  const auto& p = cnn_forward(net, x, 3, Mode::Infer, cache);
  ASSERT_EQ(p.size(), 3u);
  for (double v : p) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_EQ(code_of([&] { cnn_forward(net, std::vector<double>(10), 1, Mode::Infer, cache); }), Errc::ShapeMismatch);
}

TEST(Cnn, GradientsMatchFiniteDifferences) {
  for (std::size_t outputs : {1u, 4u}) {
    const auto probe = make_gradient_probe(outputs, 13);
    const auto checks = check_gradients(probe.net, probe.x, probe.batch, probe.target);
    EXPECT_EQ(checks.size(), 8u);
    for (const auto& c : checks) EXPECT_LE(c.relative_error, 1e-4) << c.group << " outputs=" << outputs;
  }
}

// Sixteen separable samples; label is the sign of the first column.
Dataset tiny(std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.spec = {trace::FeatureVariant::WithoutPayload, {}};
  for (int i = 0; i < 16; ++i) {
    std::vector<double> v(14);
    for (auto& x : v) x = rng.normal();
    v[0] = (i % 2 ? 1.0 : -1.0) * (1.0 + rng.uniform());
    d.vectors.push_back(v);
    d.labels.push_back(i % 2 ? 2 : 1);
  }
  return d;
}

TrainHyper small_hyper() {
  TrainHyper h;
  h.conv1 = 8;
  h.conv2 = 8;
  h.batch_size = 8;
  h.max_epochs = 200;
  h.patience = 200;
  h.adam.learning_rate = 1e-2;
  return h;
}

TEST(Train, OverfitsSixteenSamples) {
  const auto d = tiny(14);
  const auto [model, report] = cnn_train(d, d, small_hyper(), 14);
  EXPECT_LE(report.epochs.size(), 200u);
  EXPECT_EQ(report.final_validation_accuracy, 1.0);
  EXPECT_EQ(cnn_predict(model, d), d.labels);
}

TEST(Train, SameSeedSameModel) {
  const auto d = tiny(15);
  auto h = small_hyper();
  h.max_epochs = 5;
  const auto a = cnn_train(d, d, h, 3).first;
  const auto b = cnn_train(d, d, h, 3).first;
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Train, CheckpointRoundTrip) {
  const auto d = tiny(16);
  auto h = small_hyper();
  h.max_epochs = 20;
  const auto [model, report] = cnn_train(d, d, h, 4);
  const auto loaded = model_from_json(nlohmann::json::parse(to_json(model).dump()));
  EXPECT_EQ(cnn_predict(loaded, d), cnn_predict(model, d));
  EXPECT_DOUBLE_EQ(cnn_evaluate(loaded, d).final_validation_accuracy, report.final_validation_accuracy);
  EXPECT_EQ(code_of([] { model_from_json(nlohmann::json{{"format", "other"}}); }), Errc::BadCheckpoint);
}

TEST(Train, NormalizationFitOnTrainOnly) {
  const auto train = tiny(17);
  auto val = tiny(18);
  for (auto& v : val.vectors) v[3] += 100.0;
  auto h = small_hyper();
  h.max_epochs = 1;
  const auto model = cnn_train(train, val, h, 5).first;
  const auto expected = fit_normalization(train);
  EXPECT_EQ(model.normalization.mean, expected.mean);
  EXPECT_EQ(model.normalization.stddev, expected.stddev);
}

TEST(Train, InputValidation) {
  const auto d = tiny(19);
  auto h = small_hyper();
  h.max_epochs = 1;
  EXPECT_EQ(code_of([&] { cnn_train(d, Dataset{}, h, 1); }), Errc::EmptySplit);
  auto one = d;
  for (auto& l : one.labels) l = 1;
  EXPECT_EQ(code_of([&] { cnn_train(one, d, h, 1); }), Errc::SingleClass);
}

TEST(Train, BalancedSplitIsBalancedAndDisjoint) {
  std::vector<int> labels;
  for (int i = 0; i < 300; ++i) labels.push_back(i < 200 ? 1 : 2);
  const auto s = balanced_split(labels, 0.9, 7);
  std::map<int, std::size_t> counts;
  std::set<std::size_t> all;
  for (auto i : s.train) ++counts[labels[i]], all.insert(i);
  for (auto i : s.val) ++counts[labels[i]], all.insert(i);
  EXPECT_EQ(counts[1], 100u);
  EXPECT_EQ(counts[2], 100u);
  EXPECT_EQ(all.size(), s.train.size() + s.val.size());
  EXPECT_EQ(s.val.size(), 20u);
}

}  // namespace
}  // namespace mixsim::learn
