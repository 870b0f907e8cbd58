#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "blurcam/metrics.hpp"

using namespace blurcam;

namespace {

Trajectory make(const std::vector<RotationSample>& s, TrajectoryLabel l = TrajectoryLabel::SparsePerFrame) {
  return Trajectory(s, l);
}

std::vector<RotationSample> wave(int n, double dt, double phase = 0.0) {
  std::vector<RotationSample> s;
  for (int i = 0; i < n; ++i) {
    const double t = i * dt;
    s.push_back({t, 2e-3 * std::sin(0.004 * t + phase) + 3e-3, -1.5e-3 * std::cos(0.003 * t + phase) - 2e-3,
                 1e-3 * std::sin(0.005 * t + 1.0 + phase) + 2e-3});
  }
  return s;
}

std::vector<RotationSample> scaled(std::vector<RotationSample> s, double k) {
  for (auto& r : s) r.alpha *= k, r.beta *= k, r.gamma *= k;
  return s;
}

}  // namespace

TEST(AxisRelError, RegularAndGuarded) {
  const MetricsConfig cfg;
  EXPECT_DOUBLE_EQ(detail::axis_rel_error(1.1e-3, 1e-3, cfg), 0.1);
  EXPECT_EQ(detail::axis_rel_error(0.0, 0.0, cfg), 0.0);
  EXPECT_DOUBLE_EQ(detail::axis_rel_error(5e-7, 0.0, cfg), 0.5);
  EXPECT_EQ(detail::axis_rel_error(1.0, 0.0, cfg), 10.0);
}

TEST(Metrics, PerfectPrediction) {
  const auto g = make(wave(20, 62.072), TrajectoryLabel::DenseGroundTruth);
  EXPECT_EQ(abs_rel(g, g), 0.0);
  EXPECT_EQ(accuracy(g, g, 0.10), 1.0);
  EXPECT_EQ(accuracy(g, g, 0.25), 1.0);
  EXPECT_EQ(l1_mean(g, g), 0.0);
}

TEST(Metrics, UniformTenPercentError) {
  const auto gs = wave(20, 62.072);
  const auto g = make(gs);
  const auto p = make(scaled(gs, 1.1));
  EXPECT_NEAR(abs_rel(p, g), 0.1, 1e-12);
  // e(0.10) is a strict inequality: a 10% error sits on the boundary.
  EXPECT_EQ(accuracy(p, g, 0.25), 1.0);
  EXPECT_EQ(accuracy(p, g, 0.11), 1.0);
  EXPECT_EQ(accuracy(p, g, 0.09), 0.0);
}

TEST(Metrics, HalfTheSamplesAtFiftyPercent) {
  const auto gs = wave(20, 62.072);
  auto ps = gs;
  for (std::size_t i = 0; i < ps.size(); i += 2) ps[i] = scaled({ps[i]}, 1.5)[0];
  const auto g = make(gs), p = make(ps);
  EXPECT_NEAR(abs_rel(p, g), 0.25, 1e-12);
  EXPECT_EQ(accuracy(p, g, 0.25), 0.5);
  EXPECT_EQ(accuracy(p, g, 0.10), 0.5);
  EXPECT_EQ(accuracy(p, g, 0.51), 1.0);
}

TEST(Metrics, AccuracyIsMonotoneInThreshold) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> noise(0.0, 3e-4);
  const auto gs = wave(200, 10.0);
  auto ps = gs;
  for (auto& r : ps) r.alpha += noise(gen), r.beta += noise(gen), r.gamma += noise(gen);
  const auto g = make(gs), p = make(ps);
  double prev = 0.0;
  for (double tau = 0.0; tau <= 2.0; tau += 0.01) {
    const double a = accuracy(p, g, tau);
    EXPECT_GE(a, prev);
    prev = a;
  }
}

TEST(Metrics, SignFlipInvariance) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> noise(0.0, 3e-4);
  const auto gs = wave(100, 10.0);
  auto ps = gs;
  for (auto& r : ps) r.alpha += noise(gen), r.beta += noise(gen), r.gamma += noise(gen);
  const auto g = make(gs), p = make(ps);
  const auto gn = make(scaled(gs, -1.0)), pn = make(scaled(ps, -1.0));
  EXPECT_EQ(abs_rel(p, g), abs_rel(pn, gn));
  EXPECT_EQ(accuracy(p, g, 0.25), accuracy(pn, gn, 0.25));
}

TEST(Metrics, NearZeroGroundTruthIsCapped) {
  const auto g = make({{0, 0, 0, 0}, {60, 0, 0, 0}});
  const auto p = make({{0, 0, 0, 0}, {60, 1.0, 1.0, 1.0}});
  const auto e = per_sample_rel_error(p, g);
  EXPECT_EQ(e[0], 0.0);
  EXPECT_EQ(e[1], 10.0);
}

TEST(Metrics, MismatchedInputs) {
  const auto g = make(wave(10, 62.072));
  const auto p = make(wave(9, 62.072));
  EXPECT_THROW(abs_rel(p, g), ArgumentError);
  const auto shifted = make({{1, 0, 0, 0}, {63.072, 0, 0, 0}});
  const auto g2 = make({{0, 0, 0, 0}, {62.072, 0, 0, 0}});
  EXPECT_THROW(abs_rel(shifted, g2), ArgumentError);
}

TEST(Evaluate, ResamplesGroundTruthAtPredictionTimes) {
  std::vector<RotationSample> dense;
  for (int i = 0; i <= 1000; ++i) {
    const double t = 2.0 * i;
    dense.push_back({t, 1e-6 * t, -2e-6 * t, 5e-7 * t});
  }
  const auto gt = make(dense, TrajectoryLabel::DenseGroundTruth);
  std::vector<RotationSample> sparse;
  for (int k = 0; k < 20; ++k) {
    const double t = 100.0 + 62.072 * k;
    sparse.push_back({t, 1.1e-6 * (t - 100.0), -2.2e-6 * (t - 100.0), 5.5e-7 * (t - 100.0)});
  }
  const auto rep = evaluate(make(sparse), gt);
  EXPECT_EQ(rep.samples, 20u);
  EXPECT_EQ(rep.per_frame[0], 0.0);
  for (std::size_t k = 1; k < rep.per_frame.size(); ++k) EXPECT_NEAR(rep.per_frame[k], 0.1, 1e-9);
  EXPECT_NEAR(rep.abs_rel, 0.1 * 19.0 / 20.0, 1e-9);
  EXPECT_EQ(rep.accuracy_at(0.25), 1.0);
  EXPECT_EQ(rep.pred_label, "SparsePerFrame");
  EXPECT_EQ(rep.gt_label, "DenseGroundTruth");
  EXPECT_THROW(rep.accuracy_at(0.5), ArgumentError);
}

TEST(Evaluate, DensifiedEvaluationOfASparseEstimate) {
  // Linear interpolation of a per-frame estimate misses the motion between
  // frames, so the densified comparison scores worse than the sparse one.
  std::vector<RotationSample> dense;
  for (int i = 0; i <= 2000; ++i) {
    const double t = 1.0 * i;
    dense.push_back({t, 2e-3 * std::sin(0.02 * t) + 1e-5 * t, 1.5e-3 * std::cos(0.017 * t), 1e-3 * std::sin(0.025 * t + 1.0)});
  }
  const auto gt = make(dense, TrajectoryLabel::DenseGroundTruth);
  std::vector<double> times;
  for (int k = 0; k < 25; ++k) times.push_back(50.0 + 62.072 * k);
  const auto sparse = resample(gt, times, TrajectoryLabel::SparsePerFrame);
  const auto sparse_rep = evaluate(sparse, gt);
  const auto dense_rep = evaluate(densify_linear(sparse, 30), gt);
  EXPECT_LT(sparse_rep.abs_rel, 1e-12);
  EXPECT_GT(dense_rep.abs_rel, sparse_rep.abs_rel + 0.05);
  EXPECT_EQ(dense_rep.pred_label, "Densified");
}

TEST(Evaluate, ThresholdsAreConfigurable) {
  const auto gs = wave(20, 62.072);
  MetricsConfig cfg;
  cfg.thresholds = {0.5, 0.05, 0.2};
  const auto rep = evaluate(make(scaled(gs, 1.1)), make(gs), cfg);
  ASSERT_EQ(rep.e.size(), 3u);
  EXPECT_EQ(rep.e[0].first, 0.05);
  EXPECT_EQ(rep.e[2].first, 0.5);
}

TEST(EvalReportJson, RoundTripIsExact) {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> noise(0.0, 4e-4);
  const auto gs = wave(40, 62.072);
  auto ps = gs;
  for (auto& r : ps) r.alpha += noise(gen), r.beta += noise(gen), r.gamma += noise(gen);
  const auto rep = evaluate(make(ps), make(gs, TrajectoryLabel::DenseGroundTruth));
  const auto j = to_json(rep);
  const auto back = eval_report_from_json(nlohmann::ordered_json::parse(j.dump()));
  EXPECT_EQ(back.abs_rel, rep.abs_rel);
  EXPECT_EQ(back.l1_mean, rep.l1_mean);
  EXPECT_EQ(back.per_frame, rep.per_frame);
  EXPECT_EQ(back.e, rep.e);
  EXPECT_EQ(back.samples, rep.samples);
  EXPECT_EQ(to_json(back).dump(), j.dump());
}

TEST(EvalReportJson, KeyOrderAndSchema) {
  const auto gs = wave(5, 62.072);
  const auto j = to_json(evaluate(make(gs), make(gs)));
  std::vector<std::string> keys;
  for (const auto& it : j.items()) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"schema", "abs_rel", "e", "l1_mean", "samples", "per_frame", "config"}));
  EXPECT_EQ(j["schema"], "blurcam-eval-1");
  EXPECT_TRUE(j["e"].contains("0.1"));
  EXPECT_TRUE(j["e"].contains("0.25"));
}

TEST(EvalReportJson, RejectsOtherSchemas) {
  auto j = to_json(evaluate(make(wave(5, 62.072)), make(wave(5, 62.072))));
  j["schema"] = "other";
  EXPECT_THROW(eval_report_from_json(j), FormatError);
  j = nlohmann::ordered_json::object();
  EXPECT_THROW(eval_report_from_json(j), FormatError);
}
