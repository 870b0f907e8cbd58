#pragma once

// Trajectory evaluation: AbsRel, threshold accuracy and L1 over aligned
// samples, plus the versioned JSON report.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "blurcam/error.hpp"
#include "blurcam/trajectory.hpp"

namespace blurcam {

inline constexpr const char* kEvalSchema = "blurcam-eval-1";

struct MetricsConfig {
  double epsilon = 1e-6;  // rad; floor on |gt| in the relative error
  double cap = 10.0;      // upper bound on a near-zero-gt relative error
  std::vector<double> thresholds{0.10, 0.25};
};

namespace detail {

inline void check_comparable(const Trajectory& pred, const Trajectory& gt) {
  if (pred.size() != gt.size()) throw ArgumentError("metrics: trajectories have different sample counts");
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (std::abs(pred[i].t - gt[i].t) > Trajectory::kSpacingTolerance)
      throw ArgumentError("metrics: trajectories are not sampled on identical timestamps");
}

inline double axis_rel_error(double p, double g, const MetricsConfig& cfg) {
  const double err = std::abs(p - g);
  const double mag = std::abs(g);
  if (mag < cfg.epsilon) return std::min(err / cfg.epsilon, cfg.cap);
  return err / mag;
}

}  // namespace detail

// Relative error of each sample, averaged over the three axes.
inline std::vector<double> per_sample_rel_error(const Trajectory& pred, const Trajectory& gt,
                                                const MetricsConfig& cfg = {}) {
  detail::check_comparable(pred, gt);
  std::vector<double> out;
  out.reserve(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = detail::axis_rel_error(pred[i].alpha, gt[i].alpha, cfg) +
                     detail::axis_rel_error(pred[i].beta, gt[i].beta, cfg) +
                     detail::axis_rel_error(pred[i].gamma, gt[i].gamma, cfg);
    out.push_back(e / 3.0);
  }
  return out;
}

inline double abs_rel(const Trajectory& pred, const Trajectory& gt, const MetricsConfig& cfg = {}) {
  const auto e = per_sample_rel_error(pred, gt, cfg);
  double sum = 0.0;
  for (double v : e) sum += v;
  return sum / static_cast<double>(e.size());
}

inline double accuracy(const Trajectory& pred, const Trajectory& gt, double tau, const MetricsConfig& cfg = {}) {
  const auto e = per_sample_rel_error(pred, gt, cfg);
  const auto hits = std::count_if(e.begin(), e.end(), [tau](double v) { return v < tau; });
  return static_cast<double>(hits) / static_cast<double>(e.size());
}

inline double l1_mean(const Trajectory& pred, const Trajectory& gt) {
  detail::check_comparable(pred, gt);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    sum += std::abs(pred[i].alpha - gt[i].alpha) + std::abs(pred[i].beta - gt[i].beta) +
           std::abs(pred[i].gamma - gt[i].gamma);
  return sum / (3.0 * static_cast<double>(pred.size()));
}

struct EvalReport {
  double abs_rel = 0.0;
  std::vector<std::pair<double, double>> e;  // (threshold, fraction), ascending threshold
  double l1_mean = 0.0;
  std::vector<double> per_frame;
  std::size_t samples = 0;
  std::string pred_label;
  std::string gt_label;
  MetricsConfig config;

  double accuracy_at(double tau) const {
    for (const auto& [t, v] : e)
      if (t == tau) return v;
    throw ArgumentError("report has no accuracy for the requested threshold");
  }
};

// Resamples gt to pred's timestamps, aligns both, and computes every metric.
inline EvalReport evaluate(const Trajectory& pred, const Trajectory& gt, const MetricsConfig& cfg = {}) {
  auto [p, g] = align(pred, gt);
  EvalReport r;
  r.config = cfg;
  std::sort(r.config.thresholds.begin(), r.config.thresholds.end());
  r.per_frame = per_sample_rel_error(p, g, cfg);
  double sum = 0.0;
  for (double v : r.per_frame) sum += v;
  r.abs_rel = sum / static_cast<double>(r.per_frame.size());
  for (double tau : r.config.thresholds) {
    const auto hits = std::count_if(r.per_frame.begin(), r.per_frame.end(), [tau](double v) { return v < tau; });
    r.e.emplace_back(tau, static_cast<double>(hits) / static_cast<double>(r.per_frame.size()));
  }
  r.l1_mean = l1_mean(p, g);
  r.samples = p.size();
  r.pred_label = to_string(pred.label());
  r.gt_label = to_string(gt.label());
  return r;
}

// Fixed key order; accuracy keys are the thresholds printed shortest-round-trip.
inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = kEvalSchema;
  j["abs_rel"] = r.abs_rel;
  nlohmann::ordered_json e = nlohmann::ordered_json::object();
  for (const auto& [t, v] : r.e) e[format_double(t)] = v;
  j["e"] = e;
  j["l1_mean"] = r.l1_mean;
  j["samples"] = r.samples;
  j["per_frame"] = r.per_frame;
  nlohmann::ordered_json c;
  c["epsilon"] = r.config.epsilon;
  c["cap"] = r.config.cap;
  c["thresholds"] = r.config.thresholds;
  c["pred_label"] = r.pred_label;
  c["gt_label"] = r.gt_label;
  j["config"] = c;
  return j;
}

inline EvalReport eval_report_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("schema").get<std::string>() != kEvalSchema) throw FormatError("unsupported eval report schema");
    EvalReport r;
    r.abs_rel = j.at("abs_rel").get<double>();
    r.l1_mean = j.at("l1_mean").get<double>();
    r.samples = j.at("samples").get<std::size_t>();
    r.per_frame = j.at("per_frame").get<std::vector<double>>();
    const auto& c = j.at("config");
    r.config.epsilon = c.at("epsilon").get<double>();
    r.config.cap = c.at("cap").get<double>();
    r.config.thresholds = c.at("thresholds").get<std::vector<double>>();
    r.pred_label = c.at("pred_label").get<std::string>();
    r.gt_label = c.at("gt_label").get<std::string>();
    for (double t : r.config.thresholds) r.e.emplace_back(t, j.at("e").at(format_double(t)).get<double>());
    return r;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed eval report: ") + ex.what());
  }
}

}  // namespace blurcam
