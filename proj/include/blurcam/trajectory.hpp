#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "blurcam/error.hpp"
#include "blurcam/geometry.hpp"

namespace blurcam {

enum class TrajectoryLabel { DenseGroundTruth, SparsePerFrame, Densified };

inline const char* to_string(TrajectoryLabel l) {
  switch (l) {
    case TrajectoryLabel::DenseGroundTruth: return "DenseGroundTruth";
    case TrajectoryLabel::SparsePerFrame: return "SparsePerFrame";
    case TrajectoryLabel::Densified: return "Densified";
  }
  return "?";
}

inline TrajectoryLabel trajectory_label_from_string(const std::string& s) {
  if (s == "DenseGroundTruth") return TrajectoryLabel::DenseGroundTruth;
  if (s == "SparsePerFrame") return TrajectoryLabel::SparsePerFrame;
  if (s == "Densified") return TrajectoryLabel::Densified;
  throw FormatError("unknown trajectory label '" + s + "'");
}

// Uniformly sampled rotation sequence. Construction validates the invariants,
// so every Trajectory value in the program is well formed.
class Trajectory {
 public:
  static constexpr double kSpacingTolerance = 1e-6;  // ms

  Trajectory(std::vector<RotationSample> samples, TrajectoryLabel label)
      : samples_(std::move(samples)), label_(label) {
    if (samples_.size() < 2) throw DataError("trajectory needs at least 2 samples");
    for (const auto& s : samples_) validate_rotation(s);
    const double first = samples_[1].t - samples_[0].t;
    if (!(first > 0.0)) throw DataError("trajectory timestamps must be strictly increasing");
    for (std::size_t i = 1; i < samples_.size(); ++i) {
      const double dt = samples_[i].t - samples_[i - 1].t;
      if (!(dt > 0.0)) throw DataError("trajectory timestamps must be strictly increasing");
      if (std::abs(dt - first) > kSpacingTolerance)
        throw DataError("trajectory sampling is not uniform at sample " + std::to_string(i));
    }
    // Mean spacing is robust to per-sample rounding of the timestamps.
    interval_ = (samples_.back().t - samples_.front().t) / static_cast<double>(samples_.size() - 1);
  }

  const std::vector<RotationSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  const RotationSample& operator[](std::size_t i) const { return samples_[i]; }
  double start() const { return samples_.front().t; }
  double end() const { return samples_.back().t; }
  double sampling_interval() const { return interval_; }
  TrajectoryLabel label() const { return label_; }

  bool covers(double t0, double t1) const { return t0 >= start() && t1 <= end(); }

  // Per-angle linear interpolation; exact at sample timestamps.
  RotationSample sample_at(double t) const {
    if (!(t >= start() && t <= end())) {
      std::ostringstream os;
      os << "time " << t << " ms outside trajectory range [" << start() << ", " << end() << "] ms";
      throw RangeError(os.str());
    }
    auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                               [](double v, const RotationSample& s) { return v < s.t; });
    if (it == samples_.begin()) return samples_.front();
    const RotationSample& a = *(it - 1);
    if (a.t == t || it == samples_.end()) {
      RotationSample r = (it == samples_.end()) ? samples_.back() : a;
      r.t = t;
      return r;
    }
    const RotationSample& b = *it;
    const double w = (t - a.t) / (b.t - a.t);
    return {t, a.alpha + w * (b.alpha - a.alpha), a.beta + w * (b.beta - a.beta),
            a.gamma + w * (b.gamma - a.gamma)};
  }

 private:
  std::vector<RotationSample> samples_;
  TrajectoryLabel label_;
  double interval_ = 0.0;
};

// Subtracts the rotation at t0 from every sample and shifts time so t0 -> 0.
inline Trajectory rebase(const Trajectory& traj, double t0) {
  const RotationSample ref = traj.sample_at(t0);
  std::vector<RotationSample> out;
  out.reserve(traj.size());
  for (const auto& s : traj.samples()) {
    RotationSample r = angles_minus(s, ref);
    r.t = s.t - t0;
    out.push_back(r);
  }
  return Trajectory(std::move(out), traj.label());
}

// Rotations at arbitrary timestamps (must be uniform, per the Trajectory invariant).
inline Trajectory resample(const Trajectory& traj, std::span<const double> times, TrajectoryLabel label) {
  std::vector<RotationSample> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(traj.sample_at(t));
  return Trajectory(std::move(out), label);
}

// Contiguous block of samples bracketing [t0, t1] (one extra sample on each
// side when available), so sample_at works over the whole interval.
inline Trajectory segment(const Trajectory& traj, double t0, double t1) {
  if (!traj.covers(t0, t1)) throw RangeError("segment outside trajectory range");
  const auto& s = traj.samples();
  auto lo = std::upper_bound(s.begin(), s.end(), t0, [](double v, const RotationSample& r) { return v < r.t; });
  auto hi = std::lower_bound(s.begin(), s.end(), t1, [](const RotationSample& r, double v) { return r.t < v; });
  if (lo != s.begin()) --lo;
  if (hi != s.end()) ++hi;
  std::vector<RotationSample> out(lo, hi);
  if (out.size() < 2) out.assign(s.begin(), s.begin() + 2);
  return Trajectory(std::move(out), traj.label());
}

// Piecewise-linear upsampling: samples_per_frame uniformly spaced samples in
// every inter-frame interval, endpoints preserved.
inline Trajectory densify_linear(const Trajectory& sparse, int samples_per_frame) {
  if (samples_per_frame < 1) throw ArgumentError("samples_per_frame must be >= 1");
  const auto& s = sparse.samples();
  std::vector<RotationSample> out;
  out.reserve((s.size() - 1) * samples_per_frame + 1);
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    const RotationSample& a = s[k];
    const RotationSample& b = s[k + 1];
    for (int j = 0; j < samples_per_frame; ++j) {
      const double w = static_cast<double>(j) / samples_per_frame;
      out.push_back({a.t + w * (b.t - a.t), a.alpha + w * (b.alpha - a.alpha),
                     a.beta + w * (b.beta - a.beta), a.gamma + w * (b.gamma - a.gamma)});
    }
  }
  out.push_back(s.back());
  return Trajectory(std::move(out), TrajectoryLabel::Densified);
}

// Resamples gt at pred's timestamps and rebases both to their first sample
// (constant-offset alignment).
inline std::pair<Trajectory, Trajectory> align(const Trajectory& pred, const Trajectory& gt) {
  if (pred.end() < gt.start() || pred.start() > gt.end())
    throw RangeError("align: trajectories do not overlap in time");
  if (pred.start() < gt.start() || pred.end() > gt.end())
    throw RangeError("align: prediction extends outside the ground-truth time range");
  std::vector<double> times;
  times.reserve(pred.size());
  for (const auto& s : pred.samples()) times.push_back(s.t);
  const Trajectory gt_at = resample(gt, times, gt.label());
  const double t0 = pred.start();
  return {rebase(pred, t0), rebase(gt_at, t0)};
}

// ---- CSV ------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw FormatError(context + ": cannot parse number '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline constexpr const char* kTrajectoryCsvHeader = "t_ms,alpha_rad,beta_rad,gamma_rad";

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << kTrajectoryCsvHeader << '\n';
  for (const auto& s : traj.samples()) {
    os << format_double(s.t) << ',' << format_double(s.alpha) << ',' << format_double(s.beta) << ','
       << format_double(s.gamma) << '\n';
  }
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  write_trajectory_csv(os, traj);
}

inline Trajectory read_trajectory_csv(std::istream& is, TrajectoryLabel label, const std::string& name = "trajectory") {
  std::string line;
  if (!std::getline(is, line)) throw FormatError(name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrajectoryCsvHeader)
    throw FormatError(name + ": expected header '" + std::string(kTrajectoryCsvHeader) + "'");
  std::vector<RotationSample> samples;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string ctx = name + ":" + std::to_string(lineno);
    if (fields.size() != 4) throw FormatError(ctx + ": expected 4 columns");
    samples.push_back({parse_double(fields[0], ctx), parse_double(fields[1], ctx), parse_double(fields[2], ctx),
                       parse_double(fields[3], ctx)});
  }
  return Trajectory(std::move(samples), label);
}

inline Trajectory read_trajectory_csv(const std::string& path, TrajectoryLabel label) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open trajectory '" + path + "'");
  return read_trajectory_csv(is, label, path);
}

}  // namespace blurcam
