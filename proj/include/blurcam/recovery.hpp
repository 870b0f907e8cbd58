#pragma once

// Optics-based recovery of the per-frame camera rotation from a delta field
// and the frame-1 depth map.
//
// Each frame is solved roll first, then yaw, then pitch:
//   roll  - slope of the mean-removed p_y along the y = 0 grid line;
//   yaw   - p_x along the x = 0 line, roll removed, inverted through the
//           off-axis delta relation;
//   pitch - p_y of every point, roll removed, inverted with the yaw term kept
//           in the (l_off - y tan theta) denominator, then averaged with
//           weights tapered linearly with field radius.
// The inversions are linear in the tilt tangents, so every stage is closed
// form. Yaw and pitch share one rotation plane, so the three stages are
// repeated with the previous pass's tilt until the estimates stop moving;
// the first pass is the plain sequential estimate.
//
// Per-point work is expressed as Eigen array expressions over all points.

#include <Eigen/Core>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "blurcam/error.hpp"
#include "blurcam/geometry.hpp"
#include "blurcam/parallel.hpp"
#include "blurcam/tracker.hpp"
#include "blurcam/trajectory.hpp"

namespace blurcam {

struct RecoveryConfig {
  double min_confidence = 0.0;
  bool taper = true;      // linear taper with field extent; false gives uniform weights
  int max_passes = 64;
  double tolerance = 1e-15;  // rad, pass-to-pass change that ends the iteration
  unsigned threads = 1;

  void validate() const {
    if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) throw ArgumentError("min_confidence must be in [0, 1]");
    if (max_passes < 1) throw ArgumentError("max_passes must be >= 1");
  }
};

// Current tilt estimate fed back into the stages. Unknown on the first pass.
struct TiltPrior {
  double alpha = 0.0;
  double beta = 0.0;
  bool known = false;
};

struct FrameAngles {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

// Per-point constants shared by every frame.
struct RecoveryGeometry {
  CameraModel cam;
  double l_on = 0.0;    // mm
  double f = 0.0;       // mm
  double pitch = 0.0;   // mm per px
  Eigen::ArrayXd x, y;  // px from the principal point
  Eigen::ArrayXd l_off; // mm, depth at each query point
  Eigen::ArrayXd kappa; // mm of object height per px of field offset at l_off
  Eigen::ArrayXd taper;
  Eigen::ArrayXd roll_line;  // 1 on the y = 0 grid line
  Eigen::ArrayXd yaw_line;   // 1 on the x = 0 grid line

  RecoveryGeometry(const QueryGrid& grid, const DepthMap& depth, const CameraModel& camera) : cam(camera) {
    cam.validate();
    const DepthMap filled = depth.filled();
    l_on = on_axis_depth(filled, cam);
    f = cam.focal_length_mm;
    pitch = cam.pitch_mm();
    const Eigen::Index n = static_cast<Eigen::Index>(grid.size());
    x.resize(n);
    y.resize(n);
    l_off.resize(n);
    roll_line.resize(n);
    yaw_line.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i) = grid.x(i);
      y(i) = grid.y(i);
      // Depth under the frame-1 query position.
      l_off(i) = filled.sample(grid.points[i].x, grid.points[i].y);
      roll_line(i) = grid.row(i) == 0 ? 1.0 : 0.0;
      yaw_line(i) = grid.col(i) == 0 ? 1.0 : 0.0;
    }
    kappa = pitch * l_off / f;
    const Eigen::ArrayXd radius = (x.square() + y.square()).sqrt();
    const double r_max = radius.maxCoeff();
    if (r_max > 0.0) taper = (1.0 - radius / r_max).max(0.0);
    else taper = Eigen::ArrayXd::Ones(n);
  }

  Eigen::Index size() const { return x.size(); }
};

namespace detail {

inline Eigen::ArrayXd usable_weights(std::span<const double> conf, const RecoveryConfig& cfg) {
  Eigen::ArrayXd w(static_cast<Eigen::Index>(conf.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double c = conf[static_cast<std::size_t>(i)];
    w(i) = (c >= cfg.min_confidence && c > 0.0) ? c : 0.0;
  }
  return w;
}

// Confidence times taper over the selected points. When the taper zeroes
// every usable point (only outermost points left) the weights fall back to
// confidence alone.
inline Eigen::ArrayXd stage_weights(const Eigen::ArrayXd& conf_w, const Eigen::ArrayXd& mask,
                                    const RecoveryGeometry& g, const RecoveryConfig& cfg) {
  const Eigen::ArrayXd base = conf_w * mask;
  if (!cfg.taper) return base;
  const Eigen::ArrayXd tapered = base * g.taper;
  return tapered.sum() > 0.0 ? tapered : base;
}

inline void split_deltas(std::span<const Vec2> d, Eigen::ArrayXd& px, Eigen::ArrayXd& py) {
  px.resize(static_cast<Eigen::Index>(d.size()));
  py.resize(static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) {
    px(static_cast<Eigen::Index>(i)) = d[i].x;
    py(static_cast<Eigen::Index>(i)) = d[i].y;
  }
}

// Tangent-vector form of a tilt: tau = tan(theta) * (beta, alpha) / theta.
inline Vec2 tilt_tangents(double alpha, double beta) {
  const double theta = std::hypot(alpha, beta);
  if (theta == 0.0) return {0.0, 0.0};
  const double k = std::tan(theta) / theta;
  return {k * beta, k * alpha};
}

inline FrameAngles angles_from_tangents(double tau_x, double tau_y) {
  const double t = std::hypot(tau_x, tau_y);
  if (t == 0.0) return {};
  const double k = std::atan(t) / t;
  return {k * tau_y, k * tau_x, 0.0};
}

// Object-height numerator of the off-axis delta, for displacement direction d.
inline Eigen::ArrayXd height_term(const RecoveryGeometry& g, Vec2 d) {
  const Eigen::ArrayXd h = (g.x * d.x + g.y * d.y) * g.kappa;
  return (g.l_on / g.l_off) * (g.f / (g.l_on + g.f)) * (g.l_off.square() + h.square());
}

inline double weighted_mean(const Eigen::ArrayXd& values, const Eigen::ArrayXd& w, const char* stage) {
  Eigen::ArrayXd wv = w;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (!(w(i) > 0.0) || !std::isfinite(values(i))) wv(i) = 0.0;
  const double sw = wv.sum();
  if (!(sw > 0.0)) throw InsufficientDataError(std::string(stage) + ": no usable points");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (wv(i) > 0.0) acc += wv(i) * values(i);
  return acc / sw;
}

}  // namespace detail

// Roll from the y = 0 line: the mean p_y is removed and the residuals are fit
// against x by confidence-weighted least squares; p_y = x sin(gamma) there.
inline double estimate_roll(std::span<const Vec2> deltas, std::span<const double> conf, const RecoveryGeometry& g,
                            const RecoveryConfig& cfg = {}, const TiltPrior& prior = {}) {
  Eigen::ArrayXd px, py;
  detail::split_deltas(deltas, px, py);
  if (prior.known) {
    // Remove the odd-in-x part of the tilt that the mean cannot absorb.
    const DeltaModel tilt({0.0, prior.alpha, prior.beta, 0.0}, g.l_on, g.cam);
    for (Eigen::Index i = 0; i < g.size(); ++i)
      if (g.roll_line(i) > 0.0) py(i) -= tilt(g.x(i), g.y(i), g.l_off(i)).y;
  }
  const Eigen::ArrayXd w = detail::usable_weights(conf, cfg) * g.roll_line;
  if ((w > 0.0).count() < 3) throw InsufficientDataError("roll: fewer than 3 usable points on the y = 0 line");
  const double sw = w.sum();
  const double x_bar = (w * g.x).sum() / sw;
  const double r_bar = (w * py).sum() / sw;
  const Eigen::ArrayXd dx = g.x - x_bar;
  const double sxx = (w * dx.square()).sum();
  if (!(sxx > 0.0)) throw InsufficientDataError("roll: usable points do not span x");
  const double slope = (w * dx * (py - r_bar)).sum() / sxx;
  return std::asin(std::clamp(slope, -1.0, 1.0));
}

// Yaw from p_x on the x = 0 line after removing the roll displacement.
inline double estimate_yaw(std::span<const Vec2> deltas, std::span<const double> conf, const RecoveryGeometry& g,
                           double roll, const RecoveryConfig& cfg = {}, const TiltPrior& prior = {}) {
  Eigen::ArrayXd px, py;
  detail::split_deltas(deltas, px, py);
  const Eigen::ArrayXd roll_x = g.x * std::cos(roll) - g.y * std::sin(roll) - g.x;
  const Eigen::ArrayXd p_mm = (px - roll_x) * g.pitch;
  Vec2 dir{1.0, 0.0};
  Vec2 tau_prior{0.0, 0.0};
  if (prior.known && (prior.alpha != 0.0 || prior.beta != 0.0)) {
    const double th = std::hypot(prior.alpha, prior.beta);
    dir = {prior.beta / th, prior.alpha / th};
    tau_prior = detail::tilt_tangents(prior.alpha, prior.beta);
  }
  const Eigen::ArrayXd a = detail::height_term(g, dir);
  // p_x (l_off - kappa (x tau_x + y tau_y)) = A tau_x, solved for tau_x.
  const Eigen::ArrayXd tau_x =
      p_mm * (g.l_off - g.kappa * g.y * tau_prior.y) / (a + g.kappa * g.x * p_mm);
  const Eigen::ArrayXd w =
      detail::stage_weights(detail::usable_weights(conf, cfg), g.yaw_line, g, cfg);
  const double tx = detail::weighted_mean(tau_x, w, "yaw");
  return detail::angles_from_tangents(tx, tau_prior.y).beta;
}

// Pitch from p_y of every point after removing roll, with the yaw estimate
// kept in the off-axis denominator. The rotation-plane direction is refined
// from the running pitch value.
inline double estimate_pitch(std::span<const Vec2> deltas, std::span<const double> conf, const RecoveryGeometry& g,
                             double roll, double yaw, const RecoveryConfig& cfg = {}, const TiltPrior& prior = {}) {
  Eigen::ArrayXd px, py;
  detail::split_deltas(deltas, px, py);
  const Eigen::ArrayXd roll_y = g.x * std::sin(roll) + g.y * std::cos(roll) - g.y;
  const Eigen::ArrayXd p_mm = (py - roll_y) * g.pitch;
  const Eigen::ArrayXd w =
      detail::stage_weights(detail::usable_weights(conf, cfg), Eigen::ArrayXd::Ones(g.size()), g, cfg);
  double alpha = prior.known ? prior.alpha : 0.0;
  for (int it = 0; it < 3; ++it) {
    const double th = std::hypot(alpha, yaw);
    const Vec2 dir = th > 0.0 ? Vec2{yaw / th, alpha / th} : Vec2{0.0, 1.0};
    const double tau_x = detail::tilt_tangents(alpha, yaw).x;
    const Eigen::ArrayXd a = detail::height_term(g, dir);
    // p_y (l_off - kappa (x tau_x + y tau_y)) = A tau_y, solved for tau_y.
    const Eigen::ArrayXd tau_y = p_mm * (g.l_off - g.kappa * g.x * tau_x) / (a + g.kappa * g.y * p_mm);
    const double ty = detail::weighted_mean(tau_y, w, "pitch");
    alpha = detail::angles_from_tangents(tau_x, ty).alpha;
  }
  return alpha;
}

inline FrameAngles recover_frame(std::span<const Vec2> deltas, std::span<const double> conf,
                                 const RecoveryGeometry& g, const RecoveryConfig& cfg = {}) {
  if (deltas.size() != static_cast<std::size_t>(g.size()) || conf.size() != deltas.size())
    throw ArgumentError("recover_frame: delta count does not match the grid");
  TiltPrior prior;
  FrameAngles cur;
  for (int pass = 0; pass < cfg.max_passes; ++pass) {
    const double gamma = estimate_roll(deltas, conf, g, cfg, prior);
    const double beta = estimate_yaw(deltas, conf, g, gamma, cfg, prior);
    const double alpha = estimate_pitch(deltas, conf, g, gamma, beta, cfg, prior);
    const FrameAngles next{alpha, beta, gamma};
    const double change = std::max({std::abs(next.alpha - cur.alpha), std::abs(next.beta - cur.beta),
                                     std::abs(next.gamma - cur.gamma)});
    cur = next;
    prior = {cur.alpha, cur.beta, true};
    if (pass > 0 && change <= cfg.tolerance) break;
  }
  return cur;
}

// Sparse per-frame trajectory; frame 1 is the zero rotation by definition.
inline Trajectory recover_trajectory(const DeltaField& field, const RecoveryGeometry& g,
                                     std::span<const double> frame_times, const RecoveryConfig& cfg = {}) {
  cfg.validate();
  field.validate();
  if (field.num_points != g.size()) throw ArgumentError("delta field point count does not match the grid");
  if (static_cast<int>(frame_times.size()) != field.num_frames)
    throw ArgumentError("frame_times count does not match the delta field");
  if (field.num_frames < 2) throw ArgumentError("recovery needs at least 2 frames");
  std::vector<RotationSample> samples(field.num_frames);
  samples[0] = {frame_times[0], 0.0, 0.0, 0.0};
  parallel_for(static_cast<std::size_t>(field.num_frames - 1), cfg.threads, [&](std::size_t k) {
    const int t = static_cast<int>(k) + 1;
    std::vector<Vec2> d(field.num_points);
    std::vector<double> c(field.num_points);
    for (int p = 0; p < field.num_points; ++p) {
      d[p] = field.at(p, t);
      c[p] = field.conf(p, t);
    }
    try {
      const FrameAngles a = recover_frame(d, c, g, cfg);
      samples[t] = {frame_times[t], a.alpha, a.beta, a.gamma};
    } catch (const Error& e) {
      const std::string msg = "frame " + std::to_string(t + 1) + ": " + e.what();
      if (dynamic_cast<const InsufficientDataError*>(&e)) throw InsufficientDataError(msg);
      if (dynamic_cast<const SingularityError*>(&e)) throw SingularityError(msg);
      if (dynamic_cast<const NumericError*>(&e)) throw NumericError(msg);
      if (dynamic_cast<const ArgumentError*>(&e)) throw ArgumentError(msg);
      throw DataError(msg);
    }
  });
  return Trajectory(std::move(samples), TrajectoryLabel::SparsePerFrame);
}

inline Trajectory recover_trajectory(const DeltaField& field, const DepthMap& depth, const QueryGrid& grid,
                                     const CameraModel& cam, std::span<const double> frame_times,
                                     const RecoveryConfig& cfg = {}) {
  return recover_trajectory(field, RecoveryGeometry(grid, depth, cam), frame_times, cfg);
}

}  // namespace blurcam
