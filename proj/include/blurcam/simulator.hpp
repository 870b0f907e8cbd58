#pragma once

// Rolling-shutter motion-blur renderer. Each output row is the time average
// of the sharp input seen through the delta field of the camera rotation over
// that row's exposure window.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include "blurcam/error.hpp"
#include "blurcam/geometry.hpp"
#include "blurcam/image.hpp"
#include "blurcam/parallel.hpp"
#include "blurcam/trajectory.hpp"

namespace blurcam {

struct SimConfig {
  double exposure_ms = 60.0;
  double row_transfer_us = 4.0;
  int frames = 30;
  std::optional<double> onset_ms;         // drawn from seed when unset
  std::optional<double> integral_step_ms; // defaults to the trajectory sampling interval
  std::uint64_t seed = 0;

  double row_transfer_ms() const { return row_transfer_us * 1e-3; }

  // Exposure plus full readout; no idle gap between frames.
  double frame_period(int height) const { return exposure_ms + height * row_transfer_ms(); }
  double capture_span(int height) const { return frames * frame_period(height); }

  // Time from a frame's start to the middle of its whole readout window.
  double frame_mid_offset(int height) const {
    return 0.5 * (exposure_ms + (height - 1) * row_transfer_ms());
  }

  double step_for(const Trajectory& traj) const {
    return integral_step_ms.value_or(traj.sampling_interval());
  }

  void validate() const {
    if (!(exposure_ms > 0.0) || !std::isfinite(exposure_ms)) throw ArgumentError("exposure_ms must be > 0");
    if (!(row_transfer_us >= 0.0) || !std::isfinite(row_transfer_us))
      throw ArgumentError("row_transfer_us must be >= 0");
    if (frames < 1) throw ArgumentError("frames must be >= 1");
    if (integral_step_ms && !(*integral_step_ms > 0.0)) throw ArgumentError("integral_step_ms must be > 0");
  }

  void validate_step(double step) const {
    if (!(step > 0.0)) throw ArgumentError("integral step must be > 0");
    if (step > exposure_ms / 4.0 + 1e-12)
      throw ArgumentError("integral step must be <= exposure_ms / 4 (at least 4 quadrature samples)");
  }
};

struct VideoFrames {
  std::vector<Image> frames;
  std::vector<double> frame_start_times;  // ms, trajectory time base
  SimConfig config;
  double onset_ms = 0.0;

  // Exposure midpoints relative to the onset; the timestamps of the per-frame
  // (sparse) trajectory.
  std::vector<double> reference_times() const {
    std::vector<double> out;
    const int h = frames.empty() ? 0 : frames.front().height;
    for (double t : frame_start_times) out.push_back(t - onset_ms + config.frame_mid_offset(h));
    return out;
  }
};

inline std::vector<double> frame_reference_times(const SimConfig& cfg, int height) {
  std::vector<double> out;
  out.reserve(cfg.frames);
  for (int k = 0; k < cfg.frames; ++k) out.push_back(k * cfg.frame_period(height) + cfg.frame_mid_offset(height));
  return out;
}

// Latest admissible onset so that the whole capture fits in the trajectory.
inline double max_onset(const Trajectory& traj, const SimConfig& cfg, int height) {
  return traj.end() - cfg.capture_span(height);
}

// Uniform draw in [lo, hi] from a 64-bit Mersenne Twister; the mapping is
// spelled out so the value does not depend on the standard library.
inline double draw_uniform(std::mt19937_64& gen, double lo, double hi) {
  const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

inline double resolve_onset(const Trajectory& traj, const SimConfig& cfg, int height) {
  const double hi = max_onset(traj, cfg, height);
  if (hi < traj.start()) {
    std::ostringstream os;
    os << "trajectory too short: capture needs " << cfg.capture_span(height) << " ms, trajectory spans "
       << traj.end() - traj.start() << " ms";
    throw RangeError(os.str());
  }
  if (cfg.onset_ms) {
    const double onset = *cfg.onset_ms;
    if (onset < traj.start() || onset > hi + 1e-9) {
      std::ostringstream os;
      os << "onset " << onset << " ms leaves no room for the capture span of " << cfg.capture_span(height)
         << " ms (trajectory ends at " << traj.end() << " ms, latest onset " << hi << " ms)";
      throw RangeError(os.str());
    }
    return onset;
  }
  std::mt19937_64 gen(cfg.seed);
  return draw_uniform(gen, traj.start(), hi);
}

namespace detail {

// Source position whose displaced image lands on p: solves s + delta(s) = p
// by fixed-point iteration. |d delta / d s| is O(theta), so four passes reach
// double precision for the operating regime.
inline Vec2 inverse_displace(const DeltaModel& model, double x, double y, double l_off) {
  double sx = x;
  double sy = y;
  for (int it = 0; it < 4; ++it) {
    const Vec2 d = model(sx, sy, l_off);
    sx = x - d.x;
    sy = y - d.y;
  }
  return {sx, sy};
}

}  // namespace detail

// Renders one frame starting at frame_start (ms, trajectory time). The
// trajectory angles are used as given, so callers rebase them to the desired
// reference beforehand.
inline Image render_frame(const Image& rgb, const DepthMap& depth, const Trajectory& traj, const CameraModel& cam,
                          const SimConfig& cfg, double frame_start, unsigned threads = 1) {
  cfg.validate();
  cam.validate();
  if (rgb.width != cam.width || rgb.height != cam.height)
    throw ArgumentError("rgb dimensions do not match the camera");
  if (depth.width != cam.width || depth.height != cam.height)
    throw ArgumentError("depth dimensions do not match the camera");
  const double step = cfg.step_for(traj);
  cfg.validate_step(step);
  const double rt = cfg.row_transfer_ms();
  const double window_end = frame_start + cfg.exposure_ms + cam.height * rt;
  if (!traj.covers(frame_start, frame_start + cfg.exposure_ms + (cam.height - 1) * rt)) {
    std::ostringstream os;
    os << "trajectory [" << traj.start() << ", " << traj.end() << "] ms does not cover frame window ["
       << frame_start << ", " << window_end << "] ms";
    throw RangeError(os.str());
  }

  const DepthMap filled = depth.filled();
  const double l_on = on_axis_depth(filled, cam);
  const int n = std::max(1, static_cast<int>(std::ceil(cfg.exposure_ms / step - 1e-9)));
  const double h = cfg.exposure_ms / n;
  const double norm = 2.0 * n;  // trapezoid weights 1,2,...,2,1

  Image out(rgb.width, rgb.height, rgb.channels);
  parallel_for(static_cast<std::size_t>(cam.height), threads, [&](std::size_t row) {
    const int r = static_cast<int>(row);
    const double t_row = frame_start + r * rt;
    std::vector<DeltaModel> models;
    models.reserve(n + 1);
    for (int j = 0; j <= n; ++j) {
      const double t = (j == n) ? t_row + cfg.exposure_ms : t_row + j * h;
      models.emplace_back(traj.sample_at(t), l_on, cam);
    }
    std::vector<double> acc(rgb.channels);
    double px[16];
    const double y = r - cam.cy;
    for (int c = 0; c < cam.width; ++c) {
      const double x = c - cam.cx;
      const double l_off = filled.at(c, r);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int j = 0; j <= n; ++j) {
        const Vec2 s = detail::inverse_displace(models[j], x, y, l_off);
        sample_bilinear(rgb, s.x + cam.cx, s.y + cam.cy, px);
        const double w = (j == 0 || j == n) ? 1.0 : 2.0;
        for (int ch = 0; ch < rgb.channels; ++ch) acc[ch] += w * px[ch];
      }
      for (int ch = 0; ch < rgb.channels; ++ch) {
        out.at(c, r, ch) = static_cast<float>(std::clamp(acc[ch] / norm, 0.0, 1.0));
      }
    }
  });
  return out;
}

// Renders cfg.frames frames. Rotations are taken relative to the onset (the
// first row's exposure start of frame 1).
inline VideoFrames render_video(const Image& rgb, const DepthMap& depth, const Trajectory& traj,
                                const CameraModel& cam, const SimConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  cam.validate();
  VideoFrames video;
  video.config = cfg;
  video.onset_ms = resolve_onset(traj, cfg, cam.height);
  video.config.onset_ms = video.onset_ms;
  const Trajectory rel = rebase(traj, video.onset_ms);
  const double period = cfg.frame_period(cam.height);
  video.frames.resize(cfg.frames);
  for (int k = 0; k < cfg.frames; ++k) video.frame_start_times.push_back(video.onset_ms + k * period);
  // Frames in parallel; rows serial inside each frame.
  parallel_for(static_cast<std::size_t>(cfg.frames), threads, [&](std::size_t k) {
    video.frames[k] = render_frame(rgb, depth, rel, cam, cfg, k * period, 1);
  });
  return video;
}

// Arc length (pixels) of the delta path of one image point over [t0, t1],
// with rotations measured from t0; the measurable proxy for blur extent.
inline double compute_blur_extent(const Trajectory& traj, const CameraModel& cam, const DepthMap& depth,
                                  const FieldPoint& patch_center, double t0, double t1) {
  if (!(t1 >= t0)) throw ArgumentError("blur window must satisfy t1 >= t0");
  if (!traj.covers(t0, t1)) throw RangeError("blur window not covered by the trajectory");
  const double l_on = on_axis_depth(depth, cam);
  const RotationSample ref = traj.sample_at(t0);
  const double step = traj.sampling_interval();
  const int n = std::max(1, static_cast<int>(std::ceil((t1 - t0) / step - 1e-9)));
  double length = 0.0;
  Vec2 prev{0.0, 0.0};
  for (int j = 1; j <= n; ++j) {
    const double t = (j == n) ? t1 : t0 + j * step;
    const DeltaModel model(angles_minus(traj.sample_at(t), ref), l_on, cam);
    const Vec2 p = model(patch_center.px, patch_center.py, patch_center.depth);
    length += std::hypot(p.x - prev.x, p.y - prev.y);
    prev = p;
  }
  return length;
}

}  // namespace blurcam
