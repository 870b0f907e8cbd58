#pragma once

// Seeded synthetic inputs: a hand-shake gyro trajectory and textured RGB-D
// scenes. Used for fixtures and tests when no recorded data is present.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "blurcam/geometry.hpp"
#include "blurcam/image.hpp"
#include "blurcam/simulator.hpp"
#include "blurcam/trajectory.hpp"

namespace blurcam {

struct GyroConfig {
  double duration_ms = 67140.0;
  double interval_ms = 2.0;
  int low_components = 4;  // per axis
  double low_freq_hz[2]{0.2, 1.2};
  double low_amp_rad[2]{1.5e-3, 3.5e-3};
  int tremor_components = 3;
  double tremor_freq_hz[2]{4.0, 12.0};
  double tremor_amp_rad[2]{0.05e-3, 0.2e-3};
  double roll_scale = 0.6;
  std::uint64_t seed = 1;
};

namespace detail {

struct Tone {
  double amp;
  double omega;  // rad / ms
  double phase;
};

inline std::vector<Tone> draw_tones(std::mt19937_64& gen, int count, const double (&freq)[2], const double (&amp)[2]) {
  std::vector<Tone> tones;
  for (int i = 0; i < count; ++i) {
    const double f = draw_uniform(gen, freq[0], freq[1]);
    const double a = draw_uniform(gen, amp[0], amp[1]);
    const double ph = draw_uniform(gen, 0.0, 2.0 * std::numbers::pi);
    tones.push_back({a, 2.0 * std::numbers::pi * f * 1e-3, ph});
  }
  return tones;
}

inline double eval_tones(const std::vector<Tone>& tones, double t) {
  double v = 0.0;
  for (const auto& tone : tones) v += tone.amp * std::sin(tone.omega * t + tone.phase);
  return v;
}

}  // namespace detail

// Sum of low-frequency sway and small tremor per axis, sampled uniformly from 0.
inline Trajectory synth_gyro(const GyroConfig& cfg = {}) {
  if (!(cfg.interval_ms > 0.0) || !(cfg.duration_ms > cfg.interval_ms))
    throw ArgumentError("gyro duration and interval must be positive");
  std::mt19937_64 gen(cfg.seed);
  std::vector<detail::Tone> axes[3];
  for (auto& a : axes) {
    a = detail::draw_tones(gen, cfg.low_components, cfg.low_freq_hz, cfg.low_amp_rad);
    const auto tremor = detail::draw_tones(gen, cfg.tremor_components, cfg.tremor_freq_hz, cfg.tremor_amp_rad);
    a.insert(a.end(), tremor.begin(), tremor.end());
  }
  for (auto& tone : axes[2]) tone.amp *= cfg.roll_scale;
  const auto n = static_cast<std::size_t>(std::floor(cfg.duration_ms / cfg.interval_ms + 1e-9)) + 1;
  std::vector<RotationSample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * cfg.interval_ms;
    samples.push_back({t, detail::eval_tones(axes[0], t), detail::eval_tones(axes[1], t),
                       detail::eval_tones(axes[2], t)});
  }
  return Trajectory(std::move(samples), TrajectoryLabel::DenseGroundTruth);
}

struct SceneConfig {
  int width = 518;
  int height = 518;
  double near_mm = 1500.0;
  double far_mm = 6000.0;
  int octaves = 5;
  int base_cells = 4;  // lattice cells across the coarsest octave
  std::uint64_t seed = 1;
};

namespace detail {

// Smoothstep-interpolated value noise on a (cells+1)^2 lattice.
class ValueNoise {
 public:
  ValueNoise(int cells, std::mt19937_64& gen) : cells_(cells), lattice_((cells + 1) * (cells + 1)) {
    for (auto& v : lattice_) v = draw_uniform(gen, -1.0, 1.0);
  }

  // u, v in [0, 1]
  double operator()(double u, double v) const {
    const double gx = u * cells_;
    const double gy = v * cells_;
    const int x0 = std::min(static_cast<int>(gx), cells_ - 1);
    const int y0 = std::min(static_cast<int>(gy), cells_ - 1);
    const double fx = smooth(gx - x0);
    const double fy = smooth(gy - y0);
    const auto at = [&](int x, int y) { return lattice_[static_cast<std::size_t>(y) * (cells_ + 1) + x]; };
    const double a = at(x0, y0) + fx * (at(x0 + 1, y0) - at(x0, y0));
    const double b = at(x0, y0 + 1) + fx * (at(x0 + 1, y0 + 1) - at(x0, y0 + 1));
    return a + fy * (b - a);
  }

 private:
  static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }
  int cells_;
  std::vector<double> lattice_;
};

}  // namespace detail

// Multi-octave colored value noise over a tilted plane with smooth depth bumps.
inline std::pair<Image, DepthMap> synth_scene(const SceneConfig& cfg = {}) {
  if (cfg.width < 3 || cfg.height < 3) throw ArgumentError("scene must be at least 3x3");
  if (!(cfg.near_mm > 0.0) || !(cfg.far_mm > cfg.near_mm)) throw ArgumentError("scene depth range is invalid");
  std::mt19937_64 gen(cfg.seed);
  std::vector<detail::ValueNoise> color[3];
  for (auto& ch : color)
    for (int o = 0; o < cfg.octaves; ++o) ch.emplace_back(cfg.base_cells << o, gen);
  const detail::ValueNoise bumps(3, gen);
  const double tilt_x = draw_uniform(gen, -0.3, 0.3);
  const double tilt_y = draw_uniform(gen, 0.2, 0.6);

  Image rgb(cfg.width, cfg.height, 3);
  DepthMap depth(cfg.width, cfg.height);
  for (int y = 0; y < cfg.height; ++y) {
    const double v = (y + 0.5) / cfg.height;
    for (int x = 0; x < cfg.width; ++x) {
      const double u = (x + 0.5) / cfg.width;
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        double amp = 0.5;
        for (const auto& oct : color[c]) {
          s += amp * oct(u, v);
          amp *= 0.7;
        }
        rgb.at(x, y, c) = static_cast<float>(std::clamp(0.5 + 0.5 * s, 0.0, 1.0));
      }
      // Nearer at the bottom of the frame, as for a ground plane.
      const double w = std::clamp(0.5 + tilt_x * (u - 0.5) - tilt_y * (v - 0.5) + 0.15 * bumps(u, v), 0.0, 1.0);
      depth.at(x, y) = static_cast<float>(cfg.near_mm + w * (cfg.far_mm - cfg.near_mm));
    }
  }
  return {std::move(rgb), std::move(depth)};
}

}  // namespace blurcam
