#pragma once

// Query-point grid and delta-field extraction. track_ncc measures the
// displacement of every grid point against frame 1 with zero-normalized
// cross-correlation; oracle_deltas evaluates the same quantity analytically.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "blurcam/error.hpp"
#include "blurcam/geometry.hpp"
#include "blurcam/image.hpp"
#include "blurcam/parallel.hpp"
#include "blurcam/simulator.hpp"
#include "blurcam/trajectory.hpp"

namespace blurcam {

// (2i+1) x (2i+1) points centered on the principal point, row-major
// (point_id = row * side + col, rows top to bottom).
struct QueryGrid {
  int half_width = 0;
  int spacing = 0;
  double margin = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  std::vector<Vec2> points;  // absolute pixel coordinates

  int side() const { return 2 * half_width + 1; }
  std::size_t size() const { return points.size(); }
  int col(std::size_t id) const { return static_cast<int>(id) % side() - half_width; }
  int row(std::size_t id) const { return static_cast<int>(id) / side() - half_width; }
  // Offset from the principal point in pixels.
  double x(std::size_t id) const { return col(id) * static_cast<double>(spacing); }
  double y(std::size_t id) const { return row(id) * static_cast<double>(spacing); }
  std::size_t id_of(int col_off, int row_off) const {
    return static_cast<std::size_t>((row_off + half_width) * side() + (col_off + half_width));
  }
  std::size_t center_id() const { return id_of(0, 0); }
};

inline QueryGrid make_query_grid(const CameraModel& cam, int half_width, double margin_px) {
  cam.validate();
  if (half_width < 1) throw ArgumentError("grid half_width must be >= 1");
  if (!(margin_px >= 0.0)) throw ArgumentError("grid margin must be >= 0");
  const double half_extent = std::min(cam.width, cam.height) / 2 - margin_px;
  const int spacing = static_cast<int>(std::floor(half_extent / half_width));
  if (spacing < 1) throw ArgumentError("query grid does not fit: spacing would be < 1 px");
  QueryGrid g;
  g.half_width = half_width;
  g.spacing = spacing;
  g.margin = margin_px;
  g.cx = cam.cx;
  g.cy = cam.cy;
  const double ext = static_cast<double>(half_width) * spacing;
  if (cam.cx - ext < margin_px || cam.cx + ext > cam.width - margin_px || cam.cy - ext < margin_px ||
      cam.cy + ext > cam.height - margin_px)
    throw ArgumentError("query grid does not fit inside the image minus the margin");
  for (int r = -half_width; r <= half_width; ++r) {
    for (int c = -half_width; c <= half_width; ++c) {
      g.points.push_back({cam.cx + c * spacing, cam.cy + r * spacing});
    }
  }
  return g;
}

// Displacements of N points over T frames, stored point-major.
struct DeltaField {
  int num_points = 0;
  int num_frames = 0;
  std::vector<Vec2> deltas;
  std::vector<double> confidence;
  std::vector<unsigned char> fallback;  // 1 where the delta was copied from a neighbor

  DeltaField() = default;
  DeltaField(int n, int t)
      : num_points(n), num_frames(t), deltas(static_cast<std::size_t>(n) * t),
        confidence(static_cast<std::size_t>(n) * t, 1.0), fallback(static_cast<std::size_t>(n) * t, 0) {
    if (n < 1 || t < 1) throw ArgumentError("delta field needs at least one point and one frame");
  }

  std::size_t index(int point, int frame) const { return static_cast<std::size_t>(point) * num_frames + frame; }
  Vec2& at(int point, int frame) { return deltas[index(point, frame)]; }
  const Vec2& at(int point, int frame) const { return deltas[index(point, frame)]; }
  double& conf(int point, int frame) { return confidence[index(point, frame)]; }
  double conf(int point, int frame) const { return confidence[index(point, frame)]; }

  void validate() const {
    for (int p = 0; p < num_points; ++p) {
      if (!(at(p, 0) == Vec2{0.0, 0.0})) throw DataError("delta field frame 1 must be zero");
      for (int t = 0; t < num_frames; ++t) {
        const Vec2& d = at(p, t);
        if (!std::isfinite(d.x) || !std::isfinite(d.y)) throw DataError("delta field contains non-finite values");
        const double c = conf(p, t);
        if (!(c >= 0.0 && c <= 1.0)) throw DataError("delta field confidence outside [0, 1]");
      }
    }
  }
};

inline bool operator==(const DeltaField& a, const DeltaField& b) {
  return a.num_points == b.num_points && a.num_frames == b.num_frames && a.deltas == b.deltas &&
         a.confidence == b.confidence && a.fallback == b.fallback;
}

// ---- NCC tracker ------------------------------------------------------------

namespace detail {

inline Image downsample2(const Image& g) {
  Image out(std::max(1, g.width / 2), std::max(1, g.height / 2), 1);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const int x0 = std::min(2 * x, g.width - 1), x1 = std::min(2 * x + 1, g.width - 1);
      const int y0 = std::min(2 * y, g.height - 1), y1 = std::min(2 * y + 1, g.height - 1);
      out.at(x, y) = 0.25f * (g.at(x0, y0) + g.at(x1, y0) + g.at(x0, y1) + g.at(x1, y1));
    }
  }
  return out;
}

// Zero-mean, unit-norm patch. Empty when the patch has no variance.
struct Template {
  int radius = 0;
  std::vector<double> values;
  bool flat = true;
};

inline Template make_template(const Image& g, double cx, double cy, int radius) {
  Template t;
  t.radius = radius;
  const int side = 2 * radius + 1;
  t.values.resize(static_cast<std::size_t>(side) * side);
  double mean = 0.0;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      const double v = sample_bilinear(g, cx + dx, cy + dy, 0);
      t.values[static_cast<std::size_t>(dy + radius) * side + (dx + radius)] = v;
      mean += v;
    }
  mean /= static_cast<double>(t.values.size());
  double ss = 0.0;
  for (double& v : t.values) {
    v -= mean;
    ss += v * v;
  }
  if (ss < 1e-12) return t;
  const double inv = 1.0 / std::sqrt(ss);
  for (double& v : t.values) v *= inv;
  t.flat = false;
  return t;
}

// ZNCC of the template against the window of g centered at (cx, cy).
// Windows are read with clamp-to-edge. Zero-variance windows score 0.
inline double zncc_at(const Template& t, const Image& g, int cx, int cy) {
  const int r = t.radius;
  const int side = 2 * r + 1;
  double sum = 0.0, sum_sq = 0.0, cross = 0.0;
  const bool inside = cx - r >= 0 && cy - r >= 0 && cx + r < g.width && cy + r < g.height;
  for (int dy = -r; dy <= r; ++dy) {
    const double* tv = &t.values[static_cast<std::size_t>(dy + r) * side];
    if (inside) {
      const float* row = &g.data[static_cast<std::size_t>(cy + dy) * g.width + (cx - r)];
      for (int k = 0; k < side; ++k) {
        const double v = row[k];
        sum += v;
        sum_sq += v * v;
        cross += tv[k] * v;
      }
    } else {
      const int yy = std::clamp(cy + dy, 0, g.height - 1);
      for (int k = 0; k < side; ++k) {
        const double v = g.at(std::clamp(cx - r + k, 0, g.width - 1), yy);
        sum += v;
        sum_sq += v * v;
        cross += tv[k] * v;
      }
    }
  }
  const double n = static_cast<double>(side) * side;
  const double var = sum_sq - sum * sum / n;
  if (var < 1e-12) return 0.0;
  // The template is zero-mean, so the window mean drops out of the cross term.
  return cross / std::sqrt(var);
}

// ZNCC against a window centered at a fractional position (bilinear reads).
inline double zncc_at_subpixel(const Template& t, const Image& g, double cx, double cy) {
  const int r = t.radius;
  const int side = 2 * r + 1;
  double sum = 0.0, sum_sq = 0.0, cross = 0.0;
  for (int dy = -r; dy <= r; ++dy) {
    const double* tv = &t.values[static_cast<std::size_t>(dy + r) * side];
    for (int k = 0; k < side; ++k) {
      const double v = sample_bilinear(g, cx - r + k, cy + dy, 0);
      sum += v;
      sum_sq += v * v;
      cross += tv[k] * v;
    }
  }
  const double n = static_cast<double>(side) * side;
  const double var = sum_sq - sum * sum / n;
  if (var < 1e-12) return 0.0;
  return cross / std::sqrt(var);
}

// Sub-pixel peak from a least-squares quadratic surface over the 3x3
// neighborhood; falls back to independent parabolas when the surface is not
// a proper maximum.
inline Vec2 refine_peak(const double f[3][3]) {
  // f[j][i] with i = x offset + 1, j = y offset + 1.
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) {
      const double x = i - 1, y = j - 1, v = f[j][i];
      sx += x * v;
      sy += y * v;
      sxy += x * y * v;
      sxx += (x * x - 2.0 / 3.0) * v;
      syy += (y * y - 2.0 / 3.0) * v;
    }
  const double b = sx / 6.0, c = sy / 6.0, e = sxy / 4.0, d = sxx / 2.0, g = syy / 2.0;
  const double det = 4.0 * d * g - e * e;
  if (d < 0.0 && g < 0.0 && det > 0.0) {
    const double ox = (-2.0 * g * b + e * c) / det;
    const double oy = (-2.0 * d * c + e * b) / det;
    if (std::abs(ox) <= 1.0 && std::abs(oy) <= 1.0) return {ox, oy};
  }
  auto parabola = [](double m, double z, double p) {
    const double den = m - 2.0 * z + p;
    if (den >= 0.0) return 0.0;
    return std::clamp(0.5 * (m - p) / den, -0.5, 0.5);
  };
  return {parabola(f[1][0], f[1][1], f[1][2]), parabola(f[0][1], f[1][1], f[2][1])};
}

struct TrackResult {
  Vec2 delta;
  double confidence = 0.0;
};

inline constexpr std::size_t kCoarseCandidates = 3;
// Neighborhood spacings (px) of the successive quadratic fits. Narrower
// stencils sit closer to the apex of an asymmetric correlation peak.
inline constexpr double kRefineStencils[] = {1.0, 0.5, 0.25};

// Two-level search: exhaustive ZNCC over the half-resolution search window,
// then hill-climbing at full resolution from each of the strongest coarse
// peaks, clipped to the full-resolution search window.
inline TrackResult track_point(const Template& fine_t, const Template& coarse_t, const Image& frame,
                               const Image& frame_half, double px, double py, int search) {
  TrackResult res;
  if (fine_t.flat) return res;
  const int ix = static_cast<int>(std::lround(px));
  const int iy = static_cast<int>(std::lround(py));
  // Coarse stage: template and window both at integer half-resolution
  // positions; half pixel h covers full pixels 2h and 2h+1 (center 2h + 0.5).
  // The strongest few local maxima are all refined, since near-periodic
  // texture can put a false peak above the true one at half resolution.
  std::vector<std::pair<int, int>> starts;
  if (!coarse_t.flat) {
    const int cs = (search + 1) / 2;
    const int side = 2 * cs + 1;
    const int hx = static_cast<int>(std::floor(px / 2.0));
    const int hy = static_cast<int>(std::floor(py / 2.0));
    std::vector<double> cscore(static_cast<std::size_t>(side) * side);
    for (int dy = -cs; dy <= cs; ++dy)
      for (int dx = -cs; dx <= cs; ++dx)
        cscore[static_cast<std::size_t>(dy + cs) * side + (dx + cs)] = zncc_at(coarse_t, frame_half, hx + dx, hy + dy);
    std::vector<std::tuple<double, int, int>> peaks;
    for (int j = 0; j < side; ++j)
      for (int i = 0; i < side; ++i) {
        const double v = cscore[static_cast<std::size_t>(j) * side + i];
        bool is_max = true;
        for (int b = -1; b <= 1 && is_max; ++b)
          for (int a = -1; a <= 1; ++a) {
            const int ii = i + a, jj = j + b;
            if ((a == 0 && b == 0) || ii < 0 || jj < 0 || ii >= side || jj >= side) continue;
            if (cscore[static_cast<std::size_t>(jj) * side + ii] > v) {
              is_max = false;
              break;
            }
          }
        if (is_max) peaks.emplace_back(-v, j, i);
      }
    std::sort(peaks.begin(), peaks.end());
    for (std::size_t k = 0; k < peaks.size() && k < kCoarseCandidates; ++k) {
      const int dx = std::get<2>(peaks[k]) - cs, dy = std::get<1>(peaks[k]) - cs;
      starts.emplace_back(static_cast<int>(std::lround(2.0 * (hx + dx) + 0.5 - px)),
                          static_cast<int>(std::lround(2.0 * (hy + dy) + 0.5 - py)));
    }
  }
  if (starts.empty()) starts.emplace_back(0, 0);
  // Fine stage.
  std::map<std::pair<int, int>, double> cache;
  auto score = [&](int dx, int dy) {
    auto key = std::make_pair(dx, dy);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const double s = (std::abs(dx) > search || std::abs(dy) > search)
                         ? -2.0
                         : zncc_at(fine_t, frame, ix + dx, iy + dy);
    cache.emplace(key, s);
    return s;
  };
  int bx = 0, by = 0;
  double best = -3.0;
  for (auto [sx, sy] : starts) {
    sx = std::clamp(sx, -search, search);
    sy = std::clamp(sy, -search, search);
    int cx = sx, cy = sy;
    double cb = -3.0;
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) {
        const double s = score(sx + dx, sy + dy);
        if (s > cb) {
          cb = s;
          cx = sx + dx;
          cy = sy + dy;
        }
      }
    for (int guard = 0; guard < 4 * search + 8; ++guard) {
      int nx = cx, ny = cy;
      double nb = cb;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const double s = score(cx + dx, cy + dy);
          if (s > nb) {
            nb = s;
            nx = cx + dx;
            ny = cy + dy;
          }
        }
      if (nx == cx && ny == cy) break;
      cx = nx;
      cy = ny;
      cb = nb;
    }
    if (cb > best) {
      best = cb;
      bx = cx;
      by = cy;
    }
  }
  double f[3][3];
  const bool interior = std::abs(bx) < search && std::abs(by) < search;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) f[j][i] = score(bx + i - 1, by + j - 1);
  // Template centers may be fractional; measure relative to the true center.
  double ox = bx + (ix - px);
  double oy = by + (iy - py);
  // A perfect match is an exact integer shift. Otherwise the quadratic fit is
  // repeated on a 3x3 neighborhood re-centered at the current estimate until
  // it stops moving, which removes the bias toward integer positions.
  if (interior && best < 1.0 - 1e-12) {
    Vec2 sub = refine_peak(f);
    double cx = ix + bx + sub.x;
    double cy = iy + by + sub.y;
    for (double h : kRefineStencils) {
      for (int it = 0; it < 8; ++it) {
        for (int j = 0; j < 3; ++j)
          for (int i = 0; i < 3; ++i) f[j][i] = zncc_at_subpixel(fine_t, frame, cx + h * (i - 1), cy + h * (j - 1));
        const Vec2 step = refine_peak(f);
        cx += h * step.x;
        cy += h * step.y;
        if (std::abs(h * step.x) < 1e-4 && std::abs(h * step.y) < 1e-4) break;
      }
    }
    ox = std::clamp(cx - ix, bx - 1.0, bx + 1.0) + (ix - px);
    oy = std::clamp(cy - iy, by - 1.0, by + 1.0) + (iy - py);
  }
  res.delta = {ox, oy};
  res.confidence = std::clamp(best, 0.0, 1.0);
  return res;
}

}  // namespace detail

struct TrackerConfig {
  int patch_px = 21;
  int search_px = 24;
  unsigned threads = 1;
};

inline DeltaField track_ncc(const std::vector<Image>& frames, const QueryGrid& grid, const TrackerConfig& cfg = {}) {
  if (frames.size() < 2) throw ArgumentError("track_ncc needs at least 2 frames");
  if (cfg.patch_px < 3 || cfg.patch_px % 2 == 0) throw ArgumentError("patch_px must be odd and >= 3");
  if (cfg.search_px < 1) throw ArgumentError("search_px must be >= 1");
  const int radius = cfg.patch_px / 2;
  const Image& first = frames.front();
  for (const auto& p : grid.points) {
    if (p.x - radius < 0 || p.y - radius < 0 || p.x + radius > first.width - 1 || p.y + radius > first.height - 1)
      throw ArgumentError("patch does not fit around every grid point in frame 1");
  }
  for (const auto& f : frames)
    if (f.width != first.width || f.height != first.height) throw ArgumentError("frames differ in size");

  const int n = static_cast<int>(grid.size());
  const int t_count = static_cast<int>(frames.size());
  std::vector<Image> gray(frames.size()), half(frames.size());
  parallel_for(frames.size(), cfg.threads, [&](std::size_t k) {
    gray[k] = to_gray(frames[k]);
    half[k] = detail::downsample2(gray[k]);
  });

  std::vector<detail::Template> fine(n), coarse(n);
  for (int p = 0; p < n; ++p) {
    fine[p] = detail::make_template(gray[0], grid.points[p].x, grid.points[p].y, radius);
    coarse[p] = detail::make_template(half[0], std::floor(grid.points[p].x / 2.0), std::floor(grid.points[p].y / 2.0),
                                      std::max(1, radius / 2));
  }

  DeltaField field(n, t_count);
  for (int p = 0; p < n; ++p) field.conf(p, 0) = fine[p].flat ? 0.0 : 1.0;
  parallel_for(static_cast<std::size_t>(n) * (t_count - 1), cfg.threads, [&](std::size_t job) {
    const int p = static_cast<int>(job) / (t_count - 1);
    const int t = static_cast<int>(job) % (t_count - 1) + 1;
    const auto r = detail::track_point(fine[p], coarse[p], gray[t], half[t], grid.points[p].x, grid.points[p].y,
                                       cfg.search_px);
    field.at(p, t) = r.delta;
    field.conf(p, t) = r.confidence;
  });

  // Flat templates: copy the nearest point (grid distance, lowest id on ties)
  // with higher confidence.
  for (int p = 0; p < n; ++p) {
    if (!fine[p].flat) continue;
    for (int t = 1; t < t_count; ++t) {
      int pick = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int q = 0; q < n; ++q) {
        if (q == p || fine[q].flat || !(field.conf(q, t) > field.conf(p, t))) continue;
        const double d = std::hypot(grid.col(q) - grid.col(p), grid.row(q) - grid.row(p));
        if (d < best_d) {
          best_d = d;
          pick = q;
        }
      }
      if (pick >= 0) field.at(p, t) = field.at(pick, t);
      field.fallback[field.index(p, t)] = 1;
    }
  }
  return field;
}

inline DeltaField track_ncc(const VideoFrames& video, const QueryGrid& grid, const TrackerConfig& cfg = {}) {
  return track_ncc(video.frames, grid, cfg);
}

// ---- analytic oracle ---------------------------------------------------------

// Exact deltas of the grid points at each frame time, relative to the first.
inline DeltaField oracle_deltas(const Trajectory& traj, const DepthMap& depth, const CameraModel& cam,
                                const QueryGrid& grid, std::span<const double> frame_times) {
  if (frame_times.empty()) throw ArgumentError("oracle_deltas needs at least one frame time");
  const DepthMap filled = depth.filled();
  const double l_on = on_axis_depth(filled, cam);
  const int n = static_cast<int>(grid.size());
  const int t_count = static_cast<int>(frame_times.size());
  std::vector<double> l_off(n);
  for (int p = 0; p < n; ++p) l_off[p] = filled.sample(grid.points[p].x, grid.points[p].y);
  const RotationSample ref = traj.sample_at(frame_times[0]);
  DeltaField field(n, t_count);
  for (int t = 1; t < t_count; ++t) {
    const DeltaModel model(angles_minus(traj.sample_at(frame_times[t]), ref), l_on, cam);
    for (int p = 0; p < n; ++p) {
      try {
        field.at(p, t) = model(grid.x(p), grid.y(p), l_off[p]);
      } catch (const SingularityError& e) {
        throw SingularityError(std::string(e.what()) + " at point " + std::to_string(p) + ", frame " +
                               std::to_string(t + 1));
      }
    }
  }
  return field;
}

// ---- CSV ---------------------------------------------------------------------

inline constexpr const char* kDeltaCsvHeader = "point_id,frame,px,py,confidence";

inline void write_delta_csv(std::ostream& os, const DeltaField& field) {
  os << kDeltaCsvHeader << '\n';
  for (int p = 0; p < field.num_points; ++p)
    for (int t = 0; t < field.num_frames; ++t) {
      const Vec2& d = field.at(p, t);
      os << p << ',' << t << ',' << format_double(d.x) << ',' << format_double(d.y) << ','
         << format_double(field.conf(p, t)) << '\n';
    }
}

inline void write_delta_csv(const std::string& path, const DeltaField& field) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  write_delta_csv(os, field);
}

// Rows may come in any order; the result is indexed by point_id and frame.
inline DeltaField read_delta_csv(std::istream& is, const std::string& name = "deltas") {
  std::string line;
  if (!std::getline(is, line)) throw FormatError(name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kDeltaCsvHeader) throw FormatError(name + ": expected header '" + std::string(kDeltaCsvHeader) + "'");
  struct Row {
    long p, t;
    double x, y, c;
  };
  std::vector<Row> rows;
  long max_p = -1, max_t = -1;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const std::string ctx = name + ":" + std::to_string(lineno);
    if (f.size() != 5) throw FormatError(ctx + ": expected 5 columns");
    const double pid = parse_double(f[0], ctx), fr = parse_double(f[1], ctx);
    if (pid < 0 || fr < 0 || pid != std::floor(pid) || fr != std::floor(fr))
      throw FormatError(ctx + ": point_id and frame must be non-negative integers");
    Row r{static_cast<long>(pid), static_cast<long>(fr), parse_double(f[2], ctx), parse_double(f[3], ctx),
          parse_double(f[4], ctx)};
    max_p = std::max(max_p, r.p);
    max_t = std::max(max_t, r.t);
    rows.push_back(r);
  }
  if (rows.empty()) throw DataError(name + ": no rows");
  DeltaField field(static_cast<int>(max_p + 1), static_cast<int>(max_t + 1));
  std::vector<unsigned char> seen(field.deltas.size(), 0);
  for (const auto& r : rows) {
    const auto idx = field.index(static_cast<int>(r.p), static_cast<int>(r.t));
    if (seen[idx]) throw FormatError(name + ": duplicate row for point " + std::to_string(r.p));
    seen[idx] = 1;
    field.deltas[idx] = {r.x, r.y};
    field.confidence[idx] = r.c;
    field.fallback[idx] = 0;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw FormatError(name + ": missing rows");
  field.validate();
  return field;
}

inline DeltaField read_delta_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open delta field '" + path + "'");
  return read_delta_csv(is, path);
}

}  // namespace blurcam
