// Acceptance gate: one PASS/FAIL line per criterion AC1..AC8. Tolerances are
// fixed here; the exit status is nonzero when any criterion fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "blurcam/blurcam.hpp"

using namespace blurcam;
namespace fs = std::filesystem;

namespace {

// AC1
constexpr int kInversionDraws = 1000;
constexpr double kInversionMaxAngle = 5e-3;
constexpr double kInversionTol = 1e-6;
constexpr double kInversionSeconds = 10.0;
// AC2
constexpr double kOracleAbsRel = 0.02;
constexpr double kOracleE1 = 0.98;
constexpr double kOracleSeconds = 30.0;
// AC3
constexpr int kFixtures = 10;
constexpr double kTrackedAbsRel = 0.10;
constexpr double kTrackedE1 = 0.80;
constexpr double kTrackedSeconds = 600.0;
// AC5
constexpr int kBlurPairs = 100;
constexpr double kBlurRatioTol = 0.01;
// AC6
constexpr double kStepHalvingTol = 1e-3;
// AC8
constexpr double kFrameSeconds = 2.0;
constexpr double kVideoSeconds = 60.0;

// Shared fixture: the synthetic hand-held gyro record, the reference optics
// at 518 x 518 and the query grid i = 12 (625 points).
constexpr std::uint64_t kGyroSeed = 11;
constexpr std::uint64_t kSceneSeedBase = 100;
constexpr std::uint64_t kSimSeedBase = 1000;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int failures = 0;

void report(const char* id, bool pass, const std::string& detail) {
  std::printf("%s %s %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const Trajectory& gyro() {
  static const Trajectory t = [] {
    GyroConfig gc;
    gc.seed = kGyroSeed;
    return synth_gyro(gc);
  }();
  return t;
}

CameraModel camera() { return CameraModel::centered(4.25, 7.0, 518, 518); }

struct FixtureRun {
  Image rgb;
  DepthMap depth;
  SimConfig sim;
  double onset = 0.0;
  std::vector<double> times;  // frame reference times, onset-relative
  Trajectory gt;              // dense, rebased at the onset
};

FixtureRun fixture(int s) {
  SceneConfig sc;
  sc.seed = kSceneSeedBase + s;
  auto [rgb, depth] = synth_scene(sc);
  SimConfig sim;
  sim.seed = kSimSeedBase + s;
  const double onset = resolve_onset(gyro(), sim, 518);
  sim.onset_ms = onset;
  return {std::move(rgb), std::move(depth), sim, onset, frame_reference_times(sim, 518),
          segment(rebase(gyro(), onset), 0.0, sim.capture_span(518))};
}

// ---- AC1 -----------------------------------------------------------------------

void ac1() {
  const auto t0 = std::chrono::steady_clock::now();
  const CameraModel cam = camera();
  const QueryGrid grid = make_query_grid(cam, 12, 16);
  SceneConfig sc;
  sc.seed = kSceneSeedBase;
  const DepthMap depth = synth_scene(sc).second.filled();
  const RecoveryGeometry g(grid, depth, cam);
  const double l_on = on_axis_depth(depth, cam);
  std::vector<double> l_off(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) l_off[i] = depth.sample(grid.points[i].x, grid.points[i].y);
  const std::vector<double> conf(grid.size(), 1.0);

  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-kInversionMaxAngle, kInversionMaxAngle);
  double worst = 0.0;
  std::vector<Vec2> d(grid.size());
  for (int k = 0; k < kInversionDraws; ++k) {
    const RotationSample r{0.0, u(gen), u(gen), u(gen)};
    const DeltaModel model(r, l_on, cam);
    for (std::size_t i = 0; i < grid.size(); ++i) d[i] = model(grid.x(i), grid.y(i), l_off[i]);
    const FrameAngles a = recover_frame(d, conf, g);
    worst = std::max({worst, std::abs(a.alpha - r.alpha), std::abs(a.beta - r.beta), std::abs(a.gamma - r.gamma)});
  }
  const double t = seconds_since(t0);
  report("AC1", worst <= kInversionTol && t < kInversionSeconds,
         "noiseless inversion: " + std::to_string(kInversionDraws) + " draws, max angle error " + fmt("%.3g", worst) +
             " rad (limit 1e-6), " + fmt("%.2f", t) + " s (limit 10)");
}

// ---- AC2..AC4 ------------------------------------------------------------------

struct FixtureScores {
  double oracle_abs_rel = 0.0, oracle_e1 = 0.0;
  double tracked_abs_rel = 0.0, tracked_e1 = 0.0;
  double dense15 = 0.0, dense30 = 0.0;
};

void ac2_to_ac4() {
  const CameraModel cam = camera();
  const QueryGrid grid = make_query_grid(cam, 12, 16);
  std::vector<FixtureScores> scores(kFixtures);

  // Oracle path over every fixture; the criterion is stated for one segment,
  // every segment must meet it here.
  const auto t_oracle = std::chrono::steady_clock::now();
  std::vector<FixtureRun> runs;
  for (int s = 0; s < kFixtures; ++s) {
    runs.push_back(fixture(s));
    const FixtureRun& f = runs.back();
    const DeltaField field = oracle_deltas(f.gt, f.depth, cam, grid, f.times);
    const EvalReport r = evaluate(recover_trajectory(field, f.depth, grid, cam, f.times), f.gt);
    scores[s].oracle_abs_rel = r.abs_rel;
    scores[s].oracle_e1 = r.accuracy_at(0.10);
  }
  const double oracle_time = seconds_since(t_oracle) / kFixtures;
  double worst_abs = 0.0, worst_e1 = 1.0;
  for (const auto& s : scores) worst_abs = std::max(worst_abs, s.oracle_abs_rel), worst_e1 = std::min(worst_e1, s.oracle_e1);
  report("AC2", worst_abs <= kOracleAbsRel && worst_e1 >= kOracleE1 && oracle_time < kOracleSeconds,
         "oracle round trip 518x518, 625 points, 30 frames: worst AbsRel " + fmt("%.3g", worst_abs) +
             " (limit 0.02), worst e(0.10) " + fmt("%.3f", worst_e1) + " (limit 0.98), " + fmt("%.2f", oracle_time) +
             " s per segment (limit 30)");

  // Tracked path: render, track, recover.
  const auto t_tracked = std::chrono::steady_clock::now();
  for (int s = 0; s < kFixtures; ++s) {
    const FixtureRun& f = runs[s];
    const VideoFrames video = render_video(f.rgb, f.depth, gyro(), cam, f.sim, 0);
    TrackerConfig tc;
    tc.threads = 0;
    const DeltaField field = track_ncc(video, grid, tc);
    const Trajectory pred = recover_trajectory(field, f.depth, grid, cam, video.reference_times());
    const EvalReport r = evaluate(pred, f.gt);
    scores[s].tracked_abs_rel = r.abs_rel;
    scores[s].tracked_e1 = r.accuracy_at(0.10);
    scores[s].dense15 = evaluate(densify_linear(pred, 15), f.gt).abs_rel;
    scores[s].dense30 = evaluate(densify_linear(pred, 30), f.gt).abs_rel;
    std::printf("  fixture %d: oracle AbsRel %.3g e(0.10) %.3f | tracked AbsRel %.4f e(0.10) %.3f | densified AbsRel 15/frame %.4f 30/frame %.4f\n",
                s, scores[s].oracle_abs_rel, scores[s].oracle_e1, scores[s].tracked_abs_rel, scores[s].tracked_e1,
                scores[s].dense15, scores[s].dense30);
    std::fflush(stdout);
  }
  const double tracked_time = seconds_since(t_tracked);
  double mean_abs = 0.0, mean_e1 = 0.0;
  int ordered = 0;
  for (const auto& s : scores) {
    mean_abs += s.tracked_abs_rel / kFixtures;
    mean_e1 += s.tracked_e1 / kFixtures;
    if (s.oracle_abs_rel < s.tracked_abs_rel) ++ordered;
  }
  report("AC3",
         mean_abs <= kTrackedAbsRel && mean_e1 >= kTrackedE1 && ordered == kFixtures &&
             tracked_time < kTrackedSeconds,
         "tracked round trip over " + std::to_string(kFixtures) + " fixtures: mean AbsRel " + fmt("%.4f", mean_abs) +
             " (limit 0.10), mean e(0.10) " + fmt("%.3f", mean_e1) + " (limit 0.80), oracle < tracked on " +
             std::to_string(ordered) + "/" + std::to_string(kFixtures) + ", " + fmt("%.1f", tracked_time) +
             " s (limit 600)");

  int above_sparse = 0, denser_worse = 0;
  for (const auto& s : scores) {
    if (s.dense15 > s.tracked_abs_rel && s.dense30 > s.tracked_abs_rel) ++above_sparse;
    if (s.dense30 >= s.dense15) ++denser_worse;
  }
  report("AC4", above_sparse == kFixtures && denser_worse == kFixtures,
         "densified AbsRel above sparse on " + std::to_string(above_sparse) + "/" + std::to_string(kFixtures) +
             " fixtures, AbsRel(30/frame) >= AbsRel(15/frame) on " + std::to_string(denser_worse) + "/" +
             std::to_string(kFixtures));
}

// ---- AC5 -----------------------------------------------------------------------

// Tilt in one fixed rotation plane with a curved angle profile; the blur path
// of every point then runs along one line and its length scales with the
// point's delta gain.
void ac5() {
  const CameraModel cam = camera();
  const DepthMap flat(518, 518, 3000.0f);
  const double l_on = on_axis_depth(flat, cam);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < kBlurPairs; ++k) {
    const double phi = 2.0 * std::numbers::pi * unit(gen);
    const double amp = 1e-3 + 3e-3 * unit(gen);
    const double omega = 2.0 * std::numbers::pi * (0.5 + 6.0 * unit(gen)) * 1e-3;  // rad per ms
    const double phase = 2.0 * std::numbers::pi * unit(gen);
    const double drift = (unit(gen) - 0.5) * 2e-5;
    std::vector<RotationSample> samples;
    for (int i = 0; i <= 500; ++i) {
      const double t = 2.0 * i;
      const double theta = amp * std::sin(omega * t + phase) + drift * t;
      samples.push_back({t, theta * std::sin(phi), theta * std::cos(phi), 0.0});
    }
    const Trajectory traj(samples, TrajectoryLabel::DenseGroundTruth);
    const double t0 = 2.0 * std::floor(200.0 * unit(gen));
    const double t1 = t0 + 20.0 + 2.0 * std::floor(100.0 * unit(gen));
    double extent[2], gain[2];
    for (int p = 0; p < 2; ++p) {
      const double px = 500.0 * (unit(gen) - 0.5);
      const double py = 500.0 * (unit(gen) - 0.5);
      const double depth = 1500.0 + 4500.0 * unit(gen);
      extent[p] = compute_blur_extent(traj, cam, flat, FieldPoint::at(px, py, depth, cam), t0, t1);
      // Analytic delta of the same point for a small reference tilt in the plane.
      const double height = (px * std::cos(phi) + py * std::sin(phi)) * cam.pitch_mm() * depth / cam.focal_length_mm;
      gain[p] = std::abs(off_axis_delta(l_on, depth, height, 1e-4, cam));
    }
    const double measured = extent[0] / extent[1];
    const double analytic = gain[0] / gain[1];
    worst = std::max(worst, std::abs(measured / analytic - 1.0));
  }
  report("AC5", worst <= kBlurRatioTol,
         "blur-extent ratio vs analytic delta ratio over " + std::to_string(kBlurPairs) +
             " patch pairs: max relative deviation " + fmt("%.3g", worst) + " (limit 0.01)");
}

// ---- AC6 -----------------------------------------------------------------------

void ac6() {
  const CameraModel cam = camera();
  SceneConfig sc;
  sc.seed = kSceneSeedBase + 1;
  const auto [rgb, depth] = synth_scene(sc);
  SimConfig cfg;
  cfg.frames = 1;
  std::vector<RotationSample> zero;
  for (int i = 0; i <= 100; ++i) zero.push_back({2.0 * i, 0.0, 0.0, 0.0});
  const Image still = render_frame(rgb, depth, Trajectory(zero, TrajectoryLabel::DenseGroundTruth), cam, cfg, 0.0, 0);
  const bool identity = still == rgb;

  // Step halving on three frames of the gyro fixture.
  const FixtureRun f = fixture(2);
  const Trajectory rel = rebase(gyro(), f.onset);
  double worst = 0.0;
  for (int k : {0, 14, 29}) {
    SimConfig coarse = f.sim, fine = f.sim;
    coarse.integral_step_ms = 2.0;
    fine.integral_step_ms = 1.0;
    const double start = k * f.sim.frame_period(518);
    const Image a = render_frame(f.rgb, f.depth, rel, cam, coarse, start, 0);
    const Image b = render_frame(f.rgb, f.depth, rel, cam, fine, start, 0);
    for (std::size_t i = 0; i < a.data.size(); ++i)
      worst = std::max(worst, static_cast<double>(std::abs(a.data[i] - b.data[i])));
  }
  report("AC6", identity && worst < kStepHalvingTol,
         std::string("zero trajectory ") + (identity ? "bit-exact" : "NOT bit-exact") +
             "; halving the 2 ms step changes frames by at most " + fmt("%.3g", worst) + " (limit 1e-3)");
}

// ---- AC7 -----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Files of a run directory except the manifests, which carry wall times.
std::vector<std::pair<std::string, std::string>> run_contents(const fs::path& root) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name.size() > 14 && name.substr(name.size() - 14) == "_manifest.json") continue;
    out.emplace_back(fs::relative(e.path(), root).string(), slurp(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BLURCAM_CLI_PATH) + " " + args + " > /dev/null";
  return std::system(cmd.c_str());
}

void ac7() {
  std::vector<std::string> broken;
  const CameraModel cam = CameraModel::centered(4.25, 7.0, 160, 160);
  SceneConfig sc;
  sc.width = sc.height = 160;
  sc.seed = 7;
  const auto [rgb, depth] = synth_scene(sc);
  SimConfig cfg;
  cfg.frames = 4;
  cfg.seed = 3;
  const VideoFrames v1 = render_video(rgb, depth, gyro(), cam, cfg, 1);
  const VideoFrames v4 = render_video(rgb, depth, gyro(), cam, cfg, 4);
  const VideoFrames again = render_video(rgb, depth, gyro(), cam, cfg, 1);
  bool same = v1.frames == v4.frames && v1.frames == again.frames && v1.onset_ms == v4.onset_ms;
  for (int k = 0; k < cfg.frames; ++k)
    same = same && render_frame(rgb, depth, rebase(gyro(), v1.onset_ms), cam, cfg, v1.frame_start_times[k] - v1.onset_ms, 3) ==
                       v1.frames[k];
  if (!same) broken.push_back("simulate");

  const QueryGrid grid = make_query_grid(cam, 3, 40);
  TrackerConfig t1, t4;
  t4.threads = 4;
  const DeltaField d1 = track_ncc(v1, grid, t1);
  if (!(d1 == track_ncc(v4, grid, t4)) || !(d1 == track_ncc(v1, grid, t1))) broken.push_back("track");
  RecoveryConfig r1, r4;
  r4.threads = 4;
  const Trajectory p1 = recover_trajectory(d1, depth, grid, cam, v1.reference_times(), r1);
  const Trajectory p4 = recover_trajectory(d1, depth, grid, cam, v1.reference_times(), r4);
  if (p1.samples() != p4.samples()) broken.push_back("recover");
  const Trajectory gt = segment(rebase(gyro(), v1.onset_ms), 0.0, cfg.capture_span(160));
  if (to_json(evaluate(p1, gt)).dump() != to_json(evaluate(p4, gt)).dump()) broken.push_back("eval");
  if (densify_linear(p1, 30).samples() != densify_linear(p4, 30).samples()) broken.push_back("densify");

  // CLI batch under one and three jobs.
  const fs::path root = fs::temp_directory_path() / ("blurcam_ac7_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string r = root.string();
  bool cli_ok = run_cli("make-fixture --out " + r + "/data --count 3 --size 128 --seed 4 --duration-ms 4000") == 0;
  const std::string common = "batch --data-dir " + r + "/data --traj " + r +
                             "/data/gyro.csv --count 4 --seed 9 --frames 4 --resolution 128 --half-width 3 "
                             "--margin 40 --densify 15 ";
  cli_ok = cli_ok && run_cli(common + "--jobs 1 --out " + r + "/j1") == 0;
  cli_ok = cli_ok && run_cli(common + "--jobs 3 --out " + r + "/j3") == 0;
  const auto c1 = run_contents(root / "j1");
  const auto c3 = run_contents(root / "j3");
  if (!cli_ok || c1.empty() || c1 != c3) broken.push_back("batch --jobs");
  const std::size_t files = c1.size();
  fs::remove_all(root);

  std::string detail = "simulate, track, recover, densify, eval bit-identical across 1 and 4 threads; CLI batch "
                       "--jobs 1 vs 3 identical over " + std::to_string(files) + " output files";
  if (!broken.empty()) {
    detail = "not reproducible:";
    for (const auto& b : broken) detail += " " + b;
  }
  report("AC7", broken.empty(), detail);
}

// ---- AC8 -----------------------------------------------------------------------

void ac8() {
  const CameraModel cam = camera();
  const FixtureRun f = fixture(0);
  const Trajectory rel = rebase(gyro(), f.onset);
  auto t0 = std::chrono::steady_clock::now();
  (void)render_frame(f.rgb, f.depth, rel, cam, f.sim, 0.0, 1);
  const double frame_s = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  (void)render_video(f.rgb, f.depth, gyro(), cam, f.sim, 0);
  const double video_s = seconds_since(t0);
  report("AC8", frame_s < kFrameSeconds && video_s < kVideoSeconds,
         "518x518 frame at 2 ms quadrature: " + fmt("%.2f", frame_s) + " s single-threaded (limit 2); 30-frame video " +
             fmt("%.1f", video_s) + " s on " + std::to_string(resolve_threads(0)) + " threads (limit 60)");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void()>>> criteria{
      {"AC1", ac1}, {"AC2-AC4", ac2_to_ac4}, {"AC5", ac5}, {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}};
  for (const auto& [id, fn] : criteria) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, false, std::string("threw: ") + e.what());
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
