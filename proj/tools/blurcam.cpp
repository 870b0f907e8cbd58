// blurcam: simulate rolling-shutter blur videos, track query points, recover
// per-frame rotations and score them against the ground-truth trajectory.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "blurcam/blurcam.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace blurcam;

namespace {

constexpr const char* kToolVersion = "0.1.0";
constexpr const char* kSimSchema = "blurcam-sim-1";
constexpr const char* kBatchSchema = "blurcam-batch-1";

// An upstream stage has not produced the files this stage consumes.
class StageDependencyError : public DataError {
 public:
  using DataError::DataError;
  const char* kind() const noexcept override { return "stage_dependency"; }
};

void require_artifact(const fs::path& p, const char* producer) {
  if (!fs::is_regular_file(p))
    throw StageDependencyError("missing '" + p.string() + "'; run '" + producer + "' first");
}

std::string sha256_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw DataError("cannot read '" + p.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
  std::vector<char> buf(1 << 16);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (is.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot open '" + p.string() + "' for writing");
  os << j.dump(2) << '\n';
}

json read_json(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw DataError("cannot open '" + p.string() + "'");
  try {
    return json::parse(is);
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError("'" + p.string() + "': " + ex.what());
  }
}

// Records what a run consumed and produced; written as <subcommand>_manifest.json
// in the directory holding the outputs.
class RunManifest {
 public:
  explicit RunManifest(std::string subcommand)
      : subcommand_(std::move(subcommand)), start_(std::chrono::steady_clock::now()) {}

  json config = json::object();

  void input(const fs::path& p) { inputs_[p.string()] = sha256_file(p); }
  void output(const fs::path& p) { outputs_.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}}); }

  fs::path write(const fs::path& dir) const {
    json j;
    j["tool"] = "blurcam";
    j["version"] = kToolVersion;
    j["subcommand"] = subcommand_;
    j["config"] = config;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const fs::path p = dir / (subcommand_ + "_manifest.json");
    write_json(p, j);
    return p;
  }

 private:
  std::string subcommand_;
  std::chrono::steady_clock::time_point start_;
  json inputs_ = json::object();
  json outputs_ = json::array();
};

fs::path parent_or_cwd(const fs::path& p) {
  const fs::path d = p.parent_path();
  return d.empty() ? fs::path(".") : d;
}

void ensure_dir(const fs::path& d) {
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw DataError("cannot create directory '" + d.string() + "': " + ec.message());
}

json camera_to_json(const CameraModel& c) {
  return {{"focal_length_mm", c.focal_length_mm}, {"pixel_pitch_um", c.pixel_pitch_um},
          {"cx", c.cx},                           {"cy", c.cy},
          {"width", c.width},                     {"height", c.height},
          {"kind", to_string(c.kind)}};
}

CameraModel camera_from_json(const json& j) {
  try {
    CameraModel c{j.at("focal_length_mm").get<double>(), j.at("pixel_pitch_um").get<double>(),
                  j.at("cx").get<double>(),              j.at("cy").get<double>(),
                  j.at("width").get<int>(),              j.at("height").get<int>(),
                  camera_kind_from_string(j.at("kind").get<std::string>())};
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("camera model: ") + ex.what());
  } catch (const ArgumentError& ex) {
    throw FormatError(std::string("camera model: ") + ex.what());
  }
}

std::string frame_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04d.png", k + 1);
  return buf;
}

// ---- Simulation run directory ------------------------------------------------

// Everything later stages read from a simulate output directory.
struct SimRun {
  fs::path dir;
  CameraModel camera;
  SimConfig config;
  double onset_ms = 0.0;
  std::vector<double> frame_start_times;
  std::vector<double> reference_times;
  std::vector<std::string> frames;

  fs::path manifest_path() const { return dir / "sim_manifest.json"; }
  fs::path depth_path() const { return dir / "depth.bcdm"; }
  fs::path gt_path() const { return dir / "gt_dense.csv"; }
};

SimRun load_sim_run(const fs::path& dir) {
  SimRun r;
  r.dir = dir;
  require_artifact(r.manifest_path(), "simulate");
  const json j = read_json(r.manifest_path());
  try {
    if (j.at("schema").get<std::string>() != kSimSchema) throw FormatError("unsupported sim manifest schema");
    r.camera = camera_from_json(j.at("camera"));
    const json& c = j.at("config");
    r.config.exposure_ms = c.at("exposure_ms").get<double>();
    r.config.row_transfer_us = c.at("row_transfer_us").get<double>();
    r.config.frames = c.at("frames").get<int>();
    r.config.seed = c.at("seed").get<std::uint64_t>();
    if (!c.at("integral_step_ms").is_null()) r.config.integral_step_ms = c.at("integral_step_ms").get<double>();
    r.onset_ms = j.at("onset_ms").get<double>();
    r.config.onset_ms = r.onset_ms;
    r.frame_start_times = j.at("frame_start_times").get<std::vector<double>>();
    r.reference_times = j.at("reference_times").get<std::vector<double>>();
    r.frames = j.at("frames").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError("'" + r.manifest_path().string() + "': " + ex.what());
  }
  if (r.frames.size() != r.reference_times.size() || static_cast<int>(r.frames.size()) != r.config.frames)
    throw FormatError("'" + r.manifest_path().string() + "': frame lists disagree with the config");
  return r;
}

// ---- Stages ------------------------------------------------------------------

struct SimulateArgs {
  std::string rgb;
  std::string depth;
  std::string camera;  // dataset camera.json; empty uses the defaults
  std::string traj;
  std::string out;
  int frames = 30;
  double exposure_ms = 60.0;
  double row_transfer_us = 4.0;
  std::optional<double> onset_ms;
  std::optional<double> step_ms;
  std::uint64_t seed = 0;
  int resolution = kStandardResolution;
  unsigned threads = 1;
};

void run_simulate(const SimulateArgs& a) {
  RunManifest m("simulate");
  const DatasetCamera dcam = a.camera.empty() ? DatasetCamera{} : load_dataset_camera(a.camera);
  if (a.resolution < 3) throw ArgumentError("--resolution must be >= 3");
  const Scene scene = load_scene(a.rgb, a.depth, dcam, a.resolution);
  const Trajectory traj = read_trajectory_csv(a.traj, TrajectoryLabel::DenseGroundTruth);

  SimConfig cfg;
  cfg.frames = a.frames;
  cfg.exposure_ms = a.exposure_ms;
  cfg.row_transfer_us = a.row_transfer_us;
  cfg.onset_ms = a.onset_ms;
  cfg.integral_step_ms = a.step_ms;
  cfg.seed = a.seed;
  const VideoFrames video = render_video(scene.rgb, scene.depth, traj, scene.camera, cfg, a.threads);

  const fs::path out(a.out);
  ensure_dir(out);
  std::vector<std::string> names;
  for (int k = 0; k < cfg.frames; ++k) {
    names.push_back(frame_name(k));
    save_png((out / names.back()).string(), video.frames[k]);
  }
  const fs::path depth_out = out / "depth.bcdm";
  save_depth_bcdm(depth_out.string(), scene.depth);
  // Ground truth for the captured span, in the video's time base and rotation
  // reference (zero at the onset).
  const double span = cfg.capture_span(scene.camera.height);
  const Trajectory gt = segment(rebase(traj, video.onset_ms), 0.0, span);
  const fs::path gt_out = out / "gt_dense.csv";
  write_trajectory_csv(gt_out.string(), gt);

  json c;
  c["exposure_ms"] = cfg.exposure_ms;
  c["row_transfer_us"] = cfg.row_transfer_us;
  c["frames"] = cfg.frames;
  c["onset_ms"] = video.onset_ms;
  c["integral_step_ms"] = a.step_ms ? json(*a.step_ms) : json(nullptr);
  c["effective_step_ms"] = cfg.step_for(traj);
  c["seed"] = cfg.seed;
  c["frame_period_ms"] = cfg.frame_period(scene.camera.height);
  json sim;
  sim["schema"] = kSimSchema;
  sim["config"] = c;
  sim["onset_ms"] = video.onset_ms;
  sim["frame_start_times"] = video.frame_start_times;
  sim["reference_times"] = video.reference_times();
  sim["camera"] = camera_to_json(scene.camera);
  sim["frames"] = names;
  sim["depth"] = "depth.bcdm";
  sim["ground_truth"] = "gt_dense.csv";
  const fs::path sim_out = out / "sim_manifest.json";
  write_json(sim_out, sim);

  m.config = c;
  m.config["resolution"] = a.resolution;
  m.config["threads"] = a.threads;
  m.config["dataset_camera"] = to_json(dcam);
  m.input(a.rgb);
  m.input(a.depth);
  if (!a.camera.empty()) m.input(a.camera);
  m.input(a.traj);
  for (const auto& n : names) m.output(out / n);
  m.output(depth_out);
  m.output(gt_out);
  m.output(sim_out);
  m.write(out);
}

struct GridArgs {
  int half_width = 12;
  double margin = 16.0;
};

struct TrackArgs {
  std::string run;
  std::string out;  // default <run>/deltas.csv
  bool oracle = false;
  GridArgs grid;
  int patch_px = 21;
  int search_px = 24;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

fs::path run_track(const TrackArgs& a) {
  RunManifest m("track");
  const SimRun run = load_sim_run(a.run);
  const QueryGrid grid = make_query_grid(run.camera, a.grid.half_width, a.grid.margin);
  DeltaField field;
  m.input(run.manifest_path());
  if (a.oracle) {
    require_artifact(run.gt_path(), "simulate");
    require_artifact(run.depth_path(), "simulate");
    const Trajectory gt = read_trajectory_csv(run.gt_path().string(), TrajectoryLabel::DenseGroundTruth);
    const DepthMap depth = load_depth(run.depth_path().string());
    field = oracle_deltas(gt, depth, run.camera, grid, run.reference_times);
    m.input(run.gt_path());
    m.input(run.depth_path());
  } else {
    std::vector<Image> frames;
    for (const auto& n : run.frames) {
      const fs::path p = run.dir / n;
      require_artifact(p, "simulate");
      frames.push_back(load_rgb(p.string()));
      m.input(p);
    }
    TrackerConfig tc;
    tc.patch_px = a.patch_px;
    tc.search_px = a.search_px;
    tc.threads = a.threads;
    field = track_ncc(frames, grid, tc);
  }
  const fs::path out = a.out.empty() ? run.dir / "deltas.csv" : fs::path(a.out);
  ensure_dir(parent_or_cwd(out));
  write_delta_csv(out.string(), field);

  m.config = {{"method", a.oracle ? "oracle" : "ncc"},
              {"half_width", a.grid.half_width},
              {"margin_px", a.grid.margin},
              {"spacing_px", grid.spacing},
              {"points", grid.size()},
              {"patch_px", a.patch_px},
              {"search_px", a.search_px},
              {"seed", a.seed},
              {"threads", a.threads}};
  m.output(out);
  m.write(parent_or_cwd(out));
  return out;
}

struct RecoverArgs {
  std::string run;
  std::string deltas;  // default <run>/deltas.csv
  std::string out;     // default <run>/pred_sparse.csv
  GridArgs grid;
  double min_confidence = 0.0;
  bool uniform_weights = false;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

fs::path run_recover(const RecoverArgs& a) {
  RunManifest m("recover");
  const SimRun run = load_sim_run(a.run);
  const fs::path deltas = a.deltas.empty() ? run.dir / "deltas.csv" : fs::path(a.deltas);
  require_artifact(deltas, "track");
  require_artifact(run.depth_path(), "simulate");
  // A grid that disagrees with the one the deltas were tracked on would pair
  // deltas with the wrong field positions.
  const fs::path track_manifest = parent_or_cwd(deltas) / "track_manifest.json";
  if (fs::is_regular_file(track_manifest)) {
    const json tm = read_json(track_manifest);
    if (tm.contains("config") && tm["config"].contains("half_width") && tm["config"].contains("margin_px") &&
        (tm["config"]["half_width"].get<int>() != a.grid.half_width ||
         tm["config"]["margin_px"].get<double>() != a.grid.margin))
      throw ArgumentError("grid (--half-width " + std::to_string(a.grid.half_width) + ", --margin " +
                          format_double(a.grid.margin) + ") differs from the one recorded in '" +
                          track_manifest.string() + "'");
  }
  std::ifstream is(deltas, std::ios::binary);
  if (!is) throw DataError("cannot open '" + deltas.string() + "'");
  const DeltaField field = read_delta_csv(is, deltas.string());
  const DepthMap depth = load_depth(run.depth_path().string());
  const QueryGrid grid = make_query_grid(run.camera, a.grid.half_width, a.grid.margin);
  if (field.num_points != static_cast<int>(grid.size()))
    throw ArgumentError("deltas have " + std::to_string(field.num_points) + " points but --half-width " +
                        std::to_string(a.grid.half_width) + " gives " + std::to_string(grid.size()));
  RecoveryConfig rc;
  rc.min_confidence = a.min_confidence;
  rc.taper = !a.uniform_weights;
  rc.threads = a.threads;
  const Trajectory pred = recover_trajectory(field, depth, grid, run.camera, run.reference_times, rc);

  const fs::path out = a.out.empty() ? run.dir / "pred_sparse.csv" : fs::path(a.out);
  ensure_dir(parent_or_cwd(out));
  write_trajectory_csv(out.string(), pred);
  m.config = {{"half_width", a.grid.half_width},
              {"margin_px", a.grid.margin},
              {"points", grid.size()},
              {"min_confidence", a.min_confidence},
              {"weights", a.uniform_weights ? "uniform" : "taper"},
              {"seed", a.seed},
              {"threads", a.threads}};
  m.input(run.manifest_path());
  m.input(deltas);
  m.input(run.depth_path());
  m.output(out);
  m.write(parent_or_cwd(out));
  return out;
}

struct DensifyArgs {
  std::string in;
  std::string out;
  int samples_per_frame = 30;
  std::uint64_t seed = 0;
};

void run_densify(const DensifyArgs& a) {
  RunManifest m("densify");
  require_artifact(a.in, "recover");
  const Trajectory sparse = read_trajectory_csv(a.in, TrajectoryLabel::SparsePerFrame);
  const Trajectory dense = densify_linear(sparse, a.samples_per_frame);
  const fs::path out(a.out);
  ensure_dir(parent_or_cwd(out));
  write_trajectory_csv(out.string(), dense);
  m.config = {{"samples_per_frame", a.samples_per_frame}, {"seed", a.seed}};
  m.input(a.in);
  m.output(out);
  m.write(parent_or_cwd(out));
}

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string out;
  std::string pred_label = "SparsePerFrame";
  std::vector<double> thresholds{0.10, 0.25};
  double epsilon = 1e-6;
  double cap = 10.0;
  std::uint64_t seed = 0;
};

std::string summary_line(const EvalReport& r) {
  std::ostringstream os;
  os << "abs_rel " << format_double(r.abs_rel);
  for (const auto& [t, v] : r.e) os << "  e(" << format_double(t) << ") " << format_double(v);
  os << "  l1_mean " << format_double(r.l1_mean) << "  samples " << r.samples << "  pred " << r.pred_label;
  return os.str();
}

EvalReport run_eval(const EvalArgs& a, bool print = true) {
  RunManifest m("eval");
  require_artifact(a.pred, "recover");
  require_artifact(a.gt, "simulate");
  const Trajectory pred = read_trajectory_csv(a.pred, trajectory_label_from_string(a.pred_label));
  const Trajectory gt = read_trajectory_csv(a.gt, TrajectoryLabel::DenseGroundTruth);
  MetricsConfig mc;
  mc.epsilon = a.epsilon;
  mc.cap = a.cap;
  mc.thresholds = a.thresholds;
  if (mc.thresholds.empty()) throw ArgumentError("at least one --tau is required");
  const EvalReport rep = evaluate(pred, gt, mc);
  const fs::path out = a.out.empty() ? parent_or_cwd(a.pred) / "eval_report.json" : fs::path(a.out);
  ensure_dir(parent_or_cwd(out));
  write_json(out, to_json(rep));
  if (print) std::cout << summary_line(rep) << '\n';
  m.config = {{"pred_label", a.pred_label},
              {"thresholds", rep.config.thresholds},
              {"epsilon", a.epsilon},
              {"cap", a.cap},
              {"seed", a.seed}};
  m.input(a.pred);
  m.input(a.gt);
  m.output(out);
  m.write(parent_or_cwd(out));
  return rep;
}

struct PlotArgs {
  std::string gt;
  std::string sparse;
  std::string dense;
  std::string title;
  std::string out;
  std::uint64_t seed = 0;
};

void run_plot(const PlotArgs& a) {
  RunManifest m("plot");
  std::vector<Trajectory> trajs;
  trajs.reserve(3);
  std::vector<PlotSeries> series;
  auto add = [&](const std::string& path, const char* label, TrajectoryLabel l, SeriesStyle style,
                 const char* color) {
    if (path.empty()) return;
    if (!fs::is_regular_file(path)) throw DataError("cannot open '" + path + "'");
    trajs.push_back(read_trajectory_csv(path, l));
    series.push_back({label, &trajs.back(), style, color});
    m.input(path);
  };
  add(a.gt, "ground truth", TrajectoryLabel::DenseGroundTruth, SeriesStyle::Line, "#333333");
  add(a.dense, "densified", TrajectoryLabel::Densified, SeriesStyle::Dashed, "#1f77b4");
  add(a.sparse, "per frame", TrajectoryLabel::SparsePerFrame, SeriesStyle::Markers, "#d62728");
  if (series.empty()) throw DataError("plot: no input trajectories (give --gt, --sparse or --dense)");
  const fs::path out(a.out);
  ensure_dir(parent_or_cwd(out));
  write_svg(out.string(), render_trajectory_svg(series, a.title));
  m.config = {{"title", a.title}, {"series", series.size()}, {"seed", a.seed}};
  m.output(out);
  m.write(parent_or_cwd(out));
}

struct BatchArgs {
  std::optional<std::string> data_dir;
  std::string traj;
  std::string out;
  int count = 10;
  unsigned jobs = 1;
  bool oracle = false;
  std::vector<int> densify;
  SimulateArgs sim;
  GridArgs grid;
  double min_confidence = 0.0;
};

json report_entry(const EvalReport& r) {
  json j;
  j["abs_rel"] = r.abs_rel;
  for (const auto& [t, v] : r.e) j["e(" + format_double(t) + ")"] = v;
  j["l1_mean"] = r.l1_mean;
  return j;
}

// Runs the whole chain per scenario. Scenarios are independent, so they are
// spread over --jobs workers; each worker runs its stages single-threaded and
// the summary is assembled in scenario order.
void run_batch(const BatchArgs& a) {
  RunManifest m("batch");
  if (a.jobs < 1) throw ArgumentError("--jobs must be >= 1");
  const std::string data_dir = resolve_dataset_dir(a.data_dir);
  const Trajectory traj = read_trajectory_csv(a.traj, TrajectoryLabel::DenseGroundTruth);
  SimConfig sc;
  sc.frames = a.sim.frames;
  sc.exposure_ms = a.sim.exposure_ms;
  sc.row_transfer_us = a.sim.row_transfer_us;
  sc.integral_step_ms = a.sim.step_ms;
  const auto scenarios = build_scenarios(data_dir, traj, a.count, a.sim.seed, sc, a.sim.resolution);
  const fs::path out(a.out);
  ensure_dir(out);

  std::vector<json> entries(scenarios.size());
  parallel_for(scenarios.size(), a.jobs, [&](std::size_t k) {
    const Scenario& s = scenarios[k];
    const fs::path dir = out / s.name;
    SimulateArgs sa = a.sim;
    sa.rgb = s.rgb_path;
    sa.depth = s.depth_path;
    sa.camera = (fs::path(data_dir) / "camera.json").string();
    sa.traj = a.traj;
    sa.out = dir.string();
    sa.onset_ms = s.onset_ms();
    sa.seed = s.seed;
    sa.threads = 1;
    run_simulate(sa);

    TrackArgs ta;
    ta.run = dir.string();
    ta.oracle = a.oracle;
    ta.grid = a.grid;
    ta.seed = s.seed;
    run_track(ta);

    RecoverArgs ra;
    ra.run = dir.string();
    ra.grid = a.grid;
    ra.min_confidence = a.min_confidence;
    ra.seed = s.seed;
    const fs::path sparse = run_recover(ra);

    EvalArgs ea;
    ea.pred = sparse.string();
    ea.gt = (dir / "gt_dense.csv").string();
    ea.out = (dir / "eval_sparse.json").string();
    ea.seed = s.seed;
    json entry;
    entry["name"] = s.name;
    entry["rgb"] = s.rgb_path;
    entry["onset_ms"] = s.onset_ms();
    entry["seed"] = s.seed;
    entry["sparse"] = report_entry(run_eval(ea, false));
    for (int spf : a.densify) {
      DensifyArgs da;
      da.in = sparse.string();
      da.out = (dir / ("pred_dense_" + std::to_string(spf) + ".csv")).string();
      da.samples_per_frame = spf;
      da.seed = s.seed;
      run_densify(da);
      EvalArgs de = ea;
      de.pred = da.out;
      de.pred_label = "Densified";
      de.out = (dir / ("eval_dense_" + std::to_string(spf) + ".json")).string();
      entry["densified_" + std::to_string(spf)] = report_entry(run_eval(de, false));
    }
    entries[k] = entry;
  });

  json mean;
  for (const char* key : {"abs_rel", "e(0.1)", "e(0.25)", "l1_mean"}) {
    double sum = 0.0;
    for (const auto& e : entries) sum += e["sparse"][key].get<double>();
    mean[key] = sum / static_cast<double>(entries.size());
  }
  json summary;
  summary["schema"] = kBatchSchema;
  summary["method"] = a.oracle ? "oracle" : "ncc";
  summary["scenarios"] = entries;
  summary["mean_sparse"] = mean;
  const fs::path summary_path = out / "batch_summary.json";
  write_json(summary_path, summary);
  std::cout << "scenarios " << entries.size() << "  mean abs_rel " << format_double(mean["abs_rel"].get<double>())
            << "  mean e(0.1) " << format_double(mean["e(0.1)"].get<double>()) << '\n';

  json layout = json::array();
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(a.jobs, scenarios.size()));
  for (std::size_t k = 0; k < scenarios.size(); ++k)
    layout.push_back({{"scenario", scenarios[k].name}, {"worker", k % std::max(1u, workers)}});
  m.config = {{"data_dir", data_dir},    {"count", a.count},
              {"seed", a.sim.seed},      {"jobs", a.jobs},
              {"workers", workers},      {"method", a.oracle ? "oracle" : "ncc"},
              {"frames", a.sim.frames},  {"exposure_ms", a.sim.exposure_ms},
              {"row_transfer_us", a.sim.row_transfer_us},
              {"resolution", a.sim.resolution},
              {"half_width", a.grid.half_width},
              {"margin_px", a.grid.margin},
              {"min_confidence", a.min_confidence},
              {"densify", a.densify},    {"job_layout", layout}};
  m.input(a.traj);
  m.output(summary_path);
  m.write(out);
}

struct FixtureArgs {
  std::string out;
  int count = 2;
  int size = kStandardResolution;
  std::uint64_t seed = 0;
  double duration_ms = 67140.0;
  bool still = false;
  double focal_mm = 4.25;
  double pitch_um = 7.0;
};

// Synthetic dataset: textured RGB-D scenes, camera.json and a gyro trajectory.
void run_make_fixture(const FixtureArgs& a) {
  RunManifest m("make-fixture");
  if (a.count < 1) throw ArgumentError("--count must be >= 1");
  const fs::path out(a.out);
  ensure_dir(out / "rgb");
  ensure_dir(out / "depth");
  std::mt19937_64 gen(a.seed);
  for (int k = 0; k < a.count; ++k) {
    SceneConfig sc;
    sc.width = a.size;
    sc.height = a.size;
    sc.seed = gen();
    const auto [rgb, depth] = synth_scene(sc);
    const std::string name = "scene" + std::to_string(k);
    const fs::path rp = out / "rgb" / (name + ".png");
    const fs::path dp = out / "depth" / (name + ".bcdm");
    save_png(rp.string(), rgb);
    save_depth_bcdm(dp.string(), depth);
    m.output(rp);
    m.output(dp);
  }
  DatasetCamera cam;
  cam.focal_mm = a.focal_mm;
  cam.pixel_pitch_um = a.pitch_um;
  const fs::path cp = out / "camera.json";
  write_json(cp, to_json(cam));
  GyroConfig gc;
  gc.duration_ms = a.duration_ms;
  gc.seed = gen();
  Trajectory traj = synth_gyro(gc);
  if (a.still) {
    std::vector<RotationSample> zero;
    for (const auto& s : traj.samples()) zero.push_back({s.t, 0.0, 0.0, 0.0});
    traj = Trajectory(std::move(zero), TrajectoryLabel::DenseGroundTruth);
  }
  const fs::path gp = out / "gyro.csv";
  write_trajectory_csv(gp.string(), traj);
  m.output(cp);
  m.output(gp);
  m.config = {{"count", a.count},        {"size", a.size},         {"seed", a.seed},
              {"duration_ms", a.duration_ms}, {"still", a.still}, {"camera", to_json(cam)}};
  m.write(out);
}

// ---- Errors -------------------------------------------------------------------

int exit_code_for(const Error& e) {
  if (dynamic_cast<const ArgumentError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const NumericError*>(&e)) return 4;
  return 1;
}

int report_error(const std::string& subcommand, const std::string& kind, const std::string& message, int code) {
  json j;
  j["error"] = kind;
  j["message"] = message;
  j["subcommand"] = subcommand;
  j["exit_code"] = code;
  std::cerr << j.dump() << '\n';
  return code;
}

void add_seed(CLI::App* cmd, std::uint64_t& seed) {
  cmd->add_option("--seed", seed, "Seed recorded with the run; drives every random draw")->capture_default_str();
}

void add_grid(CLI::App* cmd, GridArgs& g) {
  cmd->add_option("--half-width", g.half_width, "Query grid half width i; (2i+1)^2 points")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--margin", g.margin, "Query grid margin from the image border, px")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

void add_sim_options(CLI::App* cmd, SimulateArgs& s) {
  cmd->add_option("--frames", s.frames, "Number of frames")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--exposure-ms", s.exposure_ms, "Per-row exposure, ms")->capture_default_str();
  cmd->add_option("--row-transfer-us", s.row_transfer_us, "Row readout delay, us")->capture_default_str();
  cmd->add_option("--step-ms", s.step_ms, "Exposure quadrature step, ms (default: trajectory interval)");
  cmd->add_option("--resolution", s.resolution, "Square working resolution, px")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rolling-shutter blur simulation and camera rotation recovery"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  std::function<void()> action;

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Render a blurred rolling-shutter video from an RGB-D frame");
  c_sim->add_option("--rgb", sim.rgb, "RGB PNG")->required()->check(CLI::ExistingFile);
  c_sim->add_option("--depth", sim.depth, "Depth map (.bcdm or 16-bit PNG)")->required()->check(CLI::ExistingFile);
  c_sim->add_option("--camera", sim.camera, "Dataset camera.json (default optics when omitted)")
      ->check(CLI::ExistingFile);
  c_sim->add_option("--traj", sim.traj, "Dense gyro trajectory CSV")->required()->check(CLI::ExistingFile);
  c_sim->add_option("--out", sim.out, "Output run directory")->required();
  add_sim_options(c_sim, sim);
  c_sim->add_option("--onset-ms", sim.onset_ms, "Capture onset in trajectory time (drawn from --seed if omitted)");
  c_sim->add_option("--threads", sim.threads, "Worker threads (0 = all cores)")->capture_default_str();
  add_seed(c_sim, sim.seed);
  c_sim->callback([&] { action = [&] { run_simulate(sim); }; });

  TrackArgs trk;
  auto* c_trk = app.add_subcommand("track", "Measure per-frame deltas of the query grid");
  c_trk->add_option("--run", trk.run, "simulate output directory")->required();
  c_trk->add_option("--out", trk.out, "Delta CSV (default <run>/deltas.csv)");
  c_trk->add_flag("--oracle", trk.oracle, "Use analytic deltas from the ground-truth trajectory");
  add_grid(c_trk, trk.grid);
  c_trk->add_option("--patch", trk.patch_px, "Template side, px (odd)")->capture_default_str();
  c_trk->add_option("--search", trk.search_px, "Search radius, px")->capture_default_str();
  c_trk->add_option("--threads", trk.threads, "Worker threads (0 = all cores)")->capture_default_str();
  add_seed(c_trk, trk.seed);
  c_trk->callback([&] { action = [&] { run_track(trk); }; });

  RecoverArgs rec;
  auto* c_rec = app.add_subcommand("recover", "Recover per-frame roll, yaw and pitch from deltas");
  c_rec->add_option("--run", rec.run, "simulate output directory")->required();
  c_rec->add_option("--deltas", rec.deltas, "Delta CSV (default <run>/deltas.csv)");
  c_rec->add_option("--out", rec.out, "Sparse trajectory CSV (default <run>/pred_sparse.csv)");
  add_grid(c_rec, rec.grid);
  c_rec->add_option("--min-confidence", rec.min_confidence, "Ignore points below this confidence")
      ->capture_default_str();
  c_rec->add_flag("--uniform-weights", rec.uniform_weights, "Weight all points equally");
  c_rec->add_option("--threads", rec.threads, "Worker threads (0 = all cores)")->capture_default_str();
  add_seed(c_rec, rec.seed);
  c_rec->callback([&] { action = [&] { run_recover(rec); }; });

  DensifyArgs den;
  auto* c_den = app.add_subcommand("densify", "Linearly upsample a per-frame trajectory");
  c_den->add_option("--in", den.in, "Sparse trajectory CSV")->required();
  c_den->add_option("--out", den.out, "Densified trajectory CSV")->required();
  c_den->add_option("--samples-per-frame", den.samples_per_frame, "Samples per inter-frame interval")
      ->capture_default_str();
  add_seed(c_den, den.seed);
  c_den->callback([&] { action = [&] { run_densify(den); }; });

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Score a predicted trajectory against ground truth");
  c_ev->add_option("--pred", ev.pred, "Predicted trajectory CSV")->required();
  c_ev->add_option("--gt", ev.gt, "Dense ground-truth CSV")->required();
  c_ev->add_option("--out", ev.out, "EvalReport JSON (default <pred dir>/eval_report.json)");
  c_ev->add_option("--pred-label", ev.pred_label, "Label of the prediction")
      ->check(CLI::IsMember({"SparsePerFrame", "Densified"}))
      ->capture_default_str();
  c_ev->add_option("--tau", ev.thresholds, "Accuracy thresholds")->capture_default_str();
  c_ev->add_option("--epsilon", ev.epsilon, "Floor on |gt| in the relative error, rad")->capture_default_str();
  c_ev->add_option("--cap", ev.cap, "Upper bound on one relative error")->capture_default_str();
  add_seed(c_ev, ev.seed);
  c_ev->callback([&] { action = [&] { run_eval(ev); }; });

  PlotArgs plt;
  auto* c_plt = app.add_subcommand("plot", "Draw trajectories as an SVG with one panel per axis");
  c_plt->add_option("--gt", plt.gt, "Dense ground-truth CSV");
  c_plt->add_option("--sparse", plt.sparse, "Per-frame trajectory CSV");
  c_plt->add_option("--dense", plt.dense, "Densified trajectory CSV");
  c_plt->add_option("--title", plt.title, "Chart title");
  c_plt->add_option("--out", plt.out, "SVG path")->required();
  add_seed(c_plt, plt.seed);
  c_plt->callback([&] { action = [&] { run_plot(plt); }; });

  BatchArgs bat;
  auto* c_bat = app.add_subcommand("batch", "Run the full chain over scenarios drawn from a dataset");
  c_bat->add_option("--data-dir", bat.data_dir, "Dataset root (default $BLURCAM_DATA_DIR)");
  c_bat->add_option("--traj", bat.traj, "Dense gyro trajectory CSV")->required()->check(CLI::ExistingFile);
  c_bat->add_option("--out", bat.out, "Output directory")->required();
  c_bat->add_option("--count", bat.count, "Number of scenarios")->capture_default_str();
  c_bat->add_option("--jobs", bat.jobs, "Scenarios run in parallel")->capture_default_str();
  c_bat->add_flag("--oracle", bat.oracle, "Use analytic deltas instead of tracking");
  c_bat->add_option("--densify", bat.densify, "Also score densified estimates at these samples per frame");
  add_sim_options(c_bat, bat.sim);
  add_grid(c_bat, bat.grid);
  c_bat->add_option("--min-confidence", bat.min_confidence, "Ignore points below this confidence")
      ->capture_default_str();
  add_seed(c_bat, bat.sim.seed);
  c_bat->callback([&] { action = [&] { run_batch(bat); }; });

  FixtureArgs fix;
  auto* c_fix = app.add_subcommand("make-fixture", "Write a synthetic RGB-D dataset and gyro trajectory");
  c_fix->add_option("--out", fix.out, "Dataset directory")->required();
  c_fix->add_option("--count", fix.count, "Number of scenes")->capture_default_str();
  c_fix->add_option("--size", fix.size, "Scene side, px")->capture_default_str();
  c_fix->add_option("--duration-ms", fix.duration_ms, "Trajectory length, ms")->capture_default_str();
  c_fix->add_flag("--still", fix.still, "Write a zero trajectory");
  c_fix->add_option("--focal-mm", fix.focal_mm, "Focal length, mm")->capture_default_str();
  c_fix->add_option("--pitch-um", fix.pitch_um, "Native pixel pitch, um")->capture_default_str();
  add_seed(c_fix, fix.seed);
  c_fix->callback([&] { action = [&] { run_make_fixture(fix); }; });

  std::string sub;
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    for (const auto* s : app.get_subcommands()) sub = s->get_name();
    return report_error(sub, "argument", e.what(), 2);
  }
  sub = app.get_subcommands().front()->get_name();
  try {
    action();
  } catch (const Error& e) {
    return report_error(sub, e.kind(), e.what(), exit_code_for(e));
  } catch (const std::exception& e) {
    return report_error(sub, "internal", e.what(), 1);
  }
  return 0;
}
