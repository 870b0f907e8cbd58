#pragma once

// Dataset ingestion: RGB and depth rasters, camera.json, and seeded
// simulation scenarios.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "blurcam/error.hpp"
#include "blurcam/geometry.hpp"
#include "blurcam/image.hpp"
#include "blurcam/png_io.hpp"
#include "blurcam/simulator.hpp"
#include "blurcam/trajectory.hpp"

namespace blurcam {

inline constexpr int kStandardResolution = 518;
inline constexpr double kDefaultDepthScale = 0.001;  // meters per raw unit

// ---- RGB ------------------------------------------------------------------

// 8- or 16-bit PNG to a 3-channel float image in [0, 1]; gray is replicated,
// alpha dropped. Values are mapped linearly (no gamma decode).
inline Image load_rgb(const std::string& path) {
  const RawPng raw = read_png(path);
  Image img(raw.width, raw.height, 3);
  const float scale = 1.0f / static_cast<float>(raw.max_value());
  const bool color = raw.channels >= 3;
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * raw.width + x) * raw.channels;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = raw.samples[base + (color ? c : 0)] * scale;
    }
  return img;
}

// ---- Depth ----------------------------------------------------------------

namespace detail {

inline void put_u32le(unsigned char* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "'");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace detail

// BCDM stores millimeters, so save_depth_bcdm and load_depth(path, 0.001)
// round-trip bit-identically.
inline void save_depth_bcdm(const std::string& path, const DepthMap& depth) {
  std::vector<unsigned char> bytes(16 + depth.mm.size() * 4);
  std::memcpy(bytes.data(), "BCDM", 4);
  detail::put_u32le(bytes.data() + 4, static_cast<std::uint32_t>(depth.width));
  detail::put_u32le(bytes.data() + 8, static_cast<std::uint32_t>(depth.height));
  detail::put_u32le(bytes.data() + 12, 0);
  for (std::size_t i = 0; i < depth.mm.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, &depth.mm[i], 4);
    detail::put_u32le(bytes.data() + 16 + 4 * i, bits);
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("write failed for '" + path + "'");
}

// 16-bit gray PNG: raw = round(mm / (1000 * depth_scale)); invalid pixels become 0.
inline void save_depth_png(const std::string& path, const DepthMap& depth, double depth_scale = kDefaultDepthScale) {
  if (!(depth_scale > 0.0)) throw ArgumentError("depth_scale must be > 0");
  std::vector<std::uint16_t> s(depth.mm.size());
  const double per_unit_mm = depth_scale * 1000.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!DepthMap::is_valid(depth.mm[i])) continue;
    const double raw = std::round(depth.mm[i] / per_unit_mm);
    if (raw > 65535.0) throw RangeError("depth value exceeds the 16-bit range for this depth_scale");
    s[i] = static_cast<std::uint16_t>(std::max(raw, 1.0));
  }
  write_png(path, depth.width, depth.height, 1, 16, s);
}

// Depth in millimeters from a 16-bit gray PNG or a BCDM raw file (detected by
// content). mm = raw * depth_scale * 1000; zero or non-finite raw is invalid.
inline DepthMap load_depth(const std::string& path, double depth_scale = kDefaultDepthScale) {
  if (!(depth_scale > 0.0) || !std::isfinite(depth_scale)) throw ArgumentError("depth_scale must be > 0");
  const double factor = depth_scale * 1000.0;
  const auto bytes = detail::read_file_bytes(path);
  DepthMap out;
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), "BCDM", 4) == 0) {
    if (bytes.size() < 16) throw FormatError("'" + path + "': truncated BCDM header");
    const std::uint32_t w = detail::get_u32le(bytes.data() + 4);
    const std::uint32_t h = detail::get_u32le(bytes.data() + 8);
    if (w == 0 || h == 0 || w > 65536 || h > 65536) throw FormatError("'" + path + "': bad BCDM dimensions");
    const std::size_t n = static_cast<std::size_t>(w) * h;
    if (bytes.size() != 16 + 4 * n)
      throw FormatError("'" + path + "': BCDM payload size does not match " + std::to_string(w) + "x" +
                        std::to_string(h));
    out = DepthMap(static_cast<int>(w), static_cast<int>(h));
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t bits = detail::get_u32le(bytes.data() + 16 + 4 * i);
      float v;
      std::memcpy(&v, &bits, 4);
      if (!DepthMap::is_valid(v)) v = 0.0f;
      out.mm[i] = factor == 1.0 ? v : static_cast<float>(v * factor);
    }
  } else {
    const RawPng raw = read_png(path);
    if (raw.channels != 1) throw FormatError("'" + path + "': depth PNG must be single-channel grayscale");
    out = DepthMap(raw.width, raw.height);
    for (std::size_t i = 0; i < raw.samples.size(); ++i)
      out.mm[i] = raw.samples[i] == 0 ? 0.0f : static_cast<float>(raw.samples[i] * factor);
  }
  if (out.valid_count() == 0) throw DataError("'" + path + "': depth map has no valid pixels");
  return out;
}

// ---- Resolution standardization -------------------------------------------

struct CropWindow {
  int x0 = 0;
  int y0 = 0;
  int side = 0;
};

inline CropWindow center_square(int width, int height) {
  const int side = std::min(width, height);
  return {(width - side) / 2, (height - side) / 2, side};
}

// Center crop to a square, then bilinear resize to size x size.
inline Image standardize_rgb(const Image& img, int size = kStandardResolution) {
  const CropWindow w = center_square(img.width, img.height);
  if (w.side == size && img.width == img.height) return img;
  Image out(size, size, img.channels);
  const double scale = static_cast<double>(w.side) / size;
  double px[16];
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double sx = w.x0 + (x + 0.5) * scale - 0.5;
      const double sy = w.y0 + (y + 0.5) * scale - 0.5;
      sample_bilinear(img, std::clamp(sx, static_cast<double>(w.x0), static_cast<double>(w.x0 + w.side - 1)),
                      std::clamp(sy, static_cast<double>(w.y0), static_cast<double>(w.y0 + w.side - 1)), px);
      for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = static_cast<float>(px[c]);
    }
  return out;
}

// Center crop to a square, then nearest-neighbor resize.
inline DepthMap standardize_depth(const DepthMap& depth, int size = kStandardResolution) {
  const CropWindow w = center_square(depth.width, depth.height);
  if (w.side == size && depth.width == depth.height) return depth;
  DepthMap out(size, size);
  const double scale = static_cast<double>(w.side) / size;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const int sx = std::min(w.side - 1, static_cast<int>(std::floor((x + 0.5) * scale)));
      const int sy = std::min(w.side - 1, static_cast<int>(std::floor((y + 0.5) * scale)));
      out.at(x, y) = depth.at(w.x0 + sx, w.y0 + sy);
    }
  return out;
}

// ---- camera.json ----------------------------------------------------------

// Per-dataset optics. pixel_pitch_um refers to the native raster; resizing
// rescales it so the field of view is preserved.
struct DatasetCamera {
  double focal_mm = 4.25;
  double pixel_pitch_um = 7.0;
  CameraKind kind = CameraKind::ShortFocus;
  double depth_scale = kDefaultDepthScale;

  CameraModel model_for(int native_width, int native_height, int size = kStandardResolution) const {
    const CropWindow w = center_square(native_width, native_height);
    const double pitch = pixel_pitch_um * static_cast<double>(w.side) / size;
    return CameraModel::centered(focal_mm, pitch, size, size, kind);
  }
};

inline nlohmann::ordered_json to_json(const DatasetCamera& c) {
  nlohmann::ordered_json j;
  j["focal_mm"] = c.focal_mm;
  j["pixel_pitch_um"] = c.pixel_pitch_um;
  j["kind"] = to_string(c.kind);
  j["depth_scale"] = c.depth_scale;
  return j;
}

inline DatasetCamera dataset_camera_from_json(const nlohmann::json& j) {
  try {
    DatasetCamera c;
    c.focal_mm = j.at("focal_mm").get<double>();
    c.pixel_pitch_um = j.at("pixel_pitch_um").get<double>();
    c.kind = camera_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("depth_scale")) c.depth_scale = j.at("depth_scale").get<double>();
    if (!(c.focal_mm > 0.0) || !(c.pixel_pitch_um > 0.0) || !(c.depth_scale > 0.0))
      throw FormatError("camera.json: focal_mm, pixel_pitch_um and depth_scale must be > 0");
    return c;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("camera.json: ") + ex.what());
  }
}

inline DatasetCamera load_dataset_camera(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError("'" + path + "': " + ex.what());
  }
  return dataset_camera_from_json(j);
}

// ---- Scenes and scenarios -------------------------------------------------

struct Scene {
  Image rgb;
  DepthMap depth;
  CameraModel camera;
};

// Loads a paired RGB-D frame, checks the rasters agree, and standardizes both
// to size x size.
inline Scene load_scene(const std::string& rgb_path, const std::string& depth_path, const DatasetCamera& cam,
                        int size = kStandardResolution) {
  const Image rgb = load_rgb(rgb_path);
  const DepthMap depth = load_depth(depth_path, cam.depth_scale);
  if (rgb.width != depth.width || rgb.height != depth.height)
    throw FormatError("depth '" + depth_path + "' is " + std::to_string(depth.width) + "x" +
                      std::to_string(depth.height) + " but rgb '" + rgb_path + "' is " + std::to_string(rgb.width) +
                      "x" + std::to_string(rgb.height));
  Scene s{standardize_rgb(rgb, size), standardize_depth(depth, size), cam.model_for(rgb.width, rgb.height, size)};
  if (s.depth.valid_count() == 0) throw DataError("'" + depth_path + "': no valid depth after resizing");
  return s;
}

struct Scenario {
  std::string name;
  std::string rgb_path;
  std::string depth_path;
  DatasetCamera camera;
  SimConfig sim;  // onset_ms always set
  std::uint64_t seed = 0;
  int resolution = kStandardResolution;

  double onset_ms() const { return *sim.onset_ms; }
};

inline bool operator==(const Scenario& a, const Scenario& b) {
  return a.name == b.name && a.rgb_path == b.rgb_path && a.depth_path == b.depth_path && a.seed == b.seed &&
         a.sim.onset_ms == b.sim.onset_ms && a.resolution == b.resolution;
}

struct RgbdPair {
  std::string name;
  std::string rgb_path;
  std::string depth_path;
};

// rgb/<name>.png paired with depth/<name>.bcdm or depth/<name>.png, sorted by name.
inline std::vector<RgbdPair> list_rgbd_pairs(const std::string& dataset_dir) {
  namespace fs = std::filesystem;
  const fs::path root(dataset_dir);
  const fs::path rgb_dir = root / "rgb";
  const fs::path depth_dir = root / "depth";
  if (!fs::is_directory(rgb_dir) || !fs::is_directory(depth_dir))
    throw DataError("dataset '" + dataset_dir + "' must contain rgb/ and depth/ directories");
  std::vector<RgbdPair> pairs;
  for (const auto& entry : fs::directory_iterator(rgb_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
    const std::string stem = entry.path().stem().string();
    for (const char* ext : {".bcdm", ".png"}) {
      const fs::path d = depth_dir / (stem + ext);
      if (fs::is_regular_file(d)) {
        pairs.push_back({stem, entry.path().string(), d.string()});
        break;
      }
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const RgbdPair& a, const RgbdPair& b) { return a.name < b.name; });
  return pairs;
}

// Dataset root from the explicit argument, else BLURCAM_DATA_DIR.
inline std::string resolve_dataset_dir(const std::optional<std::string>& arg) {
  if (arg && !arg->empty()) return *arg;
  if (const char* env = std::getenv("BLURCAM_DATA_DIR"); env && *env) return env;
  throw ArgumentError("no dataset directory given and BLURCAM_DATA_DIR is unset");
}

// n scenarios cycling through the dataset's pairs. Onsets are drawn uniformly
// from [traj.start, traj.end - capture span] by one generator seeded with seed;
// each scenario also receives its own seed from that generator.
inline std::vector<Scenario> build_scenarios(const std::string& dataset_dir, const Trajectory& traj, int n,
                                             std::uint64_t seed, const SimConfig& sim = {},
                                             int resolution = kStandardResolution) {
  if (n < 1) throw ArgumentError("scenario count must be >= 1");
  sim.validate();
  const auto pairs = list_rgbd_pairs(dataset_dir);
  if (pairs.empty()) throw DataError("dataset '" + dataset_dir + "' has no rgb/depth pairs");
  const std::filesystem::path cam_path = std::filesystem::path(dataset_dir) / "camera.json";
  if (!std::filesystem::is_regular_file(cam_path)) throw DataError("dataset '" + dataset_dir + "' has no camera.json");
  const DatasetCamera cam = load_dataset_camera(cam_path.string());
  for (const auto& p : pairs) (void)load_scene(p.rgb_path, p.depth_path, cam, resolution);

  SimConfig probe = sim;
  probe.onset_ms.reset();
  const double hi = max_onset(traj, probe, resolution);
  if (hi < traj.start()) (void)resolve_onset(traj, probe, resolution);  // throws with the span detail

  std::mt19937_64 gen(seed);
  std::vector<Scenario> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    const RgbdPair& p = pairs[static_cast<std::size_t>(k) % pairs.size()];
    Scenario s;
    s.name = p.name + "_" + std::to_string(k);
    s.rgb_path = p.rgb_path;
    s.depth_path = p.depth_path;
    s.camera = cam;
    s.sim = sim;
    s.sim.onset_ms = draw_uniform(gen, traj.start(), hi);
    s.seed = gen();
    s.sim.seed = s.seed;
    s.resolution = resolution;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace blurcam
