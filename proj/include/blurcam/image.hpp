#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "blurcam/error.hpp"

namespace blurcam {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline bool operator==(const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }

// Interleaved float image, values nominally in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c = 3, float fill = 0.0f)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c), fill) {
    if (w <= 0 || h <= 0 || c <= 0) throw ArgumentError("image dimensions must be positive");
  }

  float& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const Image& other) const {
    return width == other.width && height == other.height && channels == other.channels;
  }
};

inline bool operator==(const Image& a, const Image& b) { return a.same_shape(b) && a.data == b.data; }

// Bilinear lookup with clamp-to-edge. Writes `channels` values to out.
// At integer coordinates the result is the stored value, bit for bit.
inline void sample_bilinear(const Image& img, double x, double y, double* out) {
  const double max_x = img.width - 1;
  const double max_y = img.height - 1;
  x = std::clamp(x, 0.0, max_x);
  y = std::clamp(y, 0.0, max_y);
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double w00 = (1.0 - fx) * (1.0 - fy);
  const double w10 = fx * (1.0 - fy);
  const double w01 = (1.0 - fx) * fy;
  const double w11 = fx * fy;
  const float* p00 = &img.data[(static_cast<std::size_t>(y0) * img.width + x0) * img.channels];
  const float* p10 = &img.data[(static_cast<std::size_t>(y0) * img.width + x1) * img.channels];
  const float* p01 = &img.data[(static_cast<std::size_t>(y1) * img.width + x0) * img.channels];
  const float* p11 = &img.data[(static_cast<std::size_t>(y1) * img.width + x1) * img.channels];
  for (int c = 0; c < img.channels; ++c) {
    out[c] = w00 * p00[c] + w10 * p10[c] + w01 * p01[c] + w11 * p11[c];
  }
}

inline double sample_bilinear(const Image& img, double x, double y, int channel) {
  double buf[16];
  sample_bilinear(img, x, y, buf);
  return buf[channel];
}

// Luma-weighted single-channel copy.
inline Image to_gray(const Image& rgb) {
  if (rgb.channels == 1) return rgb;
  Image g(rgb.width, rgb.height, 1);
  for (int y = 0; y < rgb.height; ++y) {
    for (int x = 0; x < rgb.width; ++x) {
      if (rgb.channels >= 3) {
        g.at(x, y) = static_cast<float>(0.299 * rgb.at(x, y, 0) + 0.587 * rgb.at(x, y, 1) +
                                        0.114 * rgb.at(x, y, 2));
      } else {
        g.at(x, y) = rgb.at(x, y, 0);
      }
    }
  }
  return g;
}

// Metric depth in millimeters. A pixel is valid when its value is finite and > 0.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> mm;

  DepthMap() = default;
  DepthMap(int w, int h, float fill = 0.0f)
      : width(w), height(h), mm(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
    if (w <= 0 || h <= 0) throw ArgumentError("depth map dimensions must be positive");
  }

  float& at(int x, int y) { return mm[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return mm[static_cast<std::size_t>(y) * width + x]; }

  static bool is_valid(float v) { return std::isfinite(v) && v > 0.0f; }
  bool valid(int x, int y) const { return is_valid(at(x, y)); }

  std::size_t valid_count() const {
    return static_cast<std::size_t>(std::count_if(mm.begin(), mm.end(), [](float v) { return is_valid(v); }));
  }

  // Invalid pixels take the nearest valid depth along their row; rows with no
  // valid pixel copy the nearest row that has one.
  DepthMap filled() const {
    if (valid_count() == 0) throw DataError("depth map has no valid pixels");
    DepthMap out = *this;
    std::vector<bool> row_ok(height, false);
    for (int y = 0; y < height; ++y) {
      int last = -1;
      std::vector<int> left(width, -1);
      for (int x = 0; x < width; ++x) {
        if (valid(x, y)) last = x;
        left[x] = last;
      }
      int next = -1;
      for (int x = width - 1; x >= 0; --x) {
        if (valid(x, y)) next = x;
        if (valid(x, y)) continue;
        const int l = left[x];
        int pick = -1;
        if (l >= 0 && next >= 0) pick = (x - l <= next - x) ? l : next;
        else if (l >= 0) pick = l;
        else pick = next;
        if (pick >= 0) out.at(x, y) = at(pick, y);
      }
      row_ok[y] = left[width - 1] >= 0;
    }
    for (int y = 0; y < height; ++y) {
      if (row_ok[y]) continue;
      int best = -1;
      for (int d = 1; d < height && best < 0; ++d) {
        if (y - d >= 0 && row_ok[y - d]) best = y - d;
        else if (y + d < height && row_ok[y + d]) best = y + d;
      }
      for (int x = 0; x < width; ++x) out.at(x, y) = out.at(x, best);
    }
    return out;
  }

  // Bilinear depth lookup with clamp-to-edge; expects a filled map.
  double sample(double x, double y) const {
    x = std::clamp(x, 0.0, static_cast<double>(width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, width - 1);
    const int y1 = std::min(y0 + 1, height - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    return (1.0 - fx) * (1.0 - fy) * at(x0, y0) + fx * (1.0 - fy) * at(x1, y0) +
           (1.0 - fx) * fy * at(x0, y1) + fx * fy * at(x1, y1);
  }
};

inline bool operator==(const DepthMap& a, const DepthMap& b) {
  return a.width == b.width && a.height == b.height && a.mm == b.mm;
}

}  // namespace blurcam
