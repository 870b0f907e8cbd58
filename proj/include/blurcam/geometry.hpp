#pragma once

// Optical model of a rotating camera: on-axis and off-axis image deltas,
// the rotation-plane decomposition, and the per-point delta field.
//
// Conventions (used everywhere in the library):
//   * image x grows rightward, image y grows downward;
//   * alpha (pitch) rotates about the image x-axis, positive alpha moves the
//     image content toward +y; beta (yaw) rotates about the image y-axis,
//     positive beta moves the content toward +x;
//   * gamma (roll) rotates the content about the principal point by
//     (x, y) -> (x cos g - y sin g, x sin g + y cos g);
//   * optical quantities are millimeters and radians, pixels only appear at
//     the delta_field boundary.

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "blurcam/error.hpp"
#include "blurcam/image.hpp"

namespace blurcam {

enum class CameraKind { ShortFocus, Telephoto };

inline const char* to_string(CameraKind k) {
  return k == CameraKind::ShortFocus ? "short_focus" : "telephoto";
}

inline CameraKind camera_kind_from_string(const std::string& s) {
  if (s == "short_focus" || s == "short-focus" || s == "ShortFocus") return CameraKind::ShortFocus;
  if (s == "telephoto" || s == "Telephoto") return CameraKind::Telephoto;
  throw FormatError("unknown camera kind '" + s + "'");
}

struct CameraModel {
  double focal_length_mm = 0.0;
  double pixel_pitch_um = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  CameraKind kind = CameraKind::ShortFocus;

  // Principal point at the integer image center.
  static CameraModel centered(double focal_mm, double pitch_um, int w, int h,
                              CameraKind kind = CameraKind::ShortFocus) {
    CameraModel cam{focal_mm, pitch_um, static_cast<double>(w / 2), static_cast<double>(h / 2), w, h, kind};
    cam.validate();
    return cam;
  }

  double pitch_mm() const { return pixel_pitch_um * 1e-3; }
  double focal_px() const { return focal_length_mm / pitch_mm(); }

  void validate() const {
    if (!(focal_length_mm > 0.0) || !std::isfinite(focal_length_mm))
      throw ArgumentError("camera focal length must be > 0");
    if (!(pixel_pitch_um > 0.0) || !std::isfinite(pixel_pitch_um))
      throw ArgumentError("camera pixel pitch must be > 0");
    if (width < 3 || height < 3) throw ArgumentError("camera must be at least 3x3 pixels");
    if (!(cx >= 0.0 && cx <= width - 1 && cy >= 0.0 && cy <= height - 1))
      throw ArgumentError("principal point must lie inside the image");
  }
};

struct RotationSample {
  double t = 0.0;      // ms
  double alpha = 0.0;  // pitch, rad
  double beta = 0.0;   // yaw, rad
  double gamma = 0.0;  // roll, rad

  bool angles_equal(const RotationSample& o) const {
    return alpha == o.alpha && beta == o.beta && gamma == o.gamma;
  }
};

inline bool operator==(const RotationSample& a, const RotationSample& b) {
  return a.t == b.t && a.angles_equal(b);
}

// Angle-wise difference; keeps the timestamp of `a`.
inline RotationSample angles_minus(const RotationSample& a, const RotationSample& b) {
  return {a.t, a.alpha - b.alpha, a.beta - b.beta, a.gamma - b.gamma};
}

inline void validate_rotation(const RotationSample& s) {
  const double lim = std::numbers::pi / 2.0;
  for (double v : {s.alpha, s.beta, s.gamma}) {
    if (!std::isfinite(v) || std::abs(v) >= lim)
      throw DataError("rotation angle out of the small-rotation regime (|angle| < pi/2) at t=" +
                      std::to_string(s.t) + " ms");
  }
  if (!std::isfinite(s.t)) throw DataError("non-finite timestamp");
}

// Tilt expressed in the plane through the rotation vector and the optical
// axis. cos_x/cos_y are the direction cosines of the (negative) delta, so the
// displacement is delta * (cos_x, cos_y) with delta < 0 for theta > 0.
struct RotationPlane {
  double theta = 0.0;
  double phi_x = std::numbers::pi / 2.0;
  double phi_y = std::numbers::pi / 2.0;
  bool degenerate = true;  // no tilt: roll-only or identity

  double cos_x() const { return degenerate ? 0.0 : std::cos(phi_x); }
  double cos_y() const { return degenerate ? 0.0 : std::cos(phi_y); }
};

inline RotationPlane decompose_rotation(const RotationSample& s) {
  if (!std::isfinite(s.alpha) || !std::isfinite(s.beta) || !std::isfinite(s.gamma))
    throw ArgumentError("decompose_rotation: non-finite angle");
  RotationPlane plane;
  plane.theta = std::hypot(s.alpha, s.beta);
  if (plane.theta == 0.0) return plane;
  plane.degenerate = false;
  plane.phi_x = std::acos(-s.beta / plane.theta);
  plane.phi_y = std::acos(-s.alpha / plane.theta);
  return plane;
}

namespace detail {

inline void check_angle(double theta) {
  if (!std::isfinite(theta) || std::abs(theta) >= std::numbers::pi / 2.0)
    throw ArgumentError("tilt angle must satisfy |theta| < pi/2");
}

// Off-axis delta in millimeters for a precomputed tan(theta).
inline double off_axis_delta_tan(double l_on, double l_off, double y, double tan_theta, double f) {
  return -(l_on * tan_theta / l_off) * (f / (l_on + f)) * (l_off * l_off + y * y) /
         (l_off - y * tan_theta);
}

}  // namespace detail

// Sensor-plane delta of the on-axis point focused at distance l_on (mm).
inline double on_axis_delta(double l_on, double theta, const CameraModel& cam) {
  if (!(l_on > 0.0)) throw ArgumentError("on_axis_delta: l_on must be > 0");
  detail::check_angle(theta);
  const double f = cam.focal_length_mm;
  return -l_on * std::tan(theta) * f / (l_on + f);
}

// Sensor-plane delta of an off-axis point at depth l_off with object height y
// (signed, measured along the tilt displacement direction), all in mm.
// Reduces to on_axis_delta when y = 0.
inline double off_axis_delta(double l_on, double l_off, double y, double theta, const CameraModel& cam) {
  if (!(l_on > 0.0) || !(l_off > 0.0)) throw ArgumentError("off_axis_delta: depths must be > 0");
  detail::check_angle(theta);
  const double t = std::tan(theta);
  if (std::abs(l_off - y * t) < 1e-12)
    throw SingularityError("off_axis_delta: denominator l_off - y tan(theta) vanishes");
  return detail::off_axis_delta_tan(l_on, l_off, y, t, cam.focal_length_mm);
}

struct FieldPoint {
  double px = 0.0;              // pixels from the principal point, +x right
  double py = 0.0;              // pixels from the principal point, +y down
  double object_height_y = 0.0; // mm, radial height of the scene point off the axis
  double depth = 0.0;           // mm

  static FieldPoint at(double px, double py, double depth_mm, const CameraModel& cam) {
    return {px, py, std::hypot(px, py) * cam.pitch_mm() * depth_mm / cam.focal_length_mm, depth_mm};
  }
};

// Delta-field evaluator for one rotation. Precomputes everything that does
// not depend on the image position so the per-point cost is a handful of
// multiplications; the simulator evaluates it per pixel and time sample.
class DeltaModel {
 public:
  DeltaModel(const RotationSample& rot, double l_on_mm, const CameraModel& cam)
      : l_on_(l_on_mm), f_(cam.focal_length_mm), pitch_(cam.pitch_mm()) {
    if (!(l_on_mm > 0.0)) throw ArgumentError("DeltaModel: on-axis depth must be > 0");
    const RotationPlane plane = decompose_rotation(rot);
    if (!plane.degenerate) {
      detail::check_angle(plane.theta);
      tan_theta_ = std::tan(plane.theta);
      // Same direction as -(cos_x, cos_y), without the acos/cos round trip.
      dir_x_ = rot.beta / plane.theta;
      dir_y_ = rot.alpha / plane.theta;
      gain_ = l_on_ * tan_theta_ * f_ / ((l_on_ + f_) * pitch_);
    }
    sin_g_ = std::sin(rot.gamma);
    cos_g_ = std::cos(rot.gamma);
  }

  // Displacement in pixels of the point at offset (x, y) px with depth l_off mm.
  Vec2 operator()(double x, double y, double l_off) const {
    Vec2 p{x * cos_g_ - y * sin_g_ - x, x * sin_g_ + y * cos_g_ - y};
    if (tan_theta_ != 0.0) {
      const double s = x * dir_x_ + y * dir_y_;
      const double height = s * pitch_ * l_off / f_;
      const double denom = l_off - height * tan_theta_;
      if (std::abs(denom) < 1e-12)
        throw SingularityError("delta field: denominator l_off - y tan(theta) vanishes");
      // off_axis_delta_tan / -pitch with the position-independent factors folded into gain_.
      const double mag_px = gain_ * (l_off * l_off + height * height) / (l_off * denom);
      p.x += mag_px * dir_x_;
      p.y += mag_px * dir_y_;
    }
    return p;
  }

  double tan_theta() const { return tan_theta_; }
  Vec2 direction() const { return {dir_x_, dir_y_}; }

 private:
  double l_on_;
  double f_;
  double pitch_;
  double tan_theta_ = 0.0;
  double gain_ = 0.0;
  double dir_x_ = 0.0;
  double dir_y_ = 0.0;
  double sin_g_ = 0.0;
  double cos_g_ = 1.0;
};

// The on-axis conjugate distance: depth at the principal point.
inline double on_axis_depth(const DepthMap& depth, const CameraModel& cam) {
  if (depth.width != cam.width || depth.height != cam.height)
    throw ArgumentError("depth map dimensions do not match the camera");
  const int x = static_cast<int>(std::lround(cam.cx));
  const int y = static_cast<int>(std::lround(cam.cy));
  if (depth.valid(x, y)) return depth.at(x, y);
  return depth.filled().sample(cam.cx, cam.cy);
}

// Analytic delta of each field point: tilt term along the rotation-plane
// direction plus the in-plane roll term, in pixels.
inline std::vector<Vec2> delta_field(const RotationSample& s, const DepthMap& depth, const CameraModel& cam,
                                     std::span<const FieldPoint> points) {
  cam.validate();
  const DeltaModel model(s, on_axis_depth(depth, cam), cam);
  std::vector<Vec2> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].depth > 0.0))
      throw ArgumentError("delta_field: point " + std::to_string(i) + " has no valid depth");
    try {
      out.push_back(model(points[i].px, points[i].py, points[i].depth));
    } catch (const SingularityError& e) {
      throw SingularityError(std::string(e.what()) + " at point " + std::to_string(i));
    }
  }
  return out;
}

}  // namespace blurcam
