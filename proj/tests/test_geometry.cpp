#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <cmath>
#include <random>

#include "blurcam/geometry.hpp"

using namespace blurcam;

namespace {

CameraModel cam26() { return CameraModel::centered(26.0, 5.0, 101, 101); }

// Content motion direction from an angle-axis rotation: the optical axis
// moves opposite to the content, and the rotation vector for (alpha, beta)
// is (alpha, -beta, 0) in image coordinates (x right, y down, z forward).
Eigen::Vector2d brute_force_direction(double alpha, double beta) {
  const Eigen::Vector3d omega(alpha, -beta, 0.0);
  const Eigen::AngleAxisd rot(omega.norm(), omega.normalized());
  const Eigen::Vector3d axis = rot * Eigen::Vector3d::UnitZ();
  return -Eigen::Vector2d(axis.x(), axis.y()).normalized();
}

}  // namespace

TEST(CameraModel, RejectsInvalidParameters) {
  EXPECT_THROW(CameraModel::centered(0.0, 5.0, 10, 10), ArgumentError);
  EXPECT_THROW(CameraModel::centered(4.0, -1.0, 10, 10), ArgumentError);
  EXPECT_THROW(CameraModel::centered(4.0, 5.0, 2, 10), ArgumentError);
  CameraModel cam = cam26();
  cam.cx = 200.0;
  EXPECT_THROW(cam.validate(), ArgumentError);
}

TEST(CameraModel, CenteredPrincipalPoint) {
  const auto cam = CameraModel::centered(4.25, 7.0, 518, 518);
  EXPECT_EQ(cam.cx, 259.0);
  EXPECT_EQ(cam.cy, 259.0);
  EXPECT_DOUBLE_EQ(cam.focal_px(), 4.25 / 7.0e-3);
}

TEST(DecomposeRotation, IdentityIsDegenerate) {
  const auto p = decompose_rotation({0.0, 0.0, 0.0, 0.0});
  EXPECT_TRUE(p.degenerate);
  EXPECT_EQ(p.theta, 0.0);
}

TEST(DecomposeRotation, PureRollIsDegenerate) {
  const auto p = decompose_rotation({0.0, 0.0, 0.0, 0.02});
  EXPECT_TRUE(p.degenerate);
  EXPECT_EQ(p.theta, 0.0);
}

TEST(DecomposeRotation, PurePitchMovesAlongY) {
  const auto p = decompose_rotation({0.0, 1e-3, 0.0, 0.0});
  EXPECT_FALSE(p.degenerate);
  EXPECT_DOUBLE_EQ(p.theta, 1e-3);
  EXPECT_NEAR(std::abs(p.cos_y()), 1.0, 1e-15);
  EXPECT_NEAR(p.cos_x(), 0.0, 1e-15);
}

TEST(DecomposeRotation, ThreeFourFive) {
  const auto p = decompose_rotation({0.0, 3e-4, 4e-4, 0.0});
  EXPECT_NEAR(p.theta, 5e-4, 1e-18);
  EXPECT_NEAR(std::abs(p.cos_x()), 0.8, 1e-12);
  EXPECT_NEAR(std::abs(p.cos_y()), 0.6, 1e-12);
  const Eigen::Vector2d bf = brute_force_direction(3e-4, 4e-4);
  EXPECT_NEAR(-p.cos_x(), bf.x(), 1e-12);
  EXPECT_NEAR(-p.cos_y(), bf.y(), 1e-12);
}

TEST(DecomposeRotation, MatchesRotationMatrixOnRandomSamples) {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(gen), b = u(gen);
    const auto p = decompose_rotation({0.0, a, b, u(gen)});
    EXPECT_NEAR(p.theta, std::hypot(a, b), 1e-15);
    EXPECT_LE(p.cos_x() * p.cos_x() + p.cos_y() * p.cos_y(), 1.0 + 1e-9);
    const Eigen::Vector2d bf = brute_force_direction(a, b);
    ASSERT_NEAR(-p.cos_x(), bf.x(), 1e-9) << "sample " << i;
    ASSERT_NEAR(-p.cos_y(), bf.y(), 1e-9) << "sample " << i;
  }
}

TEST(OnAxisDelta, ZeroAngle) { EXPECT_EQ(on_axis_delta(2000.0, 0.0, cam26()), 0.0); }

TEST(OnAxisDelta, FrozenValue) {
  // Independent 50-digit evaluation of -l tan(theta) f / (l + f).
  EXPECT_NEAR(on_axis_delta(2000.0, 1e-3, cam26()), -0.02566634616650556, 1e-17);
}

TEST(OnAxisDelta, InfiniteConjugateLimit) {
  EXPECT_NEAR(on_axis_delta(1e12, 1e-3, cam26()), -std::tan(1e-3) * 26.0, 1e-12);
}

TEST(OnAxisDelta, Odd) {
  for (double th : {1e-4, 3e-3, 0.04})
    EXPECT_EQ(on_axis_delta(1500.0, -th, cam26()), -on_axis_delta(1500.0, th, cam26()));
}

TEST(OnAxisDelta, MonotoneInDepth) {
  double prev = 0.0;
  for (double l = 10.0; l < 1e7; l *= 1.7) {
    const double v = std::abs(on_axis_delta(l, 2e-3, cam26()));
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(OnAxisDelta, RejectsBadInput) {
  EXPECT_THROW(on_axis_delta(0.0, 1e-3, cam26()), ArgumentError);
  EXPECT_THROW(on_axis_delta(100.0, 2.0, cam26()), ArgumentError);
}

TEST(OffAxisDelta, FrozenValue) {
  // Independent 50-digit evaluation with the (l_off^2 + y^2) height factor.
  EXPECT_NEAR(off_axis_delta(2000.0, 4000.0, 100.0, 1e-3, cam26()), -0.025683029708816373, 1e-16);
}

TEST(OffAxisDelta, ReducesToOnAxis) {
  for (double th = -0.05; th <= 0.05; th += 0.001) {
    for (double l : {300.0, 2000.0, 9000.0}) {
      const double on = on_axis_delta(l, th, cam26());
      const double off = off_axis_delta(l, l, 0.0, th, cam26());
      EXPECT_LE(std::abs(off - on), 1e-12 * std::abs(on) + 1e-300) << th;
    }
  }
}

TEST(OffAxisDelta, ZeroAngleIsZero) {
  for (double y : {-500.0, 0.0, 42.0}) EXPECT_EQ(off_axis_delta(2000.0, 3000.0, y, 0.0, cam26()), 0.0);
}

TEST(OffAxisDelta, SingularDenominator) {
  const double th = 0.01;
  const double y = 1000.0 / std::tan(th);  // l_off - y tan(theta) = 0
  EXPECT_THROW(off_axis_delta(2000.0, 1000.0, y, th, cam26()), SingularityError);
}

TEST(DeltaModel, MatchesScalarFormula) {
  const auto cam = cam26();
  const RotationSample s{0.0, 2e-3, -1e-3, 0.0};
  const DeltaModel m(s, 2000.0, cam);
  const double x = 30.0, y = -12.0, l_off = 3500.0;
  const auto plane = decompose_rotation(s);
  const double dx = s.beta / plane.theta, dy = s.alpha / plane.theta;
  const double height = (x * dx + y * dy) * cam.pitch_mm() * l_off / cam.focal_length_mm;
  const double mag = -off_axis_delta(2000.0, l_off, height, plane.theta, cam) / cam.pitch_mm();
  const Vec2 p = m(x, y, l_off);
  EXPECT_NEAR(p.x, mag * dx, 1e-13);
  EXPECT_NEAR(p.y, mag * dy, 1e-13);
}

TEST(DeltaField, ZeroRotationIsZero) {
  const auto cam = cam26();
  const DepthMap depth(cam.width, cam.height, 2000.0f);
  std::vector<FieldPoint> pts{FieldPoint::at(0, 0, 2000, cam), FieldPoint::at(10, -20, 2000, cam)};
  for (const auto& v : delta_field({0, 0, 0, 0}, depth, cam, pts)) {
    EXPECT_EQ(v.x, 0.0);
    EXPECT_EQ(v.y, 0.0);
  }
}

TEST(DeltaField, PureRollFrozenValue) {
  const auto cam = cam26();
  const DepthMap depth(cam.width, cam.height, 2000.0f);
  std::vector<FieldPoint> pts{FieldPoint::at(100, 0, 2000, cam)};
  const auto v = delta_field({0, 0, 0, 0.01}, depth, cam, pts);
  // x cos(gamma) - x cancels to about 100 ulp(1) of absolute rounding.
  EXPECT_NEAR(v[0].x, -0.004999958333472222, 1e-13);
  EXPECT_NEAR(v[0].y, 0.9999833334166665, 1e-13);
}

TEST(DeltaField, PurePitchUniformAlongCenterline) {
  const auto cam = cam26();
  const DepthMap depth(cam.width, cam.height, 2500.0f);
  std::vector<FieldPoint> pts;
  for (int x = -40; x <= 40; x += 8) pts.push_back(FieldPoint::at(x, 0, 2500, cam));
  const auto v = delta_field({0, 1e-3, 0, 0}, depth, cam, pts);
  for (const auto& d : v) {
    EXPECT_EQ(d.y, v.front().y);
    EXPECT_EQ(d.x, 0.0);
  }
  EXPECT_GT(v.front().y, 0.0);  // positive alpha moves content toward +y
}

TEST(DeltaField, PositiveYawMovesContentRight) {
  const auto cam = cam26();
  const DepthMap depth(cam.width, cam.height, 2500.0f);
  std::vector<FieldPoint> pts{FieldPoint::at(0, 0, 2500, cam)};
  EXPECT_GT(delta_field({0, 0, 1e-3, 0}, depth, cam, pts)[0].x, 0.0);
}

TEST(DeltaField, LinearInSmallAngles) {
  const auto cam = cam26();
  const DepthMap depth(cam.width, cam.height, 2500.0f);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-5e-4, 5e-4);
  std::vector<FieldPoint> pts;
  for (int y = -50; y <= 50; y += 25)
    for (int x = -50; x <= 50; x += 25) pts.push_back(FieldPoint::at(x, y, 1000.0 + 20.0 * (x + 60), cam));
  for (int trial = 0; trial < 50; ++trial) {
    const RotationSample s{0, u(gen), u(gen), u(gen)};
    const RotationSample s2{0, 2 * s.alpha, 2 * s.beta, 2 * s.gamma};
    const auto a = delta_field(s, depth, cam, pts);
    const auto b = delta_field(s2, depth, cam, pts);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double n = std::hypot(b[i].x, b[i].y);
      EXPECT_LE(std::hypot(b[i].x - 2 * a[i].x, b[i].y - 2 * a[i].y), 1e-3 * n + 1e-15);
    }
  }
}

TEST(DeltaField, RejectsInvalidDepth) {
  const auto cam = cam26();
  const DepthMap depth(cam.width, cam.height, 2500.0f);
  std::vector<FieldPoint> pts{FieldPoint::at(5, 5, 0.0, cam)};
  EXPECT_THROW(delta_field({0, 1e-3, 0, 0}, depth, cam, pts), ArgumentError);
}

TEST(FieldPoint, ObjectHeightFromProjection) {
  const auto cam = cam26();
  const auto p = FieldPoint::at(30, 40, 2000.0, cam);
  EXPECT_NEAR(p.object_height_y, 50.0 * cam.pitch_mm() * 2000.0 / cam.focal_length_mm, 1e-12);
}

TEST(RotationSample, RejectsLargeAngles) {
  EXPECT_THROW(validate_rotation({0, 1.6, 0, 0}), DataError);
  EXPECT_THROW(validate_rotation({0, 0, std::nan(""), 0}), DataError);
  EXPECT_NO_THROW(validate_rotation({0, 0.1, -0.1, 0.2}));
}
