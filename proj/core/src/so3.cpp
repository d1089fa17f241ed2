#include "a3syn/so3.hpp"

#include <cmath>

#include <Eigen/Geometry>

namespace a3syn {
namespace {

// Coefficients of R = I + a [v]x + b [v]x^2 and their derivatives divided by theta.
struct RodriguesCoefficients {
  double a;
  double b;
  double da_over_theta;
  double db_over_theta;
};

RodriguesCoefficients coefficients(double theta) {
  const double t2 = theta * theta;
  if (theta < 1e-2) {
    const double t4 = t2 * t2;
    return {1.0 - t2 / 6.0 + t4 / 120.0,
            0.5 - t2 / 24.0 + t4 / 720.0,
            -1.0 / 3.0 + t2 / 30.0 - t4 / 840.0,
            -1.0 / 12.0 + t2 / 180.0 - t4 / 6720.0};
  }
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  return {s / theta,
          (1.0 - c) / t2,
          (theta * c - s) / (t2 * theta),
          (theta * s - 2.0 * (1.0 - c)) / (t2 * t2)};
}

}  // namespace

Mat3 skew(const Vec3& a) {
  Mat3 m;
  m << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
       -a.y(), a.x(), 0.0;
  return m;
}

Mat3 axis_angle_to_matrix(const Vec3& v) {
  const auto k = coefficients(v.norm());
  const Mat3 vx = skew(v);
  return Mat3::Identity() + k.a * vx + k.b * vx * vx;
}

std::array<Mat3, 3> axis_angle_jacobian(const Vec3& v) {
  const auto k = coefficients(v.norm());
  const Mat3 vx = skew(v);
  const Mat3 vx2 = vx * vx;
  std::array<Mat3, 3> out;
  for (int i = 0; i < 3; ++i) {
    const Mat3 ex = skew(Vec3::Unit(i));
    out[i] = k.da_over_theta * v[i] * vx + k.a * ex +
             k.db_over_theta * v[i] * vx2 + k.b * (ex * vx + vx * ex);
  }
  return out;
}

Vec3 matrix_to_axis_angle(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

Mat4 rotation_to_homogeneous(const Mat3& r) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = r;
  return m;
}

}  // namespace a3syn
