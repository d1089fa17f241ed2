#include "a3syn/camera.hpp"

#include <cmath>

#include <Eigen/Geometry>

namespace a3syn {

void Camera::validate() const {
  if (!(vertical_fov > 0.0 && vertical_fov < kPi)) throw ContractViolation("camera fov must lie in (0, pi)");
  if (width < 16 || height < 16) throw ContractViolation("camera image must be at least 16x16");
  const Vec3 dir = look_at - position;
  if (!(dir.norm() > 0.0)) throw ContractViolation("camera position coincides with look_at");
  if (dir.normalized().cross(up).norm() < 1e-9) throw ContractViolation("camera up is parallel to the view direction");
}

Projector::Projector(const Camera& camera) {
  camera.validate();
  position_ = camera.position;
  forward_ = (camera.look_at - camera.position).normalized();
  right_ = forward_.cross(camera.up).normalized();
  up_ = right_.cross(forward_);
  width_ = camera.width;
  height_ = camera.height;
  focal_ = 0.5 * camera.height / std::tan(0.5 * camera.vertical_fov);
  cx_ = 0.5 * camera.width - 0.5;
  cy_ = 0.5 * camera.height - 0.5;
}

Vec3 Projector::to_camera(const Vec3& p) const {
  const Vec3 d = p - position_;
  return {right_.dot(d), up_.dot(d), forward_.dot(d)};
}

Vec2 Projector::project_camera(const Vec3& c) const {
  return {cx_ + focal_ * c.x() / c.z(), cy_ - focal_ * c.y() / c.z()};
}

Mat23 Projector::jacobian(const Vec3& p) const {
  const Vec3 c = to_camera(p);
  const double inv_z = 1.0 / c.z();
  Mat23 j;
  j.row(0) = focal_ * inv_z * (right_ - c.x() * inv_z * forward_).transpose();
  j.row(1) = -focal_ * inv_z * (up_ - c.y() * inv_z * forward_).transpose();
  return j;
}

bool Projector::in_image(const Vec2& pixel) const {
  return pixel.x() >= -0.5 && pixel.x() < width_ - 0.5 && pixel.y() >= -0.5 && pixel.y() < height_ - 0.5;
}

Camera orbit_camera(const Vec3& center, double azimuth_deg, double elevation_deg, double distance,
                    const CameraIntrinsics& intrinsics) {
  const double az = deg_to_rad(azimuth_deg);
  const double el = deg_to_rad(elevation_deg);
  Camera cam;
  cam.position = center + distance * Vec3(std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az));
  cam.look_at = center;
  cam.up = Vec3::UnitY();
  cam.vertical_fov = intrinsics.vertical_fov;
  cam.width = intrinsics.width;
  cam.height = intrinsics.height;
  return cam;
}

std::vector<Camera> sample_camera_ring(const Vec3& center, double distance,
                                       std::span<const double> elevations_deg, int per_level,
                                       const CameraIntrinsics& intrinsics) {
  if (!(distance > 0.0)) throw ContractViolation("ring distance must be positive");
  if (per_level < 1) throw ContractViolation("per_level must be at least 1");
  std::vector<Camera> out;
  out.reserve(elevations_deg.size() * static_cast<std::size_t>(per_level));
  for (double el : elevations_deg) {
    for (int i = 0; i < per_level; ++i) {
      out.push_back(orbit_camera(center, 360.0 * i / per_level, el, distance, intrinsics));
    }
  }
  return out;
}

}  // namespace a3syn
