#pragma once

#include <span>
#include <vector>

#include "a3syn/common.hpp"

namespace a3syn {

inline constexpr double kPi = 3.14159265358979323846;
inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

/// Pinhole camera. World up is +Y; pixel centers sit at integer coordinates,
/// so the image spans [-0.5, width - 0.5) x [-0.5, height - 0.5).
struct Camera {
  Vec3 position = Vec3(0.0, 0.0, 3.0);
  Vec3 look_at = Vec3::Zero();
  Vec3 up = Vec3::UnitY();
  double vertical_fov = deg_to_rad(45.0);
  int width = 512;
  int height = 512;

  /// Throws ContractViolation for fov outside (0, pi), images below 16 px,
  /// coincident position/look_at or an up vector parallel to the view direction.
  void validate() const;
};

/// Precomputed view frame for projecting points and differentiating projections.
class Projector {
 public:
  explicit Projector(const Camera& camera);

  /// Camera frame: x right, y up, z along the viewing direction (depth).
  Vec3 to_camera(const Vec3& p) const;
  Vec2 project_camera(const Vec3& c) const;
  Vec2 project(const Vec3& p) const { return project_camera(to_camera(p)); }
  double depth(const Vec3& p) const { return forward_.dot(p - position_); }

  /// d(pixel)/d(world point); valid for points in front of the camera.
  Mat23 jacobian(const Vec3& p) const;

  bool in_image(const Vec2& pixel) const;
  double focal() const { return focal_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const Vec3& forward() const { return forward_; }
  const Vec3& position() const { return position_; }

 private:
  Vec3 position_;
  Vec3 right_;
  Vec3 up_;
  Vec3 forward_;
  double focal_ = 1.0;
  double cx_ = 0.0;
  double cy_ = 0.0;
  int width_ = 0;
  int height_ = 0;
};

struct CameraIntrinsics {
  double vertical_fov = deg_to_rad(45.0);
  int width = 512;
  int height = 512;
};

/// `per_level` azimuth-equispaced cameras on each elevation ring, all at
/// `distance` from `center` and looking at it. Azimuth 0 lies along +Z.
std::vector<Camera> sample_camera_ring(const Vec3& center, double distance,
                                       std::span<const double> elevations_deg, int per_level,
                                       const CameraIntrinsics& intrinsics = {});

/// Camera at the given azimuth/elevation (degrees) and distance around `center`.
Camera orbit_camera(const Vec3& center, double azimuth_deg, double elevation_deg, double distance,
                    const CameraIntrinsics& intrinsics = {});

}  // namespace a3syn
