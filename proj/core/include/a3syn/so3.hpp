#pragma once

#include <array>

#include "a3syn/common.hpp"

namespace a3syn {

/// Cross-product matrix: skew(a) * b == a.cross(b).
Mat3 skew(const Vec3& a);

/// Rodrigues map from an axis-angle vector (radians) to SO(3).
Mat3 axis_angle_to_matrix(const Vec3& v);

/// Partial derivatives dR/dv_k of axis_angle_to_matrix, k = 0..2.
/// Uses series expansions near the identity so the result stays smooth at v = 0.
std::array<Mat3, 3> axis_angle_jacobian(const Vec3& v);

/// Inverse of axis_angle_to_matrix for angles in [0, pi].
Vec3 matrix_to_axis_angle(const Mat3& r);

/// Homogeneous 4x4 with the given rotation block and zero translation.
Mat4 rotation_to_homogeneous(const Mat3& r);

}  // namespace a3syn
