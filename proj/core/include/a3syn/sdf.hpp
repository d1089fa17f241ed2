#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "a3syn/common.hpp"

namespace a3syn {

/// Dense signed distance samples on a regular grid (negative inside).
/// Sample (i, j, k) sits at origin + voxel_size * (i, j, k); storage is x-fastest.
class SdfGrid {
 public:
  SdfGrid() = default;
  SdfGrid(const Vec3& origin, double voxel_size, const std::array<int, 3>& dims, std::vector<float> values);

  const Vec3& origin() const { return origin_; }
  double voxel_size() const { return voxel_size_; }
  const std::array<int, 3>& dims() const { return dims_; }
  const std::vector<float>& values() const { return values_; }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims_[1] + j) * dims_[0] + i;
  }
  float value(int i, int j, int k) const { return values_[index(i, j, k)]; }
  Vec3 node(int i, int j, int k) const { return origin_ + voxel_size_ * Vec3(i, j, k); }
  Vec3 upper() const { return node(dims_[0] - 1, dims_[1] - 1, dims_[2] - 1); }

  /// Trilinear interpolation; outside the box the value at the clamped point
  /// plus the distance to the box is returned.
  double query(const Vec3& p) const;
  /// Same as query(), also writing the spatial gradient of the interpolant.
  double query(const Vec3& p, Vec3& gradient) const;

  /// Interpolated values this close to zero are float32 noise around a surface.
  double surface_tolerance() const { return 1e-6 * voxel_size_; }

  /// Binary cache: "A3SDF1", dims u32x3, origin f64x3, voxel_size f64, values f32 (little-endian).
  void save(const std::filesystem::path& path) const;
  static SdfGrid load(const std::filesystem::path& path);

 private:
  Vec3 origin_ = Vec3::Zero();
  double voxel_size_ = 1.0;
  std::array<int, 3> dims_{0, 0, 0};
  std::vector<float> values_;
};

/// Exact unsigned distance from p to triangle (a, b, c).
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Voxel SDF of a triangle mesh over its bounding box padded by `padding_fraction` of
/// the box diagonal. `resolution` samples span the longest axis. Distances are exact
/// near the surface and propagated by closest-triangle sweeping elsewhere; the sign
/// is a majority vote of ray parity along the three axes.
SdfGrid build_sdf_grid(const TriangleMesh& mesh, int resolution = 128, double padding_fraction = 0.05);

/// Content hash of the mesh and build parameters, used as the cache file stem.
std::string sdf_cache_key(const TriangleMesh& mesh, int resolution, double padding_fraction);

/// Loads `<cache_dir>/<key>.a3sdf` when present, otherwise builds and writes it.
SdfGrid load_or_build_sdf(const TriangleMesh& mesh, int resolution, double padding_fraction,
                          const std::filesystem::path& cache_dir);

}  // namespace a3syn
