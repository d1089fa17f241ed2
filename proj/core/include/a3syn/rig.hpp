#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "a3syn/common.hpp"

namespace a3syn {

/// Per-bone axis-angle rotations, one row per bone (radians).
using Articulation = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct Bone {
  std::string name;
  std::optional<std::size_t> parent;
  Mat4 rest_local = Mat4::Identity();
  Mat4 inverse_bind = Mat4::Identity();
};

/// Bone forest stored in topological order (parents precede children).
class Skeleton {
 public:
  Skeleton() = default;
  /// Throws ContractViolation when a parent index does not precede its child.
  explicit Skeleton(std::vector<Bone> bones);

  std::size_t size() const { return bones_.size(); }
  const std::vector<Bone>& bones() const { return bones_; }
  const Bone& bone(std::size_t i) const { return bones_.at(i); }
  const std::vector<std::size_t>& roots() const { return roots_; }
  const std::vector<std::vector<std::size_t>>& children() const { return children_; }
  const std::vector<Mat4>& rest_globals() const { return rest_globals_; }

  /// Max entry-wise deviation of rest_global * inverse_bind from identity.
  double bind_error(std::size_t i) const;

  /// True if `bone` is `ancestor` or one of its descendants.
  bool is_descendant(std::size_t bone, std::size_t ancestor) const;

 private:
  std::vector<Bone> bones_;
  std::vector<std::size_t> roots_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<Mat4> rest_globals_;
};

/// Mesh bound to a skeleton by a |V| x |B| weight matrix, C = (V, B, W).
struct SkinnedRig {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  Skeleton skeleton;
  Eigen::MatrixXd weights;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_bones() const { return skeleton.size(); }

  /// Checks weight shape, row sums (1e-4), face ranges and weight coverage.
  void validate() const;
};

/// Optimization variables: articulation plus the object-to-scene transform.
struct PoseState {
  Articulation articulation;
  Vec3 translation = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();
  double scale = 1.0;

  static PoseState rest(std::size_t num_bones, const Vec3& translation = Vec3::Zero());
  std::size_t num_bones() const { return static_cast<std::size_t>(articulation.rows()); }
};

/// Same layout as PoseState; `scale` holds dL/dscale.
struct PoseGradient {
  Articulation articulation;
  Vec3 translation = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();
  double scale = 0.0;

  static PoseGradient zero(std::size_t num_bones);
  PoseGradient& operator+=(const PoseGradient& other);
  PoseGradient& operator*=(double k);
  double max_abs() const;
  bool all_finite() const;
};

/// Optional per-bone articulation bounds ingested alongside a rig.
struct BoneLimits {
  Articulation lower;
  Articulation upper;
};

struct HierarchyLevels {
  std::vector<int> levels;
};

std::vector<Mat4> forward_kinematics(const Skeleton& skeleton, const Articulation& articulation);

/// Intermediate values of one skinning evaluation, reused by skin_backward.
struct SkinningResult {
  std::vector<Mat4> globals;
  std::vector<Vec3> object_space;
  std::vector<Vec3> posed;
};

SkinningResult skin_forward(const SkinnedRig& rig, const PoseState& pose);

/// Linear blend skinning followed by the global similarity transform.
std::vector<Vec3> skin_vertices(const SkinnedRig& rig, const PoseState& pose);

/// Pulls dL/d(posed vertex) back to dL/d(pose) through LBS and forward kinematics.
PoseGradient skin_backward(const SkinnedRig& rig, const PoseState& pose,
                           const SkinningResult& forward, std::span<const Vec3> d_posed);

/// Bone with the largest weight per vertex; ties go to the lowest index.
std::vector<std::size_t> attribute_vertices_to_bones(const Eigen::MatrixXd& weights);

HierarchyLevels hierarchy_levels(const Skeleton& skeleton);

/// Bone origins (translation of each global transform) in scene space.
std::vector<Vec3> bone_origins(const SkinnedRig& rig, const PoseState& pose);

struct BoundingSphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};
BoundingSphere bounding_sphere(std::span<const Vec3> points);

}  // namespace a3syn
