#include "a3syn/rig.hpp"

#include <cmath>
#include <deque>
#include <sstream>

#include <Eigen/Geometry>

#include "a3syn/so3.hpp"

namespace a3syn {

Skeleton::Skeleton(std::vector<Bone> bones) : bones_(std::move(bones)) {
  children_.resize(bones_.size());
  rest_globals_.resize(bones_.size());
  for (std::size_t i = 0; i < bones_.size(); ++i) {
    const auto& parent = bones_[i].parent;
    if (parent) {
      if (*parent >= i) {
        std::ostringstream msg;
        msg << "bone " << i << " (" << bones_[i].name << ") has parent " << *parent
            << " which does not precede it";
        throw ContractViolation(msg.str());
      }
      children_[*parent].push_back(i);
      rest_globals_[i] = rest_globals_[*parent] * bones_[i].rest_local;
    } else {
      roots_.push_back(i);
      rest_globals_[i] = bones_[i].rest_local;
    }
  }
}

double Skeleton::bind_error(std::size_t i) const {
  return (rest_globals_.at(i) * bones_.at(i).inverse_bind - Mat4::Identity()).cwiseAbs().maxCoeff();
}

bool Skeleton::is_descendant(std::size_t bone, std::size_t ancestor) const {
  std::optional<std::size_t> cur = bone;
  while (cur) {
    if (*cur == ancestor) return true;
    cur = bones_[*cur].parent;
  }
  return false;
}

void SkinnedRig::validate() const {
  const auto nv = vertices.size();
  const auto nb = skeleton.size();
  if (static_cast<std::size_t>(weights.rows()) != nv || static_cast<std::size_t>(weights.cols()) != nb) {
    throw ContractViolation("weight matrix shape does not match |V| x |B|");
  }
  for (const auto& f : faces) {
    for (auto idx : f) {
      if (idx >= nv) throw ContractViolation("face index out of range");
    }
  }
  for (Eigen::Index v = 0; v < weights.rows(); ++v) {
    if ((weights.row(v).array() < 0.0).any()) {
      throw ContractViolation("negative skinning weight at vertex " + std::to_string(v));
    }
    const double sum = weights.row(v).sum();
    if (std::abs(sum - 1.0) > 1e-4) {
      throw ContractViolation("weight row " + std::to_string(v) + " sums to " + std::to_string(sum));
    }
  }
}

PoseState PoseState::rest(std::size_t num_bones, const Vec3& translation) {
  PoseState p;
  p.articulation = Articulation::Zero(static_cast<Eigen::Index>(num_bones), 3);
  p.translation = translation;
  return p;
}

PoseGradient PoseGradient::zero(std::size_t num_bones) {
  PoseGradient g;
  g.articulation = Articulation::Zero(static_cast<Eigen::Index>(num_bones), 3);
  return g;
}

PoseGradient& PoseGradient::operator+=(const PoseGradient& other) {
  articulation += other.articulation;
  translation += other.translation;
  rotation += other.rotation;
  scale += other.scale;
  return *this;
}

PoseGradient& PoseGradient::operator*=(double k) {
  articulation *= k;
  translation *= k;
  rotation *= k;
  scale *= k;
  return *this;
}

double PoseGradient::max_abs() const {
  double m = std::max({translation.cwiseAbs().maxCoeff(), rotation.cwiseAbs().maxCoeff(), std::abs(scale)});
  if (articulation.size() > 0) m = std::max(m, articulation.cwiseAbs().maxCoeff());
  return m;
}

bool PoseGradient::all_finite() const {
  return articulation.allFinite() && translation.allFinite() && rotation.allFinite() && std::isfinite(scale);
}

std::vector<Mat4> forward_kinematics(const Skeleton& skeleton, const Articulation& articulation) {
  if (static_cast<std::size_t>(articulation.rows()) != skeleton.size()) {
    throw ContractViolation("articulation has " + std::to_string(articulation.rows()) +
                            " rows but skeleton has " + std::to_string(skeleton.size()) + " bones");
  }
  std::vector<Mat4> globals(skeleton.size());
  for (std::size_t i = 0; i < skeleton.size(); ++i) {
    const Bone& b = skeleton.bone(i);
    const Vec3 a = articulation.row(static_cast<Eigen::Index>(i)).transpose();
    const Mat4 local = b.rest_local * rotation_to_homogeneous(axis_angle_to_matrix(a));
    globals[i] = b.parent ? Mat4(globals[*b.parent] * local) : local;
  }
  return globals;
}

SkinningResult skin_forward(const SkinnedRig& rig, const PoseState& pose) {
  if (!(pose.scale > 0.0)) throw ContractViolation("pose scale must be positive");
  SkinningResult out;
  out.globals = forward_kinematics(rig.skeleton, pose.articulation);

  const auto nb = rig.num_bones();
  std::vector<Eigen::Matrix<double, 3, 4>> skinning(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    skinning[b] = (out.globals[b] * rig.skeleton.bone(b).inverse_bind).topRows<3>();
  }

  const Mat3 rot = axis_angle_to_matrix(pose.rotation);
  out.object_space.resize(rig.num_vertices());
  out.posed.resize(rig.num_vertices());
  for (std::size_t v = 0; v < rig.num_vertices(); ++v) {
    const Eigen::Vector4d x = rig.vertices[v].homogeneous();
    Vec3 p = Vec3::Zero();
    for (std::size_t b = 0; b < nb; ++b) {
      const double w = rig.weights(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(b));
      if (w != 0.0) p += w * (skinning[b] * x);
    }
    out.object_space[v] = p;
    out.posed[v] = pose.scale * (rot * p) + pose.translation;
  }
  return out;
}

std::vector<Vec3> skin_vertices(const SkinnedRig& rig, const PoseState& pose) {
  return skin_forward(rig, pose).posed;
}

PoseGradient skin_backward(const SkinnedRig& rig, const PoseState& pose,
                           const SkinningResult& forward, std::span<const Vec3> d_posed) {
  const auto nb = rig.num_bones();
  const auto nv = rig.num_vertices();
  if (d_posed.size() != nv) throw ContractViolation("gradient length does not match vertex count");

  PoseGradient grad = PoseGradient::zero(nb);
  const Mat3 rot = axis_angle_to_matrix(pose.rotation);
  const auto d_rot = axis_angle_jacobian(pose.rotation);

  // Global similarity transform y = s R p + t.
  Mat3 outer = Mat3::Zero();
  std::vector<Vec3> d_object(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    const Vec3& g = d_posed[v];
    const Vec3& p = forward.object_space[v];
    grad.translation += g;
    grad.scale += g.dot(rot * p);
    outer += g * p.transpose();
    d_object[v] = pose.scale * (rot.transpose() * g);
  }
  for (int k = 0; k < 3; ++k) grad.rotation[k] = pose.scale * outer.cwiseProduct(d_rot[k]).sum();

  // LBS: p = sum_b w_b (G_b M_b) x, accumulate dL/dG_b = (sum_v w h x^T) M^T.
  std::vector<Eigen::Matrix<double, 3, 4>> d_global(nb, Eigen::Matrix<double, 3, 4>::Zero());
  for (std::size_t b = 0; b < nb; ++b) {
    Eigen::Matrix<double, 3, 4> acc = Eigen::Matrix<double, 3, 4>::Zero();
    for (std::size_t v = 0; v < nv; ++v) {
      const double w = rig.weights(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(b));
      if (w != 0.0) acc += w * d_object[v] * rig.vertices[v].homogeneous().transpose();
    }
    d_global[b] = acc * rig.skeleton.bone(b).inverse_bind.transpose();
  }

  // FK in reverse topological order: G_i = P_i R_i, P_i = G_parent L_i.
  for (std::size_t ii = nb; ii-- > 0;) {
    const Bone& bone = rig.skeleton.bone(ii);
    const Vec3 a = pose.articulation.row(static_cast<Eigen::Index>(ii)).transpose();
    const Mat4 rot_h = rotation_to_homogeneous(axis_angle_to_matrix(a));
    const Mat4 prefix = bone.parent ? Mat4(forward.globals[*bone.parent] * bone.rest_local) : bone.rest_local;

    const Mat3 d_block = prefix.topLeftCorner<3, 3>().transpose() * d_global[ii].leftCols<3>();
    const auto d_rod = axis_angle_jacobian(a);
    for (int k = 0; k < 3; ++k) {
      grad.articulation(static_cast<Eigen::Index>(ii), k) = d_block.cwiseProduct(d_rod[k]).sum();
    }
    if (bone.parent) {
      const Mat4 local = bone.rest_local * rot_h;
      d_global[*bone.parent] += d_global[ii] * local.transpose();
    }
  }
  return grad;
}

std::vector<std::size_t> attribute_vertices_to_bones(const Eigen::MatrixXd& weights) {
  std::vector<std::size_t> out(static_cast<std::size_t>(weights.rows()), 0);
  for (Eigen::Index v = 0; v < weights.rows(); ++v) {
    Eigen::Index best = 0;
    for (Eigen::Index b = 1; b < weights.cols(); ++b) {
      if (weights(v, b) > weights(v, best)) best = b;
    }
    out[static_cast<std::size_t>(v)] = static_cast<std::size_t>(best);
  }
  return out;
}

HierarchyLevels hierarchy_levels(const Skeleton& skeleton) {
  HierarchyLevels h;
  h.levels.assign(skeleton.size(), -1);
  std::deque<std::size_t> queue;
  for (auto r : skeleton.roots()) {
    h.levels[r] = 0;
    queue.push_back(r);
  }
  while (!queue.empty()) {
    const auto b = queue.front();
    queue.pop_front();
    for (auto c : skeleton.children()[b]) {
      h.levels[c] = h.levels[b] + 1;
      queue.push_back(c);
    }
  }
  return h;
}

std::vector<Vec3> bone_origins(const SkinnedRig& rig, const PoseState& pose) {
  const auto globals = forward_kinematics(rig.skeleton, pose.articulation);
  const Mat3 rot = axis_angle_to_matrix(pose.rotation);
  std::vector<Vec3> out;
  out.reserve(globals.size());
  for (const auto& g : globals) out.push_back(pose.scale * (rot * g.block<3, 1>(0, 3)) + pose.translation);
  return out;
}

BoundingSphere bounding_sphere(std::span<const Vec3> points) {
  BoundingSphere s;
  if (points.empty()) return s;
  Aabb box;
  for (const auto& p : points) box.extend(p);
  s.center = box.center();
  for (const auto& p : points) s.radius = std::max(s.radius, (p - s.center).norm());
  return s;
}

}  // namespace a3syn
