#include "test_support.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

namespace a3syn::testing {

std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(A3SYN_FIXTURE_DIR) / name; }

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("a3syn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

SkinnedRig make_chain_rig(int n_bones, double segment, double radius, int rings_per_bone, int sides) {
  std::vector<Bone> bones;
  for (int b = 0; b < n_bones; ++b) {
    Bone bone;
    bone.name = "seg" + std::to_string(b);
    if (b > 0) bone.parent = static_cast<std::size_t>(b - 1);
    bone.rest_local = Mat4::Identity();
    if (b > 0) bone.rest_local(1, 3) = segment;
    Mat4 global = Mat4::Identity();
    global(1, 3) = segment * b;
    bone.inverse_bind = global.inverse();
    bones.push_back(bone);
  }
  SkinnedRig rig;
  rig.skeleton = Skeleton(std::move(bones));

  const int rings = n_bones * rings_per_bone + 1;
  const double length = segment * n_bones;
  for (int r = 0; r < rings; ++r) {
    const double y = length * r / (rings - 1);
    for (int s = 0; s < sides; ++s) {
      const double a = 2.0 * 3.14159265358979323846 * s / sides;
      rig.vertices.emplace_back(radius * std::cos(a), y, radius * std::sin(a));
    }
  }
  const auto bottom = static_cast<std::uint32_t>(rig.vertices.size());
  rig.vertices.emplace_back(0.0, 0.0, 0.0);
  rig.vertices.emplace_back(0.0, length, 0.0);
  for (int r = 0; r + 1 < rings; ++r) {
    for (int s = 0; s < sides; ++s) {
      const auto a = static_cast<std::uint32_t>(r * sides + s);
      const auto b = static_cast<std::uint32_t>(r * sides + (s + 1) % sides);
      rig.faces.push_back({a, b + sides, b});
      rig.faces.push_back({a, a + sides, b + sides});
    }
  }
  const auto top = static_cast<std::uint32_t>((rings - 1) * sides);
  for (int s = 0; s < sides; ++s) {
    const auto a = static_cast<std::uint32_t>(s);
    const auto b = static_cast<std::uint32_t>((s + 1) % sides);
    rig.faces.push_back({bottom, a, b});
    rig.faces.push_back({bottom + 1, top + b, top + a});
  }

  rig.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rig.vertices.size()), n_bones);
  for (std::size_t v = 0; v < rig.vertices.size(); ++v) {
    const double u = rig.vertices[v].y() / segment;  // bone coordinate
    const int b = std::clamp(static_cast<int>(std::floor(u)), 0, n_bones - 1);
    const double t = u - b;
    const auto row = static_cast<Eigen::Index>(v);
    if (b > 0 && t < 0.25) {
      const double blend = 0.5 * (1.0 - t / 0.25);
      rig.weights(row, b) = 1.0 - blend;
      rig.weights(row, b - 1) = blend;
    } else {
      rig.weights(row, b) = 1.0;
    }
  }
  rig.validate();
  return rig;
}

SkinnedRig make_random_rig(std::mt19937_64& rng, int max_bones, int max_vertices) {
  std::uniform_int_distribution<int> nb_dist(1, max_bones);
  std::uniform_int_distribution<int> nv_dist(4, max_vertices);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const int nb = nb_dist(rng);
  const int nv = nv_dist(rng);

  std::vector<Bone> bones;
  std::vector<Mat4> globals;
  for (int b = 0; b < nb; ++b) {
    Bone bone;
    bone.name = "b" + std::to_string(b);
    if (b > 0 && unit(rng) > -0.8) bone.parent = std::uniform_int_distribution<int>(0, b - 1)(rng);
    const Vec3 axis = Vec3(unit(rng), unit(rng), unit(rng)).normalized();
    Mat4 local = Mat4::Identity();
    local.topLeftCorner<3, 3>() = Eigen::AngleAxisd(1.5 * unit(rng), axis).toRotationMatrix();
    local.topRightCorner<3, 1>() = Vec3(unit(rng), unit(rng), unit(rng)) * 0.5;
    bone.rest_local = local;
    const Mat4 g = bone.parent ? Mat4(globals[*bone.parent] * local) : local;
    globals.push_back(g);
    bone.inverse_bind = g.inverse();
    bones.push_back(bone);
  }
  SkinnedRig rig;
  rig.skeleton = Skeleton(std::move(bones));
  rig.weights = Eigen::MatrixXd::Zero(nv, nb);
  std::uniform_int_distribution<int> bone_pick(0, nb - 1);
  std::uniform_real_distribution<double> w01(0.05, 1.0);
  for (int v = 0; v < nv; ++v) {
    rig.vertices.emplace_back(unit(rng), unit(rng), unit(rng));
    const int k = std::min(nb, 1 + static_cast<int>(rng() % 4));
    for (int i = 0; i < k; ++i) rig.weights(v, bone_pick(rng)) += w01(rng);
    rig.weights.row(v) /= rig.weights.row(v).sum();
  }
  for (int v = 0; v + 2 < nv; v += 3) {
    rig.faces.push_back({static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(v + 1),
                         static_cast<std::uint32_t>(v + 2)});
  }
  return rig;
}

Articulation random_articulation(std::mt19937_64& rng, std::size_t bones, double max_angle) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Articulation a(static_cast<Eigen::Index>(bones), 3);
  for (Eigen::Index b = 0; b < a.rows(); ++b) {
    Vec3 axis(unit(rng), unit(rng), unit(rng));
    axis.normalize();
    a.row(b) = (axis * max_angle * std::abs(unit(rng))).transpose();
  }
  return a;
}

std::vector<Vec3> reference_skin(const SkinnedRig& rig, const PoseState& pose) {
  const auto& sk = rig.skeleton;
  const auto rot = [](const Vec3& a) {
    Mat4 m = Mat4::Identity();
    const double th = a.norm();
    if (th > 0.0) m.topLeftCorner<3, 3>() = Eigen::AngleAxisd(th, a / th).toRotationMatrix();
    return m;
  };
  std::vector<Mat4> skin(sk.size());
  for (std::size_t b = 0; b < sk.size(); ++b) {
    std::vector<std::size_t> chain;
    for (std::optional<std::size_t> cur = b; cur; cur = sk.bone(*cur).parent) chain.push_back(*cur);
    Mat4 g = Mat4::Identity();
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      g = g * sk.bone(*it).rest_local * rot(pose.articulation.row(static_cast<Eigen::Index>(*it)).transpose());
    }
    skin[b] = g * sk.bone(b).inverse_bind;
  }
  Mat4 global = Mat4::Identity();
  global.topLeftCorner<3, 3>() = pose.scale * rot(pose.rotation).topLeftCorner<3, 3>();
  global.topRightCorner<3, 1>() = pose.translation;
  std::vector<Vec3> out;
  for (std::size_t v = 0; v < rig.vertices.size(); ++v) {
    Eigen::Vector4d acc = Eigen::Vector4d::Zero();
    for (std::size_t b = 0; b < sk.size(); ++b) {
      const double w = rig.weights(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(b));
      if (w != 0.0) acc += w * (skin[b] * rig.vertices[v].homogeneous());
    }
    out.push_back((global * acc).head<3>());
  }
  return out;
}

TriangleMesh box_mesh(const Vec3& lo, const Vec3& hi) {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i) {
    m.vertices.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
  }
  // Outward winding.
  const std::uint32_t quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    m.faces.push_back({q[0], q[1], q[2]});
    m.faces.push_back({q[0], q[2], q[3]});
  }
  return m;
}

TriangleMesh merge(const TriangleMesh& a, const TriangleMesh& b) {
  TriangleMesh out = a;
  const auto offset = static_cast<std::uint32_t>(a.vertices.size());
  out.vertices.insert(out.vertices.end(), b.vertices.begin(), b.vertices.end());
  for (const auto& f : b.faces) out.faces.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
  return out;
}

SdfGrid plane_sdf(const Vec3& normal, double offset, const Vec3& lo, const Vec3& hi, double voxel) {
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a) dims[a] = static_cast<int>(std::ceil((hi[a] - lo[a]) / voxel)) + 1;
  std::vector<float> values;
  values.reserve(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  for (int k = 0; k < dims[2]; ++k) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i) {
        values.push_back(static_cast<float>(normal.dot(lo + voxel * Vec3(i, j, k)) - offset));
      }
    }
  }
  return SdfGrid(lo, voxel, dims, std::move(values));
}

ObjectiveFixture random_objective(std::mt19937_64& rng, Stage stage, bool penetrating) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  ObjectiveFixture f;
  f.rig = std::make_unique<SkinnedRig>(make_random_rig(rng, 6, 60));
  const auto nb = f.rig->num_bones();
  f.pose = PoseState::rest(nb);
  f.pose.articulation = random_articulation(rng, nb, 0.6);
  f.pose.translation = Vec3(unit(rng), unit(rng), unit(rng)) * 0.3;
  f.pose.rotation = Vec3(unit(rng), unit(rng), unit(rng)) * 0.4;
  f.pose.scale = 1.0 + 0.4 * unit(rng);

  f.context.rig = f.rig.get();
  f.context.levels = hierarchy_levels(f.rig->skeleton);
  f.context.stage = stage;
  f.context.weights.rp = 100.0 * (1.0 + 0.5 * unit(rng));

  const auto posed = skin_vertices(*f.rig, f.pose);
  const auto owner = attribute_vertices_to_bones(f.rig->weights);
  const int n_views = stage == Stage::kSingleView ? 1 : 3;
  for (int m = 0; m < n_views; ++m) {
    const Camera cam = orbit_camera(Vec3::Zero(), 120.0 * m + 40.0 * unit(rng), 20.0 * unit(rng), 12.0,
                                    CameraIntrinsics{deg_to_rad(45.0), 256, 256});
    const Projector proj(cam);
    ViewTarget view;
    view.camera = cam;
    // The last multi-view target sits far off so its loss lands above the threshold.
    const double spread = (stage == Stage::kMultiView && m == n_views - 1) ? 400.0 : 12.0;
    for (std::size_t b = 0; b < nb; ++b) {
      BoneTarget bt;
      bt.bone = b;
      Vec2 centroid = Vec2::Zero();
      for (std::size_t v = 0; v < owner.size(); ++v) {
        if (owner[v] != b) continue;
        bt.vertices.push_back(v);
        centroid += proj.project(posed[v]);
      }
      if (bt.vertices.empty()) continue;
      centroid /= static_cast<double>(bt.vertices.size());
      bt.target = centroid + Vec2(spread + 5.0 * unit(rng), spread * unit(rng));
      view.bones.push_back(std::move(bt));
    }
    f.context.views.push_back(std::move(view));
  }

  const Vec3 normal = Vec3(0.3 * unit(rng), 1.0, 0.3 * unit(rng)).normalized();
  std::vector<double> heights;
  for (const auto& p : posed) heights.push_back(normal.dot(p));
  std::sort(heights.begin(), heights.end());
  double offset = 0.0;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    if (penetrating) {
      const auto idx = static_cast<std::size_t>(std::uniform_int_distribution<std::size_t>(1, heights.size() - 1)(rng));
      offset = 0.5 * (heights[idx - 1] + heights[idx]);
      if (heights[idx] - heights[idx - 1] > 0.02) break;
    } else {
      offset = heights.front() - 0.2 - 0.3 * std::abs(unit(rng));
      if (heights.size() < 2 || heights[1] - heights[0] > 0.02) break;
    }
  }
  Aabb box;
  for (const auto& p : posed) box.extend(p);
  f.sdf = std::make_unique<SdfGrid>(plane_sdf(normal, offset, box.lo - Vec3::Constant(1.0),
                                              box.hi + Vec3::Constant(1.0), 0.1));
  f.context.sdf = f.sdf.get();
  return f;
}

namespace {

std::vector<double*> pose_parameters(PoseState& p, std::vector<std::string>* names) {
  std::vector<double*> out;
  for (Eigen::Index b = 0; b < p.articulation.rows(); ++b) {
    for (int k = 0; k < 3; ++k) {
      out.push_back(&p.articulation(b, k));
      if (names) names->push_back("articulation[" + std::to_string(b) + "][" + std::to_string(k) + "]");
    }
  }
  for (int k = 0; k < 3; ++k) {
    out.push_back(&p.translation[k]);
    if (names) names->push_back("translation[" + std::to_string(k) + "]");
  }
  for (int k = 0; k < 3; ++k) {
    out.push_back(&p.rotation[k]);
    if (names) names->push_back("rotation[" + std::to_string(k) + "]");
  }
  out.push_back(&p.scale);
  if (names) names->push_back("scale");
  return out;
}

}  // namespace

GradientCheck check_gradient(const ObjectiveContext& context, const PoseState& pose, double h) {
  const PoseGradient g = evaluate_objective(context, pose, true).gradient;
  std::vector<std::string> names;
  PoseState probe = pose;
  const auto params = pose_parameters(probe, &names);

  std::vector<double> grad_values;
  for (Eigen::Index b = 0; b < g.articulation.rows(); ++b) {
    for (int k = 0; k < 3; ++k) grad_values.push_back(g.articulation(b, k));
  }
  for (int k = 0; k < 3; ++k) grad_values.push_back(g.translation[k]);
  for (int k = 0; k < 3; ++k) grad_values.push_back(g.rotation[k]);
  grad_values.push_back(g.scale);

  std::vector<double> numeric(params.size());
  double max_numeric = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = *params[i];
    *params[i] = saved + h;
    const double plus = evaluate_objective(context, probe, false).loss.total;
    *params[i] = saved - h;
    const double minus = evaluate_objective(context, probe, false).loss.total;
    *params[i] = saved;
    numeric[i] = (plus - minus) / (2.0 * h);
    max_numeric = std::max(max_numeric, std::abs(numeric[i]));
  }
  GradientCheck out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double denom = std::max({std::abs(grad_values[i]), std::abs(numeric[i]), 1e-6 * max_numeric, 1e-300});
    const double err = std::abs(grad_values[i] - numeric[i]) / denom;
    if (out.worst_parameter.empty() || err > out.max_relative_error) {
      out.max_relative_error = err;
      out.worst_parameter = names[i];
    }
  }
  return out;
}

}  // namespace a3syn::testing
