#include "a3syn/gltf.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <sstream>

#include "a3syn/codec.hpp"
#include "gltf_asset.hpp"

namespace a3syn {
namespace {

using detail::GltfAsset;
using nlohmann::json;

std::string join_indices(const std::vector<std::size_t>& rows, std::size_t limit = 20) {
  std::ostringstream out;
  for (std::size_t i = 0; i < rows.size() && i < limit; ++i) out << (i ? ", " : "") << rows[i];
  if (rows.size() > limit) out << ", ... (" << rows.size() << " total)";
  return out.str();
}

struct MeshData {
  std::vector<Vec3> positions;
  std::vector<Face> faces;
  std::vector<std::vector<std::pair<std::size_t, double>>> influences;  // per vertex: (skin joint, weight)
};

void append_skinned_mesh(const GltfAsset& asset, std::size_t mesh_index, MeshData& out) {
  const auto& mesh = asset.doc().at("meshes").at(mesh_index);
  for (const auto& prim : mesh.at("primitives")) {
    if (prim.value("mode", 4) != 4) throw Error("unsupported primitive mode " + std::to_string(prim.value("mode", 4)));
    const auto& attrs = prim.at("attributes");
    if (!attrs.contains("POSITION")) throw Error("primitive without POSITION");
    const auto positions = asset.read_accessor(attrs["POSITION"].get<std::size_t>());
    const std::size_t offset = out.positions.size();
    for (const auto& p : positions) out.positions.emplace_back(p.at(0), p.at(1), p.at(2));
    out.influences.resize(out.positions.size());

    for (int set = 0;; ++set) {
      const std::string jk = "JOINTS_" + std::to_string(set);
      const std::string wk = "WEIGHTS_" + std::to_string(set);
      if (!attrs.contains(jk) || !attrs.contains(wk)) break;
      const auto joints = asset.read_accessor(attrs[jk].get<std::size_t>());
      const auto weights = asset.read_accessor(attrs[wk].get<std::size_t>());
      if (joints.size() != positions.size() || weights.size() != positions.size()) {
        throw Error("skin attribute counts differ from POSITION");
      }
      for (std::size_t v = 0; v < positions.size(); ++v) {
        for (std::size_t c = 0; c < joints[v].size() && c < weights[v].size(); ++c) {
          if (weights[v][c] == 0.0) continue;
          out.influences[offset + v].emplace_back(static_cast<std::size_t>(joints[v][c]), weights[v][c]);
        }
      }
    }

    std::vector<std::size_t> idx;
    if (prim.contains("indices")) {
      for (const auto& e : asset.read_accessor(prim["indices"].get<std::size_t>())) {
        idx.push_back(static_cast<std::size_t>(e[0]));
      }
    } else {
      for (std::size_t i = 0; i < positions.size(); ++i) idx.push_back(i);
    }
    if (idx.size() % 3 != 0) throw Error("triangle index count is not a multiple of 3");
    for (std::size_t i = 0; i < idx.size(); i += 3) {
      Face f{};
      for (int k = 0; k < 3; ++k) {
        if (idx[i + k] >= positions.size()) throw Error("triangle index out of range");
        f[k] = static_cast<std::uint32_t>(offset + idx[i + k]);
      }
      out.faces.push_back(f);
    }
  }
}

std::optional<std::array<Vec3, 2>> read_limits(const json& node) {
  if (!node.contains("extras") || !node["extras"].is_object()) return std::nullopt;
  const auto& extras = node["extras"];
  if (!extras.contains("a3syn_limits")) return std::nullopt;
  const auto& lim = extras["a3syn_limits"];
  const auto lo = lim.at("min").get<std::vector<double>>();
  const auto hi = lim.at("max").get<std::vector<double>>();
  if (lo.size() != 3 || hi.size() != 3) throw Error("a3syn_limits min/max must have 3 entries");
  return std::array<Vec3, 2>{Vec3(lo[0], lo[1], lo[2]), Vec3(hi[0], hi[1], hi[2])};
}

}  // namespace

RigPackage load_rig(const std::filesystem::path& path, const RigLoadOptions& options) {
  const GltfAsset asset = GltfAsset::load(path);
  const auto& doc = asset.doc();
  if (!doc.contains("skins") || doc["skins"].empty()) throw Error("no rig found");
  const std::size_t n_skins = doc["skins"].size();
  std::size_t skin_index = 0;
  if (options.skin) {
    skin_index = *options.skin;
    if (skin_index >= n_skins) throw ContractViolation("skin index " + std::to_string(skin_index) + " out of range");
  } else if (n_skins > 1) {
    throw ContractViolation("file has " + std::to_string(n_skins) + " skins; select one");
  }
  const auto& skin = doc["skins"][skin_index];
  const auto joint_nodes = skin.at("joints").get<std::vector<std::size_t>>();
  if (joint_nodes.empty()) throw Error("no rig found");

  const auto parents = asset.node_parents();
  const auto globals = asset.node_globals();
  const std::size_t nj = joint_nodes.size();
  std::vector<long> joint_of_node(asset.node_count(), -1);
  for (std::size_t j = 0; j < nj; ++j) {
    if (joint_nodes[j] >= asset.node_count() || joint_of_node[joint_nodes[j]] != -1) throw Error("invalid hierarchy");
    joint_of_node[joint_nodes[j]] = static_cast<long>(j);
  }

  // Nearest joint ancestor of every joint.
  std::vector<long> joint_parent(nj, -1);
  for (std::size_t j = 0; j < nj; ++j) {
    long n = parents[joint_nodes[j]];
    while (n >= 0 && joint_of_node[static_cast<std::size_t>(n)] < 0) n = parents[static_cast<std::size_t>(n)];
    if (n >= 0) joint_parent[j] = joint_of_node[static_cast<std::size_t>(n)];
  }

  // Kahn's algorithm, lowest original index first, for a deterministic order.
  std::vector<std::vector<std::size_t>> kids(nj);
  std::vector<int> pending(nj, 0);
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t j = 0; j < nj; ++j) {
    if (joint_parent[j] >= 0) {
      kids[static_cast<std::size_t>(joint_parent[j])].push_back(j);
      pending[j] = 1;
    } else {
      ready.push(j);
    }
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t j = ready.top();
    ready.pop();
    order.push_back(j);
    for (const auto c : kids[j]) {
      if (--pending[c] == 0) ready.push(c);
    }
  }
  if (order.size() != nj) throw Error("invalid hierarchy");
  std::vector<std::size_t> new_index(nj);
  for (std::size_t i = 0; i < nj; ++i) new_index[order[i]] = i;

  std::vector<Mat4> ibm(nj, Mat4::Identity());
  if (skin.contains("inverseBindMatrices")) {
    const auto mats = asset.read_accessor(skin["inverseBindMatrices"].get<std::size_t>());
    if (mats.size() < nj) throw Error("inverseBindMatrices has fewer entries than joints");
    for (std::size_t j = 0; j < nj; ++j) {
      for (int c = 0; c < 4; ++c) {
        for (int r = 0; r < 4; ++r) ibm[j](r, c) = mats[j][static_cast<std::size_t>(c) * 4 + r];
      }
    }
  }

  RigPackage pkg;
  std::vector<Bone> bones;
  bones.reserve(nj);
  bool any_limits = false;
  Articulation lower = Articulation::Constant(static_cast<Eigen::Index>(nj), 3, -std::numeric_limits<double>::infinity());
  Articulation upper = Articulation::Constant(static_cast<Eigen::Index>(nj), 3, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < nj; ++i) {
    const std::size_t j = order[i];
    const auto& node = doc["nodes"][joint_nodes[j]];
    Bone bone;
    bone.name = node.value("name", "joint" + std::to_string(j));
    if (joint_parent[j] >= 0) {
      const std::size_t pj = static_cast<std::size_t>(joint_parent[j]);
      bone.parent = new_index[pj];
      bone.rest_local = globals[joint_nodes[pj]].inverse() * globals[joint_nodes[j]];
    } else {
      bone.rest_local = globals[joint_nodes[j]];
    }
    bone.inverse_bind = ibm[j];
    bones.push_back(std::move(bone));
    pkg.original_joint_indices.push_back(static_cast<std::uint32_t>(j));
    if (const auto lim = read_limits(node)) {
      any_limits = true;
      lower.row(static_cast<Eigen::Index>(i)) = (*lim)[0].transpose();
      upper.row(static_cast<Eigen::Index>(i)) = (*lim)[1].transpose();
    }
  }
  if (any_limits) pkg.limits = BoneLimits{lower, upper};
  pkg.rig.skeleton = Skeleton(std::move(bones));

  MeshData mesh;
  for (std::size_t n = 0; n < asset.node_count(); ++n) {
    const auto& node = doc["nodes"][n];
    if (!node.contains("mesh") || !node.contains("skin")) continue;
    if (node["skin"].get<std::size_t>() != skin_index) continue;
    append_skinned_mesh(asset, node["mesh"].get<std::size_t>(), mesh);
  }
  if (mesh.positions.empty()) throw Error("no rig found");

  const std::size_t nv = mesh.positions.size();
  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nv), static_cast<Eigen::Index>(nj));
  for (std::size_t v = 0; v < nv; ++v) {
    for (const auto& [joint, w] : mesh.influences[v]) {
      if (joint >= nj) throw Error("vertex " + std::to_string(v) + " references joint " + std::to_string(joint));
      weights(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(new_index[joint])) += w;
    }
  }
  std::vector<std::size_t> bad_rows;
  for (Eigen::Index v = 0; v < weights.rows(); ++v) {
    const double sum = weights.row(v).sum();
    if (!(std::abs(sum - 1.0) <= options.weight_tolerance) || (weights.row(v).array() < 0.0).any()) {
      bad_rows.push_back(static_cast<std::size_t>(v));
    } else {
      weights.row(v) /= sum;
    }
  }
  if (!bad_rows.empty()) throw Error("non-normalized weights: rows " + join_indices(bad_rows));

  pkg.rig.vertices = std::move(mesh.positions);
  pkg.rig.faces = std::move(mesh.faces);
  pkg.rig.weights = std::move(weights);
  pkg.source_name = path.filename().string();
  pkg.source_sha256 = sha256_hex(asset.raw_bytes());
  return pkg;
}

bool RigReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const RigCheck& c) { return c.passed; });
}

const RigCheck* RigReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

RigReport verify_rig(const RigPackage& package, double bind_tolerance, double rest_tolerance) {
  const auto& rig = package.rig;
  const auto& sk = rig.skeleton;
  RigReport report;

  {
    RigCheck c{"hierarchy", true, ""};
    for (std::size_t i = 0; i < sk.size(); ++i) {
      const auto& p = sk.bone(i).parent;
      if (p && *p >= i) {
        c.passed = false;
        c.detail = "bone " + std::to_string(i) + " precedes its parent";
        break;
      }
    }
    if (sk.size() == 0) {
      c.passed = false;
      c.detail = "no bones";
    }
    report.checks.push_back(c);
  }

  bool weights_ok = true;
  {
    RigCheck c{"weights", true, ""};
    std::vector<std::size_t> bad;
    if (rig.weights.rows() != static_cast<Eigen::Index>(rig.num_vertices()) ||
        rig.weights.cols() != static_cast<Eigen::Index>(sk.size())) {
      c.passed = false;
      c.detail = "weight matrix shape does not match |V| x |B|";
    } else {
      for (Eigen::Index v = 0; v < rig.weights.rows(); ++v) {
        const double sum = rig.weights.row(v).sum();
        if (!(std::abs(sum - 1.0) <= 1e-4) || (rig.weights.row(v).array() < 0.0).any()) {
          bad.push_back(static_cast<std::size_t>(v));
        }
      }
      if (!bad.empty()) {
        c.passed = false;
        c.detail = "vertices " + join_indices(bad);
      }
    }
    weights_ok = c.passed;
    report.checks.push_back(c);
  }

  {
    RigCheck c{"inverse_bind", true, ""};
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < sk.size(); ++i) {
      if (!(sk.bind_error(i) <= bind_tolerance)) bad.push_back(i);
    }
    if (!bad.empty()) {
      c.passed = false;
      c.detail = "bones " + join_indices(bad);
    }
    report.checks.push_back(c);
  }

  {
    RigCheck c{"rest_pose", true, ""};
    if (!weights_ok) {
      c.passed = false;
      c.detail = "skipped: weights invalid";
    } else if (rig.vertices.empty()) {
      c.passed = false;
      c.detail = "no vertices";
    } else {
      const auto posed = skin_vertices(rig, PoseState::rest(sk.size()));
      const double radius = std::max(bounding_sphere(rig.vertices).radius, 1e-12);
      double worst = 0.0;
      std::size_t worst_v = 0;
      for (std::size_t v = 0; v < posed.size(); ++v) {
        const double e = (posed[v] - rig.vertices[v]).norm();
        if (e > worst || std::isnan(e)) {
          worst = e;
          worst_v = v;
        }
      }
      if (!(worst <= rest_tolerance * radius)) {
        c.passed = false;
        std::ostringstream msg;
        msg << "vertex " << worst_v << " off by " << worst << " (limit " << rest_tolerance * radius << ")";
        c.detail = msg.str();
      }
    }
    report.checks.push_back(c);
  }
  return report;
}

}  // namespace a3syn
