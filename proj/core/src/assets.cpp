#include "a3syn/assets.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "a3syn/codec.hpp"
#include "gltf_asset.hpp"

namespace a3syn {
namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

std::string lower_ext(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

Vec3 vec3_from(const json& j, const char* what) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw Error(std::string(what) + " must have 3 entries");
  return {v[0], v[1], v[2]};
}

std::vector<double> to_vector(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

// Unbounded limit components are written as null.
ordered bound_to_json(const Eigen::RowVector3d& row) {
  ordered out = ordered::array();
  for (int k = 0; k < 3; ++k) out.push_back(std::isfinite(row[k]) ? ordered(row[k]) : ordered());
  return out;
}

Vec3 bound_from_json(const json& j, double infinite_sign) {
  if (!j.is_array() || j.size() != 3) throw Error("limits must have 3 entries");
  Vec3 out;
  for (int k = 0; k < 3; ++k) {
    out[k] = j[k].is_null() ? infinite_sign * std::numeric_limits<double>::infinity() : j[k].get<double>();
  }
  return out;
}

std::vector<double> to_vector(const Mat4& m) {
  std::vector<double> out;
  for (int c = 0; c < 4; ++c) {
    for (int r = 0; r < 4; ++r) out.push_back(m(r, c));
  }
  return out;
}

Mat4 mat4_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 16) throw Error("matrix must have 16 entries");
  Mat4 m;
  for (int c = 0; c < 4; ++c) {
    for (int r = 0; r < 4; ++r) m(r, c) = v[static_cast<std::size_t>(c) * 4 + r];
  }
  return m;
}

json parse_json(std::string_view text, const char* what) {
  auto doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw Error(std::string(what) + ": malformed JSON");
  return doc;
}

std::vector<Face> fan(const std::vector<std::uint32_t>& poly) {
  std::vector<Face> out;
  for (std::size_t i = 1; i + 1 < poly.size(); ++i) out.push_back({poly[0], poly[i], poly[i + 1]});
  return out;
}

TriangleMesh dedup_vertices(const TriangleMesh& mesh) {
  std::map<std::array<double, 3>, std::uint32_t> seen;
  TriangleMesh out;
  std::vector<std::uint32_t> remap(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    const std::array<double, 3> key{v.x(), v.y(), v.z()};
    auto [it, inserted] = seen.emplace(key, static_cast<std::uint32_t>(out.vertices.size()));
    if (inserted) out.vertices.push_back(v);
    remap[i] = it->second;
  }
  for (const auto& f : mesh.faces) out.faces.push_back({remap[f[0]], remap[f[1]], remap[f[2]]});
  return out;
}

TriangleMesh load_gltf_scene(const std::filesystem::path& path) {
  const auto asset = detail::GltfAsset::load(path);
  const auto& doc = asset.doc();
  const auto globals = asset.node_globals();
  TriangleMesh mesh;
  for (std::size_t n = 0; n < asset.node_count(); ++n) {
    const auto& node = doc["nodes"][n];
    if (!node.contains("mesh")) continue;
    const auto& m = doc.at("meshes").at(node["mesh"].get<std::size_t>());
    for (const auto& prim : m.at("primitives")) {
      const int mode = prim.value("mode", 4);
      if (mode != 4) throw Error("unsupported primitive mode " + std::to_string(mode));
      const auto positions = asset.read_accessor(prim.at("attributes").at("POSITION").get<std::size_t>());
      const auto offset = static_cast<std::uint32_t>(mesh.vertices.size());
      for (const auto& p : positions) {
        const Eigen::Vector4d h = globals[n] * Eigen::Vector4d(p.at(0), p.at(1), p.at(2), 1.0);
        mesh.vertices.push_back(h.head<3>());
      }
      std::vector<std::uint32_t> idx;
      if (prim.contains("indices")) {
        for (const auto& e : asset.read_accessor(prim["indices"].get<std::size_t>())) {
          idx.push_back(static_cast<std::uint32_t>(e[0]));
        }
      } else {
        for (std::size_t i = 0; i < positions.size(); ++i) idx.push_back(static_cast<std::uint32_t>(i));
      }
      if (idx.size() % 3 != 0) throw Error("triangle index count is not a multiple of 3");
      for (std::size_t i = 0; i < idx.size(); i += 3) {
        for (int k = 0; k < 3; ++k) {
          if (idx[i + k] >= positions.size()) throw Error("triangle index out of range");
        }
        mesh.faces.push_back({offset + idx[i], offset + idx[i + 1], offset + idx[i + 2]});
      }
    }
  }
  return mesh;
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (const auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ContractViolation("unknown config key '" + where + key + "'");
  }
}

}  // namespace

TriangleMesh parse_obj(std::string_view text, const SceneLoadOptions& options) {
  TriangleMesh mesh;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw Error("obj line " + std::to_string(line_no) + ": bad vertex");
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<std::uint32_t> poly;
      std::string tok;
      while (ls >> tok) {
        const auto slash = tok.find('/');
        const std::string head = tok.substr(0, slash);
        long idx = 0;
        const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), idx);
        if (ec != std::errc() || ptr != head.data() + head.size() || idx == 0) {
          throw Error("obj line " + std::to_string(line_no) + ": bad face index '" + tok + "'");
        }
        const long n = static_cast<long>(mesh.vertices.size());
        const long resolved = idx > 0 ? idx - 1 : n + idx;
        if (resolved < 0 || resolved >= n) throw Error("obj line " + std::to_string(line_no) + ": face index out of range");
        poly.push_back(static_cast<std::uint32_t>(resolved));
      }
      if (poly.size() < 3) throw Error("obj line " + std::to_string(line_no) + ": face with fewer than 3 vertices");
      for (const auto& f : fan(poly)) mesh.faces.push_back(f);
    }
  }
  return options.dedup ? dedup_vertices(mesh) : mesh;
}

TriangleMesh load_scene(const std::filesystem::path& path, const SceneLoadOptions& options) {
  const auto ext = lower_ext(path);
  TriangleMesh mesh;
  if (ext == ".obj") {
    mesh = parse_obj(read_text(path), {});
  } else if (ext == ".gltf" || ext == ".glb") {
    mesh = load_gltf_scene(path);
  } else {
    throw Error("unsupported scene format '" + ext + "'");
  }
  if (mesh.empty()) throw Error("scene " + path.string() + " has no triangles");
  return options.dedup ? dedup_vertices(mesh) : mesh;
}

void write_obj(const std::filesystem::path& path, std::span<const Vec3> vertices, std::span<const Face> faces) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& v : vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  write_file(path, out.str());
}

std::string pose_to_json(const PoseDocument& doc) {
  const auto nb = doc.pose.num_bones();
  if (!doc.bone_names.empty() && doc.bone_names.size() != nb) throw ContractViolation("bone name count mismatch");
  ordered j;
  j["schema"] = "a3syn-pose-v1";
  j["bones"] = ordered::array();
  for (std::size_t b = 0; b < nb; ++b) {
    ordered bone;
    bone["name"] = doc.bone_names.empty() ? "bone" + std::to_string(b) : doc.bone_names[b];
    const auto r = static_cast<Eigen::Index>(b);
    bone["axis_angle"] = {doc.pose.articulation(r, 0), doc.pose.articulation(r, 1), doc.pose.articulation(r, 2)};
    j["bones"].push_back(bone);
  }
  j["global"]["translation"] = to_vector(doc.pose.translation);
  j["global"]["rotation"] = to_vector(doc.pose.rotation);
  j["global"]["scale"] = doc.pose.scale;
  j["original_joint_indices"] = doc.original_joint_indices;
  return j.dump(2) + "\n";
}

PoseDocument pose_from_json(std::string_view text) {
  const auto j = parse_json(text, "pose");
  if (j.value("schema", "") != "a3syn-pose-v1") throw Error("pose: unsupported schema");
  PoseDocument doc;
  try {
    const auto& bones = j.at("bones");
    doc.pose.articulation.resize(static_cast<Eigen::Index>(bones.size()), 3);
    for (std::size_t b = 0; b < bones.size(); ++b) {
      doc.bone_names.push_back(bones[b].at("name").get<std::string>());
      doc.pose.articulation.row(static_cast<Eigen::Index>(b)) = vec3_from(bones[b].at("axis_angle"), "axis_angle").transpose();
    }
    const auto& g = j.at("global");
    doc.pose.translation = vec3_from(g.at("translation"), "translation");
    doc.pose.rotation = vec3_from(g.at("rotation"), "rotation");
    doc.pose.scale = g.at("scale").get<double>();
    take(j, "original_joint_indices", doc.original_joint_indices);
  } catch (const json::exception& e) {
    throw Error(std::string("pose: ") + e.what());
  }
  if (!(doc.pose.scale > 0.0)) throw Error("pose: scale must be positive");
  return doc;
}

void write_pose(const std::filesystem::path& path, const PoseDocument& doc) { write_file(path, pose_to_json(doc)); }

PoseDocument read_pose(const std::filesystem::path& path) { return pose_from_json(read_text(path)); }

PipelineConfig config_from_json(std::string_view text) {
  const auto j = parse_json(text, "config");
  if (!j.is_object()) throw ContractViolation("config must be a JSON object");
  reject_unknown(j,
                 {"prompt", "anchor", "elevations_deg", "per_level", "distance_factor", "vertical_fov_deg",
                  "image_size", "dilation_fraction", "similarity_threshold", "sigma_filter", "weights", "optimizer",
                  "mv_rounds", "gamma_schedule", "mv_views", "refresh_interval", "n_candidates", "max_retries",
                  "seed"},
                 "");
  PipelineConfig c;
  try {
    take(j, "prompt", c.prompt);
    if (j.contains("anchor")) c.anchor = vec3_from(j["anchor"], "anchor");
    take(j, "elevations_deg", c.elevations_deg);
    take(j, "per_level", c.per_level);
    take(j, "distance_factor", c.distance_factor);
    take(j, "vertical_fov_deg", c.vertical_fov_deg);
    take(j, "image_size", c.image_size);
    take(j, "dilation_fraction", c.dilation_fraction);
    take(j, "similarity_threshold", c.correspondence.similarity_threshold);
    take(j, "sigma_filter", c.correspondence.sigma_filter);
    take(j, "mv_rounds", c.mv_rounds);
    if (j.contains("gamma_schedule")) {
      take(j, "gamma_schedule", c.gamma_schedule);
    } else if (j.contains("mv_rounds")) {
      c.gamma_schedule = default_gamma_schedule(c.mv_rounds);
    }
    take(j, "mv_views", c.mv_views);
    take(j, "refresh_interval", c.refresh_interval);
    take(j, "n_candidates", c.n_candidates);
    take(j, "max_retries", c.max_retries);
    take(j, "seed", c.seed);
    if (const auto it = j.find("weights"); it != j.end()) {
      reject_unknown(*it, {"bc", "mvbc", "rp", "pen", "no_contact", "alpha", "loss_threshold"}, "weights.");
      take(*it, "bc", c.weights.bc);
      take(*it, "mvbc", c.weights.mvbc);
      take(*it, "rp", c.weights.rp);
      take(*it, "pen", c.weights.pen);
      take(*it, "no_contact", c.weights.no_contact);
      take(*it, "alpha", c.weights.alpha);
      take(*it, "loss_threshold", c.weights.loss_threshold);
    }
    if (const auto it = j.find("optimizer"); it != j.end()) {
      reject_unknown(*it,
                     {"lr_articulation", "lr_translation", "lr_rotation", "lr_scale", "epochs_stage1",
                      "epochs_stage2", "adaptive_moments", "beta1", "beta2", "epsilon", "enforce_limits"},
                     "optimizer.");
      auto& o = c.optimizer;
      take(*it, "lr_articulation", o.lr_articulation);
      take(*it, "lr_translation", o.lr_translation);
      take(*it, "lr_rotation", o.lr_rotation);
      take(*it, "lr_scale", o.lr_scale);
      take(*it, "epochs_stage1", o.epochs_stage1);
      take(*it, "epochs_stage2", o.epochs_stage2);
      take(*it, "adaptive_moments", o.adaptive_moments);
      take(*it, "beta1", o.beta1);
      take(*it, "beta2", o.beta2);
      take(*it, "epsilon", o.epsilon);
      take(*it, "enforce_limits", o.enforce_limits);
    }
  } catch (const json::exception& e) {
    throw ContractViolation(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_to_json(const PipelineConfig& c) {
  ordered j;
  j["prompt"] = c.prompt;
  j["anchor"] = to_vector(c.anchor);
  j["elevations_deg"] = c.elevations_deg;
  j["per_level"] = c.per_level;
  j["distance_factor"] = c.distance_factor;
  j["vertical_fov_deg"] = c.vertical_fov_deg;
  j["image_size"] = c.image_size;
  j["dilation_fraction"] = c.dilation_fraction;
  j["similarity_threshold"] = c.correspondence.similarity_threshold;
  j["sigma_filter"] = c.correspondence.sigma_filter;
  j["weights"] = {{"bc", c.weights.bc},
                  {"mvbc", c.weights.mvbc},
                  {"rp", c.weights.rp},
                  {"pen", c.weights.pen},
                  {"no_contact", c.weights.no_contact},
                  {"alpha", c.weights.alpha},
                  {"loss_threshold", c.weights.loss_threshold}};
  const auto& o = c.optimizer;
  j["optimizer"] = {{"lr_articulation", o.lr_articulation},
                    {"lr_translation", o.lr_translation},
                    {"lr_rotation", o.lr_rotation},
                    {"lr_scale", o.lr_scale},
                    {"epochs_stage1", o.epochs_stage1},
                    {"epochs_stage2", o.epochs_stage2},
                    {"adaptive_moments", o.adaptive_moments},
                    {"beta1", o.beta1},
                    {"beta2", o.beta2},
                    {"epsilon", o.epsilon},
                    {"enforce_limits", o.enforce_limits}};
  j["mv_rounds"] = c.mv_rounds;
  j["gamma_schedule"] = c.gamma_schedule;
  j["mv_views"] = c.mv_views;
  j["refresh_interval"] = c.refresh_interval;
  j["n_candidates"] = c.n_candidates;
  j["max_retries"] = c.max_retries;
  j["seed"] = c.seed;
  return j.dump(2) + "\n";
}

PipelineConfig load_config(const std::filesystem::path& path) { return config_from_json(read_text(path)); }

std::string rig_package_to_json(const RigPackage& pkg, const RigReport& report) {
  const auto& rig = pkg.rig;
  ordered j;
  j["schema"] = "a3syn-rig-v1";
  j["source"] = {{"name", pkg.source_name}, {"sha256", pkg.source_sha256}};
  j["bones"] = ordered::array();
  for (std::size_t b = 0; b < rig.num_bones(); ++b) {
    const auto& bone = rig.skeleton.bone(b);
    ordered e;
    e["name"] = bone.name;
    e["parent"] = bone.parent ? ordered(*bone.parent) : ordered();
    e["rest_local"] = to_vector(bone.rest_local);
    e["inverse_bind"] = to_vector(bone.inverse_bind);
    if (pkg.limits) {
      const auto r = static_cast<Eigen::Index>(b);
      e["limits"] = {{"min", bound_to_json(pkg.limits->lower.row(r))}, {"max", bound_to_json(pkg.limits->upper.row(r))}};
    }
    j["bones"].push_back(e);
  }
  j["original_joint_indices"] = pkg.original_joint_indices;
  std::vector<double> verts;
  for (const auto& v : rig.vertices) verts.insert(verts.end(), {v.x(), v.y(), v.z()});
  j["vertices"] = verts;
  std::vector<std::uint32_t> faces;
  for (const auto& f : rig.faces) faces.insert(faces.end(), f.begin(), f.end());
  j["faces"] = faces;
  ordered weights = ordered::array();
  for (Eigen::Index v = 0; v < rig.weights.rows(); ++v) {
    ordered row = ordered::array();
    for (Eigen::Index b = 0; b < rig.weights.cols(); ++b) {
      if (rig.weights(v, b) != 0.0) row.push_back({b, rig.weights(v, b)});
    }
    weights.push_back(row);
  }
  j["weights"] = weights;
  ordered checks = ordered::array();
  for (const auto& c : report.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j["verification"] = {{"passed", report.passed()}, {"checks", checks}};
  return j.dump() + "\n";
}

RigPackage rig_package_from_json(std::string_view text) {
  const auto j = parse_json(text, "rig package");
  if (j.value("schema", "") != "a3syn-rig-v1") throw Error("rig package: unsupported schema");
  RigPackage pkg;
  try {
    pkg.source_name = j.at("source").at("name").get<std::string>();
    pkg.source_sha256 = j.at("source").at("sha256").get<std::string>();
    const auto& bones = j.at("bones");
    const auto nb = static_cast<Eigen::Index>(bones.size());
    std::vector<Bone> list;
    bool has_limits = false;
    Articulation lower = Articulation::Constant(nb, 3, -std::numeric_limits<double>::infinity());
    Articulation upper = Articulation::Constant(nb, 3, std::numeric_limits<double>::infinity());
    for (std::size_t b = 0; b < bones.size(); ++b) {
      const auto& e = bones[b];
      Bone bone;
      bone.name = e.at("name").get<std::string>();
      if (!e.at("parent").is_null()) bone.parent = e["parent"].get<std::size_t>();
      bone.rest_local = mat4_from(e.at("rest_local"));
      bone.inverse_bind = mat4_from(e.at("inverse_bind"));
      if (e.contains("limits")) {
        has_limits = true;
        lower.row(static_cast<Eigen::Index>(b)) = bound_from_json(e["limits"].at("min"), -1.0).transpose();
        upper.row(static_cast<Eigen::Index>(b)) = bound_from_json(e["limits"].at("max"), 1.0).transpose();
      }
      list.push_back(std::move(bone));
    }
    pkg.rig.skeleton = Skeleton(std::move(list));
    if (has_limits) pkg.limits = BoneLimits{lower, upper};
    take(j, "original_joint_indices", pkg.original_joint_indices);
    const auto verts = j.at("vertices").get<std::vector<double>>();
    if (verts.size() % 3 != 0) throw Error("rig package: vertex array length");
    for (std::size_t i = 0; i < verts.size(); i += 3) pkg.rig.vertices.emplace_back(verts[i], verts[i + 1], verts[i + 2]);
    const auto faces = j.at("faces").get<std::vector<std::uint32_t>>();
    if (faces.size() % 3 != 0) throw Error("rig package: face array length");
    for (std::size_t i = 0; i < faces.size(); i += 3) pkg.rig.faces.push_back({faces[i], faces[i + 1], faces[i + 2]});
    const auto& weights = j.at("weights");
    if (weights.size() != pkg.rig.vertices.size()) throw Error("rig package: weight row count");
    pkg.rig.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pkg.rig.vertices.size()), nb);
    for (std::size_t v = 0; v < weights.size(); ++v) {
      for (const auto& entry : weights[v]) {
        const auto b = entry.at(0).get<Eigen::Index>();
        if (b < 0 || b >= nb) throw Error("rig package: weight bone index out of range");
        pkg.rig.weights(static_cast<Eigen::Index>(v), b) = entry.at(1).get<double>();
      }
    }
  } catch (const json::exception& e) {
    throw Error(std::string("rig package: ") + e.what());
  }
  pkg.rig.validate();
  return pkg;
}

RigPackage load_rig_any(const std::filesystem::path& path, const RigLoadOptions& options) {
  if (lower_ext(path) == ".json") return rig_package_from_json(read_text(path));
  return load_rig(path, options);
}

}  // namespace a3syn
