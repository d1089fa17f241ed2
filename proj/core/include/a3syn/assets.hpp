#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "a3syn/gltf.hpp"
#include "a3syn/pipeline.hpp"
#include "a3syn/rig.hpp"

namespace a3syn {

struct SceneLoadOptions {
  /// Merge vertices with bit-identical positions.
  bool dedup = false;
};

/// Triangle soup from .obj (polygons fan-triangulated) or .gltf/.glb (all mesh
/// nodes, world transforms applied, triangle primitives only).
TriangleMesh load_scene(const std::filesystem::path& path, const SceneLoadOptions& options = {});
TriangleMesh parse_obj(std::string_view text, const SceneLoadOptions& options = {});
void write_obj(const std::filesystem::path& path, std::span<const Vec3> vertices, std::span<const Face> faces);

/// Pose export. Bones appear in skeleton order.
struct PoseDocument {
  PoseState pose;
  std::vector<std::string> bone_names;
  std::vector<std::uint32_t> original_joint_indices;
};

/// {"schema": "a3syn-pose-v1", "bones": [{name, axis_angle}], "global": {translation,
/// rotation, scale}, "original_joint_indices": [...]}; reals round-trip exactly.
std::string pose_to_json(const PoseDocument& doc);
PoseDocument pose_from_json(std::string_view text);
void write_pose(const std::filesystem::path& path, const PoseDocument& doc);
PoseDocument read_pose(const std::filesystem::path& path);

/// Pipeline settings; keys mirror PipelineConfig field names, with `weights` and
/// `optimizer` as nested objects. Unknown keys are rejected; the result is validated.
PipelineConfig config_from_json(std::string_view text);
std::string config_to_json(const PipelineConfig& config);
PipelineConfig load_config(const std::filesystem::path& path);

/// Self-contained JSON rig package written by `ingest`.
std::string rig_package_to_json(const RigPackage& package, const RigReport& report);
RigPackage rig_package_from_json(std::string_view text);

/// Rig package (.json) or glTF (.gltf/.glb) depending on the file contents.
RigPackage load_rig_any(const std::filesystem::path& path, const RigLoadOptions& options = {});

}  // namespace a3syn
