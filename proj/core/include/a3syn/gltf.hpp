#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "a3syn/rig.hpp"

namespace a3syn {

/// A rig ready for placement plus what is needed to trace it back to its source.
struct RigPackage {
  SkinnedRig rig;
  std::optional<BoneLimits> limits;
  /// Position of each bone in the source skin's joint list.
  std::vector<std::uint32_t> original_joint_indices;
  std::string source_name;
  std::string source_sha256;
};

struct RigLoadOptions {
  /// Required when the file has more than one skin.
  std::optional<std::size_t> skin;
  /// Rows whose weights sum within this of 1 are renormalized; others are rejected.
  double weight_tolerance = 1e-2;
};

/// Reads one skin from a glTF 2.0 file (.gltf or .glb). Joints are reindexed so
/// parents precede children; per-axis articulation bounds are read from the joint
/// nodes' extras as {"a3syn_limits": {"min": [x, y, z], "max": [x, y, z]}} (radians).
/// Throws Error with "no rig found", "invalid hierarchy" or "non-normalized weights".
RigPackage load_rig(const std::filesystem::path& path, const RigLoadOptions& options = {});

struct RigCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RigReport {
  std::vector<RigCheck> checks;

  bool passed() const;
  const RigCheck* find(const std::string& name) const;
};

/// Checks "hierarchy", "weights", "inverse_bind" and "rest_pose"; never throws for
/// a failed check.
RigReport verify_rig(const RigPackage& package, double bind_tolerance = 1e-4, double rest_tolerance = 1e-4);

}  // namespace a3syn
