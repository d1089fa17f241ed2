#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "a3syn/camera.hpp"
#include "a3syn/correspondence.hpp"
#include "a3syn/metrics.hpp"
#include "a3syn/objective.hpp"
#include "a3syn/optimizer.hpp"
#include "a3syn/provider.hpp"
#include "a3syn/rig.hpp"
#include "a3syn/sdf.hpp"

namespace a3syn {

struct PipelineConfig {
  std::string prompt;
  Vec3 anchor = Vec3::Zero();

  std::vector<double> elevations_deg{10.0, 25.0, 40.0, 55.0, 70.0};
  int per_level = 20;
  /// Ring radius as a multiple of the rig's bounding-sphere radius.
  double distance_factor = 2.5;
  double vertical_fov_deg = 45.0;
  int image_size = 512;
  /// Mask dilation radius as a fraction of the image side.
  double dilation_fraction = 0.12;

  CorrespondenceOptions correspondence;
  LossWeights weights;
  OptimizerConfig optimizer;

  int mv_rounds = 3;
  std::vector<double> gamma_schedule{0.8, 0.7, 0.6};
  int mv_views = 4;
  int refresh_interval = 20;
  int n_candidates = 4;
  int max_retries = 2;
  std::uint64_t seed = 0;

  /// Throws ContractViolation when a field is out of range or the schedule increases.
  void validate() const;
};

/// Linear ramp from 0.8 down to 0.6 over `rounds` entries.
std::vector<double> default_gamma_schedule(int rounds);

struct SceneContext {
  TriangleMesh mesh;
  SdfGrid sdf;
};

/// Rest pose dropped at `anchor`: zero articulation, identity rotation, unit scale.
PoseState initial_pose(const SkinnedRig& rig, const Vec3& anchor);

/// Indices of the ceil(n/2) best-scoring views, in their original order.
std::vector<std::size_t> keep_most_visible(std::span<const ViewScore> scores);

struct Stage1Result {
  PoseState pose;
  ConvergenceTrace trace;
  Camera camera;
  CorrespondenceSet initial_correspondence;
};

struct Stage2Round {
  int round = 0;
  double gamma = 1.0;
  std::vector<Camera> cameras;
  ConvergenceTrace trace;
  int n_valid_views = 0;
  bool skipped = false;
};

struct Stage2Result {
  PoseState pose;
  std::vector<Stage2Round> rounds;
};

struct PlacementResult {
  PoseState pose;
  PoseState stage1_pose;
  Stage1Result stage1;
  std::vector<Stage2Round> rounds;
  PlacementScore metrics;
  std::vector<std::filesystem::path> artifacts;
};

/// Single-view coarse placement. Throws Error("object not visible") when no ring
/// camera sees any vertex. When `artifact_dir` is non-empty the render, dilated mask
/// and selected inpainting are written under `<artifact_dir>/stage1/`.
Stage1Result stage1_place(const SkinnedRig& rig, const SceneContext& scene, AffordanceProvider& provider,
                          const PipelineConfig& config, const BoneLimits* limits = nullptr,
                          const std::filesystem::path& artifact_dir = {},
                          std::vector<std::filesystem::path>* written = nullptr);

/// Multi-view refinement rounds starting from `pose`.
Stage2Result stage2_refine(const PoseState& pose, const SkinnedRig& rig, const SceneContext& scene,
                           AffordanceProvider& provider, const PipelineConfig& config,
                           const BoneLimits* limits = nullptr, const std::filesystem::path& artifact_dir = {},
                           std::vector<std::filesystem::path>* written = nullptr, int first_iteration = 0);

/// Both stages, metrics, and (when `run_dir` is non-empty) pose.json, trace.jsonl and
/// report.json. Errors are rethrown with the failing stage prefixed.
PlacementResult run_full(const SkinnedRig& rig, const SceneContext& scene, AffordanceProvider& provider,
                         const PipelineConfig& config, const BoneLimits* limits = nullptr,
                         const std::filesystem::path& run_dir = {},
                         const std::vector<std::uint32_t>& original_joint_indices = {});

}  // namespace a3syn
