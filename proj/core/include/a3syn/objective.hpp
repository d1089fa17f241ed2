#pragma once

#include <span>
#include <vector>

#include "a3syn/camera.hpp"
#include "a3syn/common.hpp"
#include "a3syn/correspondence.hpp"
#include "a3syn/rig.hpp"
#include "a3syn/sdf.hpp"

namespace a3syn {

struct LossWeights {
  double bc = 1.0;
  double mvbc = 1.0;
  double rp = 100.0;
  double pen = 1000.0;
  double no_contact = 1000.0;
  /// Base of the per-level rotation penalty.
  double alpha = 1.2;
  /// Per-view losses at or above this value are ignored in the multi-view term.
  double loss_threshold = 1000.0;

  void validate() const;
};

enum class Stage { kSingleView = 1, kMultiView = 2 };

struct LossBreakdown {
  /// Single-view correspondence loss in stage 1, the filtered multi-view mean in stage 2 (px^2).
  double bc = 0.0;
  double rp = 0.0;
  double sdf_pen = 0.0;
  double sdf_no_contact = 0.0;
  double total = 0.0;
  std::vector<double> per_view_bc;
  int n_valid_views = 0;
  /// Correspondence vertices skipped because they sit behind their camera.
  int n_behind_camera = 0;
};

struct SdfLoss {
  double pen = 0.0;
  double no_contact = 0.0;
};

struct MultiViewLoss {
  double value = 0.0;
  int n_valid = 0;
};

/// Mean squared centroid displacement over valid bones; 0 when no bone is valid.
double loss_bc(const CorrespondenceSet& set);

/// (1/|B|) sum_b alpha^level_b |A_b|^2.
double loss_rp(const Articulation& articulation, const HierarchyLevels& levels, double alpha);

/// Contact term (min distance) when every vertex is outside, otherwise the summed
/// penetration depth. Exactly one of the two is non-zero.
SdfLoss loss_sdf_from_values(std::span<const double> distances);
/// Grid distances within surface_tolerance() of zero are taken as exact contact.
SdfLoss loss_sdf(std::span<const Vec3> posed_vertices, const SdfGrid& grid);

/// Mean of the per-view losses strictly below `threshold`. n_valid == 0 marks a void round.
MultiViewLoss loss_mvbc(std::span<const double> per_view, double threshold);

/// Weighted total: stage 1 uses weights.bc on `correspondence`, stage 2 weights.mvbc.
LossBreakdown stage_total(Stage stage, double correspondence, double rp, const SdfLoss& sdf, const LossWeights& weights);

/// Correspondence frozen for one optimizer step: bone vertex sets and target centroids.
struct BoneTarget {
  std::size_t bone = 0;
  std::vector<std::size_t> vertices;
  Vec2 target = Vec2::Zero();
};

struct ViewTarget {
  Camera camera;
  std::vector<BoneTarget> bones;
};

ViewTarget make_view_target(const Camera& camera, const CorrespondenceSet& set);

struct ObjectiveContext {
  const SkinnedRig* rig = nullptr;
  HierarchyLevels levels;
  std::vector<ViewTarget> views;
  const SdfGrid* sdf = nullptr;
  LossWeights weights;
  Stage stage = Stage::kSingleView;
};

struct Evaluation {
  LossBreakdown loss;
  PoseGradient gradient;
};

/// Loss of `pose` with correspondence targets and visibility held fixed, and its exact
/// gradient with respect to every pose field. Throws NumericError naming the term
/// that went non-finite.
Evaluation evaluate_objective(const ObjectiveContext& context, const PoseState& pose, bool with_gradient = true);

/// Per-view single-view loss of `view` at the given posed vertices (used for diagnostics).
double view_loss(const ViewTarget& view, std::span<const Vec3> posed_vertices);

}  // namespace a3syn
