#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "a3syn/objective.hpp"
#include "a3syn/rig.hpp"

namespace a3syn {

struct OptimizerConfig {
  double lr_articulation = 1e-2;
  double lr_translation = 1e-2;
  double lr_rotation = 1e-2;
  /// Applied to log(scale), so scale stays positive.
  double lr_scale = 1e-5;
  int epochs_stage1 = 200;
  int epochs_stage2 = 100;
  /// Adam-style first/second moments; plain gradient descent when false.
  bool adaptive_moments = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Clamp articulation to ingested bone limits after every step.
  bool enforce_limits = false;

  void validate() const;
};

struct TraceRecord {
  int iteration = 0;
  LossBreakdown loss;
  /// |A_b| in degrees, per bone.
  std::vector<double> bone_degrees;
};

struct ConvergenceTrace {
  std::vector<TraceRecord> records;

  /// One JSON object per line: iteration, total, bc, rp, pen, no_contact, bone_degrees.
  void write_jsonl(std::ostream& out) const;
};

/// Supplies loss and gradient for the pose being optimized.
class GradientSource {
 public:
  virtual ~GradientSource() = default;
  virtual Evaluation evaluate(const PoseState& pose) = 0;
  /// Hook before the gradient of iteration `iteration` is taken; used to refresh
  /// correspondences held fixed between refreshes.
  virtual void before_iteration(int /*iteration*/, const PoseState& /*pose*/) {}
};

struct StageResult {
  PoseState pose;
  ConvergenceTrace trace;
};

/// Raised when a gradient turns non-finite; carries the trace up to that point.
class OptimizationAborted : public Error {
 public:
  OptimizationAborted(const std::string& what, ConvergenceTrace trace) : Error(what), trace_(std::move(trace)) {}
  const ConvergenceTrace& trace() const { return trace_; }

 private:
  ConvergenceTrace trace_;
};

/// Runs `epochs` first-order steps from `initial`. Iteration indices in the trace
/// start at `first_iteration`.
StageResult run_stage(const PoseState& initial, GradientSource& source, const OptimizerConfig& config, int epochs,
                      const BoneLimits* limits = nullptr, int first_iteration = 0);

/// Element-wise clamp of the articulation rows to `limits`; identity without limits.
PoseState clamp_constraints(const PoseState& state, const BoneLimits* limits);

std::vector<double> bone_rotation_degrees(const Articulation& articulation);

}  // namespace a3syn
