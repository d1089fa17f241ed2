#include "a3syn/optimizer.hpp"

#include <cmath>
#include <ostream>

#include <nlohmann/json.hpp>

#include "a3syn/camera.hpp"

namespace a3syn {
namespace {

// Flat layout shared by gradients and steps: articulation (3|B|), translation (3),
// rotation (3), log-scale (1).
Eigen::VectorXd pack_gradient(const PoseGradient& g, double scale) {
  const auto nb = g.articulation.rows();
  Eigen::VectorXd x(3 * nb + 7);
  for (Eigen::Index b = 0; b < nb; ++b) x.segment<3>(3 * b) = g.articulation.row(b).transpose();
  x.segment<3>(3 * nb) = g.translation;
  x.segment<3>(3 * nb + 3) = g.rotation;
  x[3 * nb + 6] = g.scale * scale;  // d/dlog(s) = s d/ds
  return x;
}

Eigen::VectorXd learning_rates(const OptimizerConfig& c, Eigen::Index nb) {
  Eigen::VectorXd lr(3 * nb + 7);
  lr.head(3 * nb).setConstant(c.lr_articulation);
  lr.segment<3>(3 * nb).setConstant(c.lr_translation);
  lr.segment<3>(3 * nb + 3).setConstant(c.lr_rotation);
  lr[3 * nb + 6] = c.lr_scale;
  return lr;
}

}  // namespace

void OptimizerConfig::validate() const {
  for (double lr : {lr_articulation, lr_translation, lr_rotation, lr_scale}) {
    if (!(lr > 0.0)) throw ContractViolation("learning rates must be positive");
  }
  if (epochs_stage1 < 1 || epochs_stage2 < 1) throw ContractViolation("epoch counts must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ContractViolation("moment decay outside [0, 1)");
  if (!(epsilon > 0.0)) throw ContractViolation("epsilon must be positive");
}

std::vector<double> bone_rotation_degrees(const Articulation& articulation) {
  std::vector<double> out(static_cast<std::size_t>(articulation.rows()));
  for (Eigen::Index b = 0; b < articulation.rows(); ++b) out[static_cast<std::size_t>(b)] = rad_to_deg(articulation.row(b).norm());
  return out;
}

void ConvergenceTrace::write_jsonl(std::ostream& out) const {
  for (const auto& r : records) {
    nlohmann::json j;
    j["iteration"] = r.iteration;
    j["total"] = r.loss.total;
    j["bc"] = r.loss.bc;
    j["rp"] = r.loss.rp;
    j["pen"] = r.loss.sdf_pen;
    j["no_contact"] = r.loss.sdf_no_contact;
    j["bone_degrees"] = r.bone_degrees;
    out << j.dump() << '\n';
  }
}

PoseState clamp_constraints(const PoseState& state, const BoneLimits* limits) {
  if (!limits) return state;
  if (limits->lower.rows() != state.articulation.rows() || limits->upper.rows() != state.articulation.rows()) {
    throw ContractViolation("bone limits are not aligned with the skeleton");
  }
  PoseState out = state;
  out.articulation = state.articulation.cwiseMax(limits->lower).cwiseMin(limits->upper);
  return out;
}

StageResult run_stage(const PoseState& initial, GradientSource& source, const OptimizerConfig& config, int epochs,
                      const BoneLimits* limits, int first_iteration) {
  config.validate();
  if (epochs < 0) throw ContractViolation("epochs must be non-negative");
  if (!(initial.scale > 0.0)) throw ContractViolation("pose scale must be positive");

  const Eigen::Index nb = initial.articulation.rows();
  StageResult result;
  result.pose = initial;
  const Eigen::VectorXd lr = learning_rates(config, nb);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(lr.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(lr.size());

  for (int step = 0; step < epochs; ++step) {
    const int iteration = first_iteration + step;
    source.before_iteration(iteration, result.pose);
    Evaluation eval;
    try {
      eval = source.evaluate(result.pose);
    } catch (const NumericError& e) {
      throw OptimizationAborted(std::string("optimization aborted at iteration ") + std::to_string(iteration) + ": " +
                                    e.what(),
                                result.trace);
    }
    result.trace.records.push_back({iteration, eval.loss, bone_rotation_degrees(result.pose.articulation)});
    if (!eval.gradient.all_finite()) {
      throw OptimizationAborted("non-finite gradient at iteration " + std::to_string(iteration), result.trace);
    }

    const Eigen::VectorXd g = pack_gradient(eval.gradient, result.pose.scale);
    Eigen::VectorXd delta;
    if (config.adaptive_moments) {
      m = config.beta1 * m + (1.0 - config.beta1) * g;
      v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(config.beta1, step + 1);
      const double c2 = 1.0 - std::pow(config.beta2, step + 1);
      const Eigen::ArrayXd denom = (v.array() / c2).sqrt() + config.epsilon;
      delta = (lr.array() * (m.array() / c1) / denom).matrix();
    } else {
      delta = lr.cwiseProduct(g);
    }

    PoseState& pose = result.pose;
    for (Eigen::Index b = 0; b < nb; ++b) pose.articulation.row(b) -= delta.segment<3>(3 * b).transpose();
    pose.translation -= delta.segment<3>(3 * nb);
    pose.rotation -= delta.segment<3>(3 * nb + 3);
    pose.scale *= std::exp(-delta[3 * nb + 6]);
    if (config.enforce_limits && limits) pose = clamp_constraints(pose, limits);
  }
  return result;
}

}  // namespace a3syn
