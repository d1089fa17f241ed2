#include "a3syn/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace a3syn {
namespace {

void require_finite(double v, const char* term) {
  if (!std::isfinite(v)) throw NumericError(term, std::string("non-finite value in loss term '") + term + "'");
}

// One view's correspondence loss and, optionally, its gradient scaled by `coeff`.
double view_term(const ViewTarget& view, std::span<const Vec3> posed, std::vector<Vec3>* d_posed, double coeff,
                 int* behind) {
  const Projector proj(view.camera);
  double loss = 0.0;
  int n_vis = 0;
  struct Centroid {
    Vec2 diff;
    std::size_t count;
  };
  std::vector<Centroid> centroids;
  centroids.reserve(view.bones.size());
  for (const auto& bt : view.bones) {
    Vec2 sum = Vec2::Zero();
    std::size_t count = 0;
    for (auto v : bt.vertices) {
      if (proj.depth(posed[v]) <= 1e-9) {
        if (behind) ++*behind;
        continue;
      }
      sum += proj.project(posed[v]);
      ++count;
    }
    if (count == 0) {
      centroids.push_back({Vec2::Zero(), 0});
      continue;
    }
    const Vec2 diff = sum / static_cast<double>(count) - bt.target;
    centroids.push_back({diff, count});
    loss += diff.squaredNorm();
    ++n_vis;
  }
  if (n_vis == 0) return 0.0;
  loss /= n_vis;

  if (d_posed) {
    for (std::size_t i = 0; i < view.bones.size(); ++i) {
      const auto& c = centroids[i];
      if (c.count == 0) continue;
      const Vec2 d_pixel = coeff * 2.0 * c.diff / (static_cast<double>(n_vis) * static_cast<double>(c.count));
      for (auto v : view.bones[i].vertices) {
        if (proj.depth(posed[v]) <= 1e-9) continue;
        (*d_posed)[v] += proj.jacobian(posed[v]).transpose() * d_pixel;
      }
    }
  }
  return loss;
}

}  // namespace

void LossWeights::validate() const {
  if (!(alpha > 0.0)) throw ContractViolation("rotation penalty base must be positive");
  if (!(loss_threshold > 0.0)) throw ContractViolation("multi-view loss threshold must be positive");
  for (double w : {bc, mvbc, rp, pen, no_contact}) {
    if (w < 0.0) throw ContractViolation("loss weights must be non-negative");
  }
}

double loss_bc(const CorrespondenceSet& set) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& b : set.bones) {
    if (!b.valid) continue;
    sum += (b.source - b.target).squaredNorm();
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double loss_rp(const Articulation& articulation, const HierarchyLevels& levels, double alpha) {
  if (!(alpha > 0.0)) throw ContractViolation("rotation penalty base must be positive");
  const auto nb = articulation.rows();
  if (nb == 0) return 0.0;
  if (static_cast<Eigen::Index>(levels.levels.size()) != nb) throw ContractViolation("levels do not match articulation");
  double sum = 0.0;
  for (Eigen::Index b = 0; b < nb; ++b) {
    sum += std::pow(alpha, levels.levels[static_cast<std::size_t>(b)]) * articulation.row(b).squaredNorm();
  }
  return sum / static_cast<double>(nb);
}

SdfLoss loss_sdf_from_values(std::span<const double> distances) {
  if (distances.empty()) throw ContractViolation("loss_sdf needs at least one vertex");
  SdfLoss out;
  double min_d = std::numeric_limits<double>::infinity();
  double pen = 0.0;
  for (double d : distances) {
    min_d = std::min(min_d, d);
    if (d < 0.0) pen += -d;
  }
  if (min_d > 0.0) {
    out.no_contact = min_d;
  } else {
    out.pen = pen;
  }
  return out;
}

SdfLoss loss_sdf(std::span<const Vec3> posed_vertices, const SdfGrid& grid) {
  std::vector<double> d;
  d.reserve(posed_vertices.size());
  for (const auto& v : posed_vertices) {
    const double x = grid.query(v);
    d.push_back(std::abs(x) <= grid.surface_tolerance() ? 0.0 : x);
  }
  return loss_sdf_from_values(d);
}

MultiViewLoss loss_mvbc(std::span<const double> per_view, double threshold) {
  if (per_view.empty()) throw ContractViolation("loss_mvbc needs at least one view");
  MultiViewLoss out;
  double sum = 0.0;
  for (double l : per_view) {
    if (l < threshold) {
      sum += l;
      ++out.n_valid;
    }
  }
  if (out.n_valid > 0) out.value = sum / out.n_valid;
  return out;
}

LossBreakdown stage_total(Stage stage, double correspondence, double rp, const SdfLoss& sdf, const LossWeights& weights) {
  LossBreakdown b;
  b.bc = correspondence;
  b.rp = rp;
  b.sdf_pen = sdf.pen;
  b.sdf_no_contact = sdf.no_contact;
  const double w_corr = stage == Stage::kSingleView ? weights.bc : weights.mvbc;
  b.total = w_corr * correspondence + weights.rp * rp + weights.pen * sdf.pen + weights.no_contact * sdf.no_contact;
  return b;
}

ViewTarget make_view_target(const Camera& camera, const CorrespondenceSet& set) {
  ViewTarget view;
  view.camera = camera;
  for (const auto& b : set.bones) {
    if (!b.valid) continue;
    view.bones.push_back({b.bone, b.vertices, b.target});
  }
  return view;
}

double view_loss(const ViewTarget& view, std::span<const Vec3> posed_vertices) {
  return view_term(view, posed_vertices, nullptr, 0.0, nullptr);
}

Evaluation evaluate_objective(const ObjectiveContext& ctx, const PoseState& pose, bool with_gradient) {
  if (!ctx.rig) throw ContractViolation("objective context has no rig");
  ctx.weights.validate();
  const SkinnedRig& rig = *ctx.rig;
  const auto fwd = skin_forward(rig, pose);
  const auto nv = rig.num_vertices();

  std::vector<Vec3> d_posed;
  if (with_gradient) d_posed.assign(nv, Vec3::Zero());
  std::vector<Vec3>* d_ptr = with_gradient ? &d_posed : nullptr;

  LossBreakdown loss;
  double correspondence = 0.0;
  if (ctx.stage == Stage::kSingleView) {
    if (ctx.views.size() > 1) throw ContractViolation("single-view stage takes at most one view");
    if (!ctx.views.empty()) {
      correspondence = view_term(ctx.views[0], fwd.posed, d_ptr, ctx.weights.bc, &loss.n_behind_camera);
      loss.per_view_bc = {correspondence};
      loss.n_valid_views = 1;
    }
  } else if (!ctx.views.empty()) {
    for (const auto& view : ctx.views) {
      loss.per_view_bc.push_back(view_term(view, fwd.posed, nullptr, 0.0, &loss.n_behind_camera));
    }
    const auto mv = loss_mvbc(loss.per_view_bc, ctx.weights.loss_threshold);
    correspondence = mv.value;
    loss.n_valid_views = mv.n_valid;
    if (with_gradient && mv.n_valid > 0) {
      const double coeff = ctx.weights.mvbc / mv.n_valid;
      for (std::size_t m = 0; m < ctx.views.size(); ++m) {
        if (loss.per_view_bc[m] < ctx.weights.loss_threshold) view_term(ctx.views[m], fwd.posed, d_ptr, coeff, nullptr);
      }
    }
  }
  require_finite(correspondence, "bc");

  const double rp = loss_rp(pose.articulation, ctx.levels, ctx.weights.alpha);
  require_finite(rp, "rp");

  SdfLoss sdf;
  if (ctx.sdf) {
    std::vector<double> dist(nv);
    std::vector<Vec3> grad(nv);
    const double touching = ctx.sdf->surface_tolerance();
    for (std::size_t v = 0; v < nv; ++v) {
      dist[v] = ctx.sdf->query(fwd.posed[v], grad[v]);
      if (std::abs(dist[v]) <= touching) dist[v] = 0.0;
    }
    sdf = loss_sdf_from_values(dist);
    require_finite(sdf.pen + sdf.no_contact, "sdf");
    if (with_gradient) {
      if (sdf.pen == 0.0 && sdf.no_contact > 0.0) {
        const auto arg = static_cast<std::size_t>(std::min_element(dist.begin(), dist.end()) - dist.begin());
        d_posed[arg] += ctx.weights.no_contact * grad[arg];
      } else {
        for (std::size_t v = 0; v < nv; ++v) {
          if (dist[v] < 0.0) d_posed[v] -= ctx.weights.pen * grad[v];
        }
      }
    }
  }

  const auto per_view = std::move(loss.per_view_bc);
  const int n_valid = loss.n_valid_views;
  const int behind = loss.n_behind_camera;
  loss = stage_total(ctx.stage, correspondence, rp, sdf, ctx.weights);
  loss.per_view_bc = per_view;
  loss.n_valid_views = n_valid;
  loss.n_behind_camera = behind;
  require_finite(loss.total, "total");

  Evaluation out;
  out.loss = std::move(loss);
  if (!with_gradient) {
    out.gradient = PoseGradient::zero(rig.num_bones());
    return out;
  }
  out.gradient = skin_backward(rig, pose, fwd, d_posed);
  const double rp_coeff = ctx.weights.rp * 2.0 / static_cast<double>(std::max<std::size_t>(rig.num_bones(), 1));
  for (Eigen::Index b = 0; b < pose.articulation.rows(); ++b) {
    out.gradient.articulation.row(b) +=
        rp_coeff * std::pow(ctx.weights.alpha, ctx.levels.levels[static_cast<std::size_t>(b)]) * pose.articulation.row(b);
  }
  if (!out.gradient.all_finite()) throw NumericError("gradient", "non-finite value in pose gradient");
  return out;
}

}  // namespace a3syn
