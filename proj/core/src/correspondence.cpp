#include "a3syn/correspondence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace a3syn {

FeatureMatcher::FeatureMatcher(const FeatureMap& target)
    : height_(target.height), width_(target.width), dim_(target.dim) {
  if (dim_ < 1) throw ContractViolation("feature dim must be >= 1");
  const std::size_t n = static_cast<std::size_t>(height_) * width_;
  planes_.assign(static_cast<std::size_t>(dim_) * n, 0.0f);
  valid_.assign(n, 0);
  bool any = false;
  for (std::size_t p = 0; p < n; ++p) {
    const float* f = target.data.data() + p * dim_;
    double norm2 = 0.0;
    for (int c = 0; c < dim_; ++c) norm2 += static_cast<double>(f[c]) * f[c];
    if (norm2 <= 0.0) continue;
    const double inv = 1.0 / std::sqrt(norm2);
    for (int c = 0; c < dim_; ++c) planes_[static_cast<std::size_t>(c) * n + p] = static_cast<float>(f[c] * inv);
    valid_[p] = 1;
    any = true;
  }
  if (!any) throw DegenerateFeature();
}

SemanticMatch FeatureMatcher::match(std::span<const float> query) const {
  if (static_cast<int>(query.size()) != dim_) throw ContractViolation("query feature dim mismatch");
  double norm2 = 0.0;
  for (float q : query) norm2 += static_cast<double>(q) * q;
  if (!(norm2 > 0.0)) throw DegenerateFeature();
  const double inv = 1.0 / std::sqrt(norm2);

  const std::size_t n = static_cast<std::size_t>(height_) * width_;
  std::vector<float> sims(n, 0.0f);
  for (int c = 0; c < dim_; ++c) {
    const float qc = static_cast<float>(query[c] * inv);
    if (qc == 0.0f) continue;
    const float* plane = planes_.data() + static_cast<std::size_t>(c) * n;
    for (std::size_t p = 0; p < n; ++p) sims[p] += qc * plane[p];
  }

  std::size_t best = n;
  float best_sim = -std::numeric_limits<float>::infinity();
  for (std::size_t p = 0; p < n; ++p) {
    if (valid_[p] && sims[p] > best_sim) {
      best_sim = sims[p];
      best = p;
    }
  }
  SemanticMatch m;
  m.row = static_cast<int>(best / width_);
  m.col = static_cast<int>(best % width_);
  m.similarity = best_sim;
  return m;
}

SemanticMatch match_semantic(std::span<const float> query, const FeatureMap& target) {
  if (static_cast<int>(query.size()) != target.dim) throw ContractViolation("query feature dim mismatch");
  return FeatureMatcher(target).match(query);
}

FeatureMap upsample_features(const FeatureMap& map, int out_h, int out_w) {
  if (out_h < map.height || out_w < map.width) throw ContractViolation("upsample target must not be smaller");
  if (out_h == map.height && out_w == map.width) return map;
  FeatureMap out(out_h, out_w, map.dim);
  const double sy = out_h > 1 ? static_cast<double>(map.height - 1) / (out_h - 1) : 0.0;
  const double sx = out_w > 1 ? static_cast<double>(map.width - 1) / (out_w - 1) : 0.0;
  for (int y = 0; y < out_h; ++y) {
    const double fy = y * sy;
    const int y0 = std::min(static_cast<int>(fy), std::max(map.height - 2, 0));
    const int y1 = std::min(y0 + 1, map.height - 1);
    const double ty = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = x * sx;
      const int x0 = std::min(static_cast<int>(fx), std::max(map.width - 2, 0));
      const int x1 = std::min(x0 + 1, map.width - 1);
      const double tx = fx - x0;
      float* dst = out.at(y, x);
      const float* a = map.at(y0, x0);
      const float* b = map.at(y0, x1);
      const float* c = map.at(y1, x0);
      const float* d = map.at(y1, x1);
      for (int k = 0; k < map.dim; ++k) {
        dst[k] = static_cast<float>((1 - ty) * ((1 - tx) * a[k] + tx * b[k]) + ty * ((1 - tx) * c[k] + tx * d[k]));
      }
    }
  }
  return out;
}

namespace {

struct PendingMatch {
  std::size_t vertex;
  Vec2 source;
  Vec2 target;
};

}  // namespace

CorrespondenceSet bone_correspondences(const RasterOutput& raster, const FeatureMap& rendered_features,
                                       const FeatureMap& target_features,
                                       std::span<const std::size_t> attribution, std::size_t num_bones,
                                       const CorrespondenceOptions& options) {
  const int h = raster.color.height;
  const int w = raster.color.width;
  if (target_features.height == h && target_features.width == w) {
    return bone_correspondences(raster, rendered_features, FeatureMatcher(target_features), attribution, num_bones,
                                options);
  }
  return bone_correspondences(raster, rendered_features, FeatureMatcher(upsample_features(target_features, h, w)),
                              attribution, num_bones, options);
}

CorrespondenceSet bone_correspondences(const RasterOutput& raster, const FeatureMap& rendered_features,
                                       const FeatureMatcher& target, std::span<const std::size_t> attribution,
                                       std::size_t num_bones, const CorrespondenceOptions& options) {
  const int h = raster.color.height;
  const int w = raster.color.width;
  if (target.height() != h || target.width() != w) throw ContractViolation("target features not aligned to the image");
  const FeatureMap* rendered = &rendered_features;
  FeatureMap upsampled;
  if (rendered_features.height != h || rendered_features.width != w) {
    upsampled = upsample_features(rendered_features, h, w);
    rendered = &upsampled;
  }

  std::vector<std::vector<PendingMatch>> per_bone(num_bones);
  std::unordered_map<std::size_t, SemanticMatch> matched;
  for (const auto& vv : raster.visible_vertices) {
    if (vv.index >= attribution.size()) throw ContractViolation("visible vertex outside the attribution table");
    const int col = std::clamp(static_cast<int>(std::lround(vv.pixel.x())), 0, w - 1);
    const int row = std::clamp(static_cast<int>(std::lround(vv.pixel.y())), 0, h - 1);
    const auto key = static_cast<std::size_t>(row) * w + col;
    auto cached = matched.find(key);
    if (cached == matched.end()) cached = matched.emplace(key, target.match(rendered->pixel(row, col))).first;
    const auto& m = cached->second;
    if (m.similarity < options.similarity_threshold) continue;
    const auto bone = attribution[vv.index];
    if (bone >= num_bones) throw ContractViolation("attribution references an unknown bone");
    // Matching is per pixel; carry the vertex's sub-pixel offset over to the target.
    const Vec2 offset = vv.pixel - Vec2(col, row);
    per_bone[bone].push_back({vv.index, vv.pixel, m.pixel() + offset});
  }

  CorrespondenceSet set;
  set.bones.resize(num_bones);
  for (std::size_t b = 0; b < num_bones; ++b) {
    auto& matches = per_bone[b];
    auto& rec = set.bones[b];
    rec.bone = b;
    if (options.sigma_filter && matches.size() > 1) {
      Vec2 mean = Vec2::Zero();
      for (const auto& m : matches) mean += m.target;
      mean /= static_cast<double>(matches.size());
      double var = 0.0;
      for (const auto& m : matches) var += (m.target - mean).squaredNorm();
      const double sigma = std::sqrt(var / static_cast<double>(matches.size()));
      const double cutoff = sigma * (1.0 + 1e-12) + 1e-12;
      std::erase_if(matches, [&](const PendingMatch& m) { return (m.target - mean).norm() > cutoff; });
    }
    if (matches.empty()) continue;
    Vec2 src = Vec2::Zero(), tgt = Vec2::Zero();
    for (const auto& m : matches) {
      src += m.source;
      tgt += m.target;
      rec.vertices.push_back(m.vertex);
    }
    rec.vertex_count = matches.size();
    rec.source = src / static_cast<double>(matches.size());
    rec.target = tgt / static_cast<double>(matches.size());
    rec.valid = true;
    ++set.n_visible;
  }
  return set;
}

double mean_centroid_error(const CorrespondenceSet& set) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& b : set.bones) {
    if (!b.valid) continue;
    sum += (b.source - b.target).norm();
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace a3syn
