#pragma once

#include <span>
#include <vector>

#include "a3syn/common.hpp"
#include "a3syn/raster.hpp"

namespace a3syn {

/// H x W x d feature grid, channel-fastest.
struct FeatureMap {
  int height = 0;
  int width = 0;
  int dim = 0;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(int h, int w, int d, float fill = 0.0f)
      : height(h), width(w), dim(d), data(static_cast<std::size_t>(h) * w * d, fill) {}

  float* at(int row, int col) { return data.data() + (static_cast<std::size_t>(row) * width + col) * dim; }
  const float* at(int row, int col) const { return data.data() + (static_cast<std::size_t>(row) * width + col) * dim; }
  std::span<const float> pixel(int row, int col) const { return {at(row, col), static_cast<std::size_t>(dim)}; }
};

/// Zero-norm query or an all-zero target map.
class DegenerateFeature : public Error {
 public:
  DegenerateFeature() : Error("degenerate feature") {}
};

struct SemanticMatch {
  int row = 0;
  int col = 0;
  double similarity = 0.0;

  Vec2 pixel() const { return {static_cast<double>(col), static_cast<double>(row)}; }
};

/// Cosine-similarity argmax over a fixed target map. Normalizes the target once so
/// many queries can be matched against it; ties resolve in row-major scan order.
class FeatureMatcher {
 public:
  explicit FeatureMatcher(const FeatureMap& target);
  SemanticMatch match(std::span<const float> query) const;

  int height() const { return height_; }
  int width() const { return width_; }
  int dim() const { return dim_; }

 private:
  int height_;
  int width_;
  int dim_;
  std::vector<float> planes_;  // dim x (H*W), unit-normalized per pixel
  std::vector<std::uint8_t> valid_;
};

SemanticMatch match_semantic(std::span<const float> query, const FeatureMap& target);

/// Corner-aligned bilinear resampling, per channel.
FeatureMap upsample_features(const FeatureMap& map, int out_h, int out_w);

struct BoneCorrespondence {
  std::size_t bone = 0;
  Vec2 source = Vec2::Zero();
  Vec2 target = Vec2::Zero();
  std::size_t vertex_count = 0;
  bool valid = false;
  /// Vertices that survived filtering; they define `source`.
  std::vector<std::size_t> vertices;
};

struct CorrespondenceSet {
  std::vector<BoneCorrespondence> bones;
  std::size_t n_visible = 0;
};

struct CorrespondenceOptions {
  double similarity_threshold = 0.5;
  bool sigma_filter = true;
};

/// Per-bone centroid pairs: each visible vertex is matched from its nearest pixel into
/// the target features (keeping its sub-pixel offset), low-similarity matches are dropped, then one pass removes target points farther
/// than one standard deviation from their bone's mean target point.
CorrespondenceSet bone_correspondences(const RasterOutput& raster, const FeatureMap& rendered_features,
                                       const FeatureMap& target_features,
                                       std::span<const std::size_t> attribution, std::size_t num_bones,
                                       const CorrespondenceOptions& options = {});

/// Same, reusing a prepared matcher for the target features.
CorrespondenceSet bone_correspondences(const RasterOutput& raster, const FeatureMap& rendered_features,
                                       const FeatureMatcher& target, std::span<const std::size_t> attribution,
                                       std::size_t num_bones, const CorrespondenceOptions& options = {});

/// Mean |source - target| over valid bones, in pixels; 0 when none are valid.
double mean_centroid_error(const CorrespondenceSet& set);

}  // namespace a3syn
