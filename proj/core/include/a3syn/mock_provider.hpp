#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "a3syn/provider.hpp"
#include "a3syn/raster.hpp"
#include "a3syn/rig.hpp"

namespace a3syn {

struct MockOracleOptions {
  int feature_dim = 64;
  std::uint64_t code_seed = 0x5eed;
  int max_image_side = 4096;
  int nominal_image_side = 512;
};

/// Deterministic stand-in for the generative backends. It holds a hidden target
/// pose: "inpainting" renders that pose (moved toward it by the partial ratio from
/// the pose in the request hint) and "features" paint a unique unit code at the
/// pixel of every visible vertex over a background code, so cosine matching
/// recovers exact vertex correspondences.
class MockOracle : public AffordanceProvider {
 public:
  MockOracle(SkinnedRig rig, TriangleMesh scene, PoseState hidden_target, MockOracleOptions options = {});

  ProviderCapabilities capabilities() override;
  RgbImage inpaint(const InpaintRequest& request) override;
  FeatureMap extract_features(const RgbImage& image, const RenderHint* hint = nullptr) override;
  VerifyResult verify(const RgbImage& image, const std::string& prompt) override;

  const PoseState& hidden_target() const { return hidden_; }
  const SkinnedRig& rig() const { return rig_; }
  std::span<const float> vertex_code(std::size_t vertex) const;
  std::span<const float> background_code() const;

 private:
  struct Registered {
    std::vector<std::optional<ViewHint>> views;
    Mask mask;
  };

  RgbImage render_view(const ViewHint& view) const;
  void paint_features(FeatureMap& map, const ViewHint& view, int offset_x, int offset_y, const Mask& mask) const;
  void remember(const RgbImage& image, Registered entry);

  SkinnedRig rig_;
  TriangleMesh scene_;
  PoseState hidden_;
  MockOracleOptions options_;
  std::vector<float> codes_;  // (|V| + 1) x dim; row 0 is the background
  std::mutex mutex_;
  std::map<std::string, Registered> produced_;
};

/// Component-wise blend toward `target`: t = 0 gives `from`, t = 1 gives `target`.
/// Scale blends geometrically.
PoseState interpolate_pose(const PoseState& from, const PoseState& target, double t);

}  // namespace a3syn
