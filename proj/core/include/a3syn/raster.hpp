#pragma once

#include <array>
#include <span>
#include <vector>

#include "a3syn/camera.hpp"
#include "a3syn/common.hpp"
#include "a3syn/image.hpp"

namespace a3syn {

struct VisibleVertex {
  std::size_t index = 0;
  Vec2 pixel = Vec2::Zero();
  double depth = 0.0;
};

/// Z-buffer render of an object, optionally composited with scene occluders.
/// Visibility and silhouettes only; nothing here is differentiated.
struct RasterOutput {
  RgbImage color;
  /// Object pixels left visible after scene occlusion.
  Mask silhouette;
  /// Object footprint ignoring the scene.
  Mask object_silhouette;
  /// Object depth where `silhouette` is set, +inf elsewhere.
  std::vector<double> depth;
  std::vector<VisibleVertex> visible_vertices;

  double depth_at(int x, int y) const { return depth[static_cast<std::size_t>(y) * color.width + x]; }
};

struct RasterOptions {
  /// Visibility tolerance; <= 0 selects 1e-3 x the diagonal of everything rendered.
  double depth_epsilon = 0.0;
  std::array<std::uint8_t, 3> object_color{200, 120, 60};
  std::array<std::uint8_t, 3> scene_color{150, 150, 150};
  std::array<std::uint8_t, 3> background{235, 240, 250};
};

RasterOutput rasterize(std::span<const Vec3> vertices, std::span<const Face> faces, const Camera& camera,
                       const TriangleMesh* occluders = nullptr, const RasterOptions& options = {});

struct ViewScore {
  double silhouette_fraction = 0.0;
  double occlusion = 0.0;
  double score = 0.0;
};

ViewScore score_view(const RasterOutput& raster);

/// Index of the camera maximizing silhouette_fraction * (1 - occlusion_rate);
/// ties go to the lowest index. `scores`, when given, receives every candidate's score.
std::size_t select_best_view(std::span<const Camera> candidates, std::span<const Vec3> posed_vertices,
                             std::span<const Face> faces, const TriangleMesh* scene,
                             std::vector<ViewScore>* scores = nullptr);

}  // namespace a3syn
