#include "a3syn/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace a3syn {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNear = 1e-4;

struct Buffers {
  int width;
  int height;
  std::vector<double> z;
  std::vector<std::array<std::uint8_t, 3>> rgb;

  Buffers(int w, int h) : width(w), height(h), z(static_cast<std::size_t>(w) * h, kInf), rgb(z.size()) {}
};

std::array<std::uint8_t, 3> shade(const std::array<std::uint8_t, 3>& base, double intensity) {
  std::array<std::uint8_t, 3> out;
  for (int c = 0; c < 3; ++c) out[c] = static_cast<std::uint8_t>(std::clamp(base[c] * intensity, 0.0, 255.0));
  return out;
}

// Rasterizes one camera-space triangle with near-plane clipping.
void draw_triangle(const Projector& proj, const std::array<Vec3, 3>& cam, const std::array<std::uint8_t, 3>& color,
                   Buffers& buf) {
  std::array<Vec3, 4> poly;
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    const Vec3& a = cam[i];
    const Vec3& b = cam[(i + 1) % 3];
    const bool a_in = a.z() > kNear;
    const bool b_in = b.z() > kNear;
    if (a_in) poly[n++] = a;
    if (a_in != b_in) {
      const double t = (kNear - a.z()) / (b.z() - a.z());
      poly[n++] = a + t * (b - a);
    }
  }
  if (n < 3) return;

  const Vec3 normal = (cam[1] - cam[0]).cross(cam[2] - cam[0]);
  const double nn = normal.norm();
  if (nn == 0.0) return;
  const Vec3 centroid = (cam[0] + cam[1] + cam[2]) / 3.0;
  const double intensity = 0.35 + 0.65 * std::abs(normal.dot(centroid)) / (nn * centroid.norm());
  const auto rgb = shade(color, intensity);

  for (int f = 1; f + 1 < n; ++f) {
    const std::array<Vec3, 3> tri{poly[0], poly[f], poly[f + 1]};
    std::array<Vec2, 3> s;
    std::array<double, 3> inv_z;
    for (int i = 0; i < 3; ++i) {
      s[i] = proj.project_camera(tri[i]);
      inv_z[i] = 1.0 / tri[i].z();
    }
    const double area = (s[1] - s[0]).x() * (s[2] - s[0]).y() - (s[1] - s[0]).y() * (s[2] - s[0]).x();
    if (area == 0.0 || !std::isfinite(area)) continue;

    const double min_x = std::min({s[0].x(), s[1].x(), s[2].x()});
    const double max_x = std::max({s[0].x(), s[1].x(), s[2].x()});
    const double min_y = std::min({s[0].y(), s[1].y(), s[2].y()});
    const double max_y = std::max({s[0].y(), s[1].y(), s[2].y()});
    const int x0 = std::max(0, static_cast<int>(std::ceil(min_x)));
    const int x1 = std::min(buf.width - 1, static_cast<int>(std::floor(max_x)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(min_y)));
    const int y1 = std::min(buf.height - 1, static_cast<int>(std::floor(max_y)));

    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Vec2 p(x, y);
        std::array<double, 3> w;
        for (int i = 0; i < 3; ++i) {
          const Vec2& a = s[(i + 1) % 3];
          const Vec2& b = s[(i + 2) % 3];
          w[i] = ((b - a).x() * (p - a).y() - (b - a).y() * (p - a).x()) / area;
        }
        if (w[0] < 0.0 || w[1] < 0.0 || w[2] < 0.0) continue;
        const double z = 1.0 / (w[0] * inv_z[0] + w[1] * inv_z[1] + w[2] * inv_z[2]);
        const std::size_t idx = static_cast<std::size_t>(y) * buf.width + x;
        if (z < buf.z[idx]) {
          buf.z[idx] = z;
          buf.rgb[idx] = rgb;
        }
      }
    }
  }
}

void draw_mesh(const Projector& proj, std::span<const Vec3> vertices, std::span<const Face> faces,
               const std::array<std::uint8_t, 3>& color, Buffers& buf) {
  std::vector<Vec3> cam(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) cam[i] = proj.to_camera(vertices[i]);
  for (const auto& f : faces) draw_triangle(proj, {cam[f[0]], cam[f[1]], cam[f[2]]}, color, buf);
}

}  // namespace

RasterOutput rasterize(std::span<const Vec3> vertices, std::span<const Face> faces, const Camera& camera,
                       const TriangleMesh* occluders, const RasterOptions& options) {
  if (vertices.empty() || faces.empty()) throw ContractViolation("rasterize needs a non-empty mesh");
  const Projector proj(camera);
  const int w = camera.width;
  const int h = camera.height;

  double eps = options.depth_epsilon;
  if (eps <= 0.0) {
    Aabb box;
    for (const auto& v : vertices) box.extend(v);
    if (occluders) {
      for (const auto& v : occluders->vertices) box.extend(v);
    }
    eps = 1e-3 * box.diagonal();
  }

  Buffers object(w, h);
  draw_mesh(proj, vertices, faces, options.object_color, object);

  // Vertex splats keep silhouette corners covered so every visible vertex lies on the mask.
  std::vector<Vec2> pixel(vertices.size());
  std::vector<double> depth(vertices.size());
  std::vector<bool> on_screen(vertices.size(), false);
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Vec3 c = proj.to_camera(vertices[i]);
    depth[i] = c.z();
    if (c.z() <= kNear) continue;
    pixel[i] = proj.project_camera(c);
    if (!proj.in_image(pixel[i])) continue;
    on_screen[i] = true;
    const int x = static_cast<int>(std::lround(pixel[i].x()));
    const int y = static_cast<int>(std::lround(pixel[i].y()));
    const std::size_t idx = static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1);
    if (c.z() < object.z[idx]) {
      if (object.z[idx] == kInf) object.rgb[idx] = options.object_color;
      object.z[idx] = c.z();
    }
  }

  Buffers scene(w, h);
  if (occluders && !occluders->empty()) draw_mesh(proj, occluders->vertices, occluders->faces, options.scene_color, scene);

  RasterOutput out;
  out.color = RgbImage(w, h);
  out.silhouette = Mask(w, h);
  out.object_silhouette = Mask(w, h);
  out.depth.assign(static_cast<std::size_t>(w) * h, kInf);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      const double oz = object.z[idx];
      const double sz = scene.z[idx];
      std::array<std::uint8_t, 3> rgb = options.background;
      if (oz < kInf) out.object_silhouette.set(x, y);
      if (oz < kInf && oz <= sz + eps) {
        out.silhouette.set(x, y);
        out.depth[idx] = oz;
        rgb = object.rgb[idx];
      } else if (sz < kInf) {
        rgb = scene.rgb[idx];
      }
      std::copy(rgb.begin(), rgb.end(), out.color.at(x, y));
    }
  }

  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (!on_screen[i]) continue;
    // Vertices on a silhouette may round onto a steep face in front of them, so any
    // pixel of the 3x3 neighbourhood that agrees with the vertex depth counts.
    const int cx = std::clamp(static_cast<int>(std::lround(pixel[i].x())), 0, w - 1);
    const int cy = std::clamp(static_cast<int>(std::lround(pixel[i].y())), 0, h - 1);
    bool visible = false;
    for (int y = std::max(cy - 1, 0); y <= std::min(cy + 1, h - 1) && !visible; ++y) {
      for (int x = std::max(cx - 1, 0); x <= std::min(cx + 1, w - 1) && !visible; ++x) {
        const std::size_t idx = static_cast<std::size_t>(y) * w + x;
        visible = depth[i] <= object.z[idx] + eps && depth[i] <= scene.z[idx] + eps;
      }
    }
    if (visible) out.visible_vertices.push_back({i, pixel[i], depth[i]});
  }
  return out;
}

ViewScore score_view(const RasterOutput& raster) {
  ViewScore s;
  const double total = static_cast<double>(raster.silhouette.width) * raster.silhouette.height;
  s.silhouette_fraction = static_cast<double>(raster.object_silhouette.count()) / total;
  s.occlusion = occlusion_rate(raster.object_silhouette, raster.silhouette);
  s.score = s.silhouette_fraction * (1.0 - s.occlusion);
  return s;
}

std::size_t select_best_view(std::span<const Camera> candidates, std::span<const Vec3> posed_vertices,
                             std::span<const Face> faces, const TriangleMesh* scene, std::vector<ViewScore>* scores) {
  if (candidates.empty()) throw ContractViolation("select_best_view needs at least one candidate");
  std::size_t best = 0;
  double best_score = -1.0;
  if (scores) scores->clear();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto s = score_view(rasterize(posed_vertices, faces, candidates[i], scene));
    if (scores) scores->push_back(s);
    if (s.score > best_score) {
      best_score = s.score;
      best = i;
    }
  }
  return best;
}

}  // namespace a3syn
