#include "a3syn/mock_provider.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "a3syn/codec.hpp"

namespace a3syn {
namespace {

std::string image_key(const RgbImage& image) {
  return sha256_hex(image.data) + ":" + std::to_string(image.width) + "x" + std::to_string(image.height);
}

}  // namespace

PoseState interpolate_pose(const PoseState& from, const PoseState& target, double t) {
  if (from.articulation.rows() != target.articulation.rows()) throw ContractViolation("pose bone counts differ");
  PoseState out;
  out.articulation = (1.0 - t) * from.articulation + t * target.articulation;
  out.translation = (1.0 - t) * from.translation + t * target.translation;
  out.rotation = (1.0 - t) * from.rotation + t * target.rotation;
  out.scale = std::exp((1.0 - t) * std::log(from.scale) + t * std::log(target.scale));
  return out;
}

MockOracle::MockOracle(SkinnedRig rig, TriangleMesh scene, PoseState hidden_target, MockOracleOptions options)
    : rig_(std::move(rig)), scene_(std::move(scene)), hidden_(std::move(hidden_target)), options_(options) {
  rig_.validate();
  if (hidden_.num_bones() != rig_.num_bones()) throw ContractViolation("hidden target does not match the rig");
  if (options_.feature_dim < 2) throw ContractViolation("mock feature dim must be >= 2");

  const auto dim = static_cast<std::size_t>(options_.feature_dim);
  codes_.assign((rig_.num_vertices() + 1) * dim, 0.0f);
  codes_[0] = 1.0f;
  std::mt19937_64 rng(options_.code_seed);
  std::normal_distribution<double> normal;
  for (std::size_t v = 0; v < rig_.num_vertices(); ++v) {
    float* code = codes_.data() + (v + 1) * dim;
    double norm2 = 0.0;
    std::vector<double> tmp(dim, 0.0);
    for (std::size_t c = 1; c < dim; ++c) {
      tmp[c] = normal(rng);
      norm2 += tmp[c] * tmp[c];
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t c = 1; c < dim; ++c) code[c] = static_cast<float>(tmp[c] * inv);
  }
}

std::span<const float> MockOracle::vertex_code(std::size_t vertex) const {
  const auto dim = static_cast<std::size_t>(options_.feature_dim);
  return {codes_.data() + (vertex + 1) * dim, dim};
}

std::span<const float> MockOracle::background_code() const {
  return {codes_.data(), static_cast<std::size_t>(options_.feature_dim)};
}

ProviderCapabilities MockOracle::capabilities() {
  ProviderCapabilities caps;
  caps.supports_partial_denoising = true;
  caps.feature_height = options_.nominal_image_side;
  caps.feature_width = options_.nominal_image_side;
  caps.feature_dim = options_.feature_dim;
  caps.max_image_side = options_.max_image_side;
  return caps;
}

RgbImage MockOracle::render_view(const ViewHint& view) const {
  const auto posed = skin_vertices(rig_, view.pose);
  return rasterize(posed, rig_.faces, view.camera, &scene_).color;
}

void MockOracle::remember(const RgbImage& image, Registered entry) {
  std::lock_guard lock(mutex_);
  produced_[image_key(image)] = std::move(entry);
}

RgbImage MockOracle::inpaint(const InpaintRequest& request) {
  request.validate();
  if (std::max(request.image.width, request.image.height) > options_.max_image_side) {
    throw ProviderError("image exceeds max_image_side");
  }
  if (!request.mask.any()) return request.image;
  if (!request.hint) throw ProviderError("mock oracle needs a render hint describing the request image");

  const auto& views = request.hint->views;
  if (views.size() != 1 && views.size() != 4) throw ProviderError("render hint must describe 1 view or a 2x2 grid");
  const int grid = views.size() == 1 ? 1 : 2;
  if (request.image.width % grid != 0 || request.image.height % grid != 0) {
    throw ProviderError("grid image dimensions must be even");
  }
  const int tw = request.image.width / grid;
  const int th = request.image.height / grid;

  RgbImage out = request.image;
  Registered entry;
  entry.mask = request.mask;
  for (std::size_t t = 0; t < views.size(); ++t) {
    if (!views[t]) {
      entry.views.emplace_back();
      continue;
    }
    ViewHint target{views[t]->camera, interpolate_pose(views[t]->pose, hidden_, request.partial_ratio)};
    if (target.camera.width != tw || target.camera.height != th) {
      throw ProviderError("hint camera resolution does not match the tile size");
    }
    const RgbImage render = render_view(target);
    const int ox = static_cast<int>(t % 2) * tw;
    const int oy = static_cast<int>(t / 2) * th;
    for (int y = 0; y < th; ++y) {
      for (int x = 0; x < tw; ++x) {
        if (!request.mask.get(ox + x, oy + y)) continue;
        std::copy(render.at(x, y), render.at(x, y) + 3, out.at(ox + x, oy + y));
      }
    }
    entry.views.push_back(target);
  }

  if (grid == 2) {
    const std::array<RgbImage, 4> tiles = split_grid(out);
    const std::array<Mask, 4> masks = split_grid(request.mask);
    for (int t = 0; t < 4; ++t) {
      if (entry.views[t]) remember(tiles[t], {{entry.views[t]}, masks[t]});
    }
  }
  remember(out, std::move(entry));
  return out;
}

void MockOracle::paint_features(FeatureMap& map, const ViewHint& view, int offset_x, int offset_y,
                                const Mask& mask) const {
  const auto posed = skin_vertices(rig_, view.pose);
  const auto raster = rasterize(posed, rig_.faces, view.camera, &scene_);
  const int w = view.camera.width;
  const int h = view.camera.height;
  std::vector<double> nearest(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity());
  for (const auto& vv : raster.visible_vertices) {
    const int x = std::clamp(static_cast<int>(std::lround(vv.pixel.x())), 0, w - 1);
    const int y = std::clamp(static_cast<int>(std::lround(vv.pixel.y())), 0, h - 1);
    if (!mask.get(offset_x + x, offset_y + y)) continue;
    auto& best = nearest[static_cast<std::size_t>(y) * w + x];
    if (vv.depth >= best) continue;
    best = vv.depth;
    const auto code = vertex_code(vv.index);
    std::copy(code.begin(), code.end(), map.at(offset_y + y, offset_x + x));
  }
}

FeatureMap MockOracle::extract_features(const RgbImage& image, const RenderHint* hint) {
  Registered entry;
  bool found = false;
  {
    std::lock_guard lock(mutex_);
    if (auto it = produced_.find(image_key(image)); it != produced_.end()) {
      entry = it->second;
      found = true;
    }
  }
  if (!found) {
    if (!hint) throw ProviderError("mock oracle cannot describe an image it did not produce without a render hint");
    entry.views = hint->views;
    entry.mask = Mask(image.width, image.height, 1);
  }
  if (entry.views.size() != 1 && entry.views.size() != 4) throw ProviderError("render hint must describe 1 view or a 2x2 grid");

  const auto dim = static_cast<std::size_t>(options_.feature_dim);
  FeatureMap map(image.height, image.width, options_.feature_dim);
  const auto bg = background_code();
  for (std::size_t p = 0; p < static_cast<std::size_t>(image.width) * image.height; ++p) {
    std::copy(bg.begin(), bg.end(), map.data.begin() + static_cast<std::ptrdiff_t>(p * dim));
  }
  const int grid = entry.views.size() == 1 ? 1 : 2;
  const int tw = image.width / grid;
  const int th = image.height / grid;
  for (std::size_t t = 0; t < entry.views.size(); ++t) {
    if (!entry.views[t]) continue;
    paint_features(map, *entry.views[t], static_cast<int>(t % 2) * tw, static_cast<int>(t / 2) * th, entry.mask);
  }
  return map;
}

VerifyResult MockOracle::verify(const RgbImage&, const std::string&) {
  return {true, "```json{\"is_valid\": true}```"};
}

}  // namespace a3syn
