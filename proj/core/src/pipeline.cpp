#include "a3syn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>

#include "a3syn/assets.hpp"
#include "a3syn/codec.hpp"
#include "a3syn/raster.hpp"

namespace a3syn {
namespace {

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t x = base;
  for (const auto v : {a, b, c}) {
    x += 0x9e3779b97f4a7c15ull + v;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    x ^= x >> 31;
  }
  return x;
}

CameraIntrinsics intrinsics_of(const PipelineConfig& config) {
  return {deg_to_rad(config.vertical_fov_deg), config.image_size, config.image_size};
}

int dilation_radius(const PipelineConfig& config) {
  return std::max(1, static_cast<int>(std::lround(config.dilation_fraction * config.image_size)));
}

void save(const std::filesystem::path& path, const auto& image, std::vector<std::filesystem::path>* written) {
  std::filesystem::create_directories(path.parent_path());
  write_png(path, image);
  if (written) written->push_back(path);
}

/// A view whose target features stay fixed while the source side is re-rendered.
struct TargetView {
  Camera camera;
  std::shared_ptr<const FeatureMatcher> matcher;
};

class CorrespondenceSource : public GradientSource {
 public:
  CorrespondenceSource(const SkinnedRig& rig, const SceneContext& scene, AffordanceProvider& provider,
                       const PipelineConfig& config, Stage stage, std::vector<TargetView> views, int first_iteration)
      : rig_(rig),
        scene_(scene),
        provider_(provider),
        config_(config),
        views_(std::move(views)),
        attribution_(attribute_vertices_to_bones(rig.weights)),
        first_(first_iteration) {
    ctx_.rig = &rig;
    ctx_.levels = hierarchy_levels(rig.skeleton);
    ctx_.sdf = &scene.sdf;
    ctx_.weights = config.weights;
    ctx_.stage = stage;
    ctx_.views.resize(views_.size());
    sets_.resize(views_.size());
  }

  void refresh(const PoseState& pose) {
    const auto posed = skin_vertices(rig_, pose);
    for (std::size_t v = 0; v < views_.size(); ++v) {
      const auto& view = views_[v];
      const auto raster = rasterize(posed, rig_.faces, view.camera, &scene_.mesh);
      RenderHint hint{{ViewHint{view.camera, pose}}};
      const auto features = provider_.extract_features(raster.color, &hint);
      sets_[v] = bone_correspondences(raster, features, *view.matcher, attribution_, rig_.num_bones(),
                                      config_.correspondence);
      ctx_.views[v] = make_view_target(view.camera, sets_[v]);
    }
  }

  void before_iteration(int iteration, const PoseState& pose) override {
    const int local = iteration - first_;
    if (config_.refresh_interval > 0 && local > 0 && local % config_.refresh_interval == 0) refresh(pose);
  }

  Evaluation evaluate(const PoseState& pose) override { return evaluate_objective(ctx_, pose); }

  const std::vector<CorrespondenceSet>& sets() const { return sets_; }
  LossBreakdown loss_at(const PoseState& pose) const { return evaluate_objective(ctx_, pose, false).loss; }

 private:
  const SkinnedRig& rig_;
  const SceneContext& scene_;
  AffordanceProvider& provider_;
  const PipelineConfig& config_;
  std::vector<TargetView> views_;
  std::vector<std::size_t> attribution_;
  int first_;
  ObjectiveContext ctx_;
  std::vector<CorrespondenceSet> sets_;
};

std::shared_ptr<const FeatureMatcher> target_matcher(AffordanceProvider& provider, const RgbImage& image,
                                                     const RenderHint* hint) {
  FeatureMap features = provider.extract_features(image, hint);
  if (features.height != image.height || features.width != image.width) {
    features = upsample_features(features, image.height, image.width);
  }
  return std::make_shared<const FeatureMatcher>(features);
}

struct Ring {
  std::vector<Camera> cameras;
  std::vector<ViewScore> scores;
};

Ring score_ring(const std::vector<Vec3>& posed, const SkinnedRig& rig, const SceneContext& scene,
                const PipelineConfig& config, double distance) {
  const auto sphere = bounding_sphere(posed);
  Ring ring;
  ring.cameras = sample_camera_ring(sphere.center, distance, config.elevations_deg, config.per_level,
                                    intrinsics_of(config));
  select_best_view(ring.cameras, posed, rig.faces, &scene.mesh, &ring.scores);
  return ring;
}

double ring_distance(const SkinnedRig& rig, const PipelineConfig& config) {
  const double r = bounding_sphere(rig.vertices).radius;
  if (!(r > 0.0)) throw ContractViolation("rig has zero extent");
  return config.distance_factor * r;
}

CandidateSelection inpaint_and_select(AffordanceProvider& provider, const RgbImage& image, const Mask& mask,
                                      const RenderHint& hint, double gamma, const PipelineConfig& config,
                                      std::uint64_t stream, std::uint64_t attempt) {
  auto generate = [&](int round) {
    std::vector<InpaintRequest> requests;
    for (int i = 0; i < config.n_candidates; ++i) {
      InpaintRequest r;
      r.image = image;
      r.mask = mask;
      r.prompt = config.prompt;
      r.partial_ratio = gamma;
      r.seed = mix_seed(config.seed, stream, attempt * 1000 + static_cast<std::uint64_t>(round),
                        static_cast<std::uint64_t>(i));
      r.hint = hint;
      requests.push_back(std::move(r));
    }
    return provider.inpaint_many(requests);
  };
  return select_candidate(provider, generate, config.prompt, config.max_retries);
}

double usable_gamma(AffordanceProvider& provider, double gamma) {
  return provider.capabilities().supports_partial_denoising ? gamma : 1.0;
}

}  // namespace

void PipelineConfig::validate() const {
  if (elevations_deg.empty()) throw ContractViolation("elevations_deg must not be empty");
  for (const double e : elevations_deg) {
    if (!(e > -90.0 && e < 90.0)) throw ContractViolation("elevations must lie in (-90, 90) degrees");
  }
  if (per_level < 1) throw ContractViolation("per_level must be >= 1");
  if (!(distance_factor > 0.0)) throw ContractViolation("distance_factor must be positive");
  if (!(vertical_fov_deg > 0.0 && vertical_fov_deg < 180.0)) throw ContractViolation("vertical_fov_deg out of range");
  if (image_size < 16 || image_size % 2 != 0) throw ContractViolation("image_size must be even and >= 16");
  if (!(dilation_fraction >= 0.0 && dilation_fraction <= 1.0)) throw ContractViolation("dilation_fraction out of range");
  if (!(correspondence.similarity_threshold >= -1.0 && correspondence.similarity_threshold <= 1.0)) {
    throw ContractViolation("similarity_threshold must lie in [-1, 1]");
  }
  weights.validate();
  optimizer.validate();
  if (mv_rounds < 0) throw ContractViolation("mv_rounds must be >= 0");
  if (static_cast<int>(gamma_schedule.size()) < mv_rounds) {
    throw ContractViolation("gamma_schedule needs one entry per round");
  }
  for (std::size_t i = 0; i < gamma_schedule.size(); ++i) {
    if (!(gamma_schedule[i] >= 0.0 && gamma_schedule[i] <= 1.0)) throw ContractViolation("gamma values must lie in [0, 1]");
    if (i > 0 && gamma_schedule[i] > gamma_schedule[i - 1]) throw ContractViolation("gamma_schedule must be non-increasing");
  }
  if (mv_views < 1) throw ContractViolation("mv_views must be >= 1");
  if (refresh_interval < 0) throw ContractViolation("refresh_interval must be >= 0");
  if (n_candidates < 1) throw ContractViolation("n_candidates must be >= 1");
  if (max_retries < 1) throw ContractViolation("max_retries must be >= 1");
}

std::vector<double> default_gamma_schedule(int rounds) {
  if (rounds <= 0) return {};
  if (rounds == 1) return {0.8};
  std::vector<double> out;
  for (int r = 0; r < rounds; ++r) out.push_back(0.8 - 0.2 * r / (rounds - 1));
  return out;
}

PoseState initial_pose(const SkinnedRig& rig, const Vec3& anchor) { return PoseState::rest(rig.num_bones(), anchor); }

std::vector<std::size_t> keep_most_visible(std::span<const ViewScore> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a].score > scores[b].score; });
  order.resize((scores.size() + 1) / 2);
  std::sort(order.begin(), order.end());
  return order;
}

Stage1Result stage1_place(const SkinnedRig& rig, const SceneContext& scene, AffordanceProvider& provider,
                          const PipelineConfig& config, const BoneLimits* limits,
                          const std::filesystem::path& artifact_dir, std::vector<std::filesystem::path>* written) {
  config.validate();
  rig.validate();
  const PoseState pose0 = initial_pose(rig, config.anchor);
  const auto posed = skin_vertices(rig, pose0);
  const Ring ring = score_ring(posed, rig, scene, config, ring_distance(rig, config));

  std::size_t best = 0;
  for (std::size_t i = 1; i < ring.scores.size(); ++i) {
    if (ring.scores[i].score > ring.scores[best].score) best = i;
  }
  const Camera camera = ring.cameras[best];
  const auto raster = rasterize(posed, rig.faces, camera, &scene.mesh);
  if (!(ring.scores[best].score > 0.0) || raster.visible_vertices.empty()) throw Error("object not visible");

  const Mask mask = dilate_mask(raster.silhouette, dilation_radius(config));
  const RenderHint hint{{ViewHint{camera, pose0}}};
  const auto chosen = inpaint_and_select(provider, raster.color, mask, hint, 1.0, config, 1, 0);
  if (!artifact_dir.empty()) {
    save(artifact_dir / "stage1" / "render.png", raster.color, written);
    save(artifact_dir / "stage1" / "mask.png", mask, written);
    save(artifact_dir / "stage1" / "inpaint.png", chosen.image, written);
  }

  std::vector<TargetView> views{{camera, target_matcher(provider, chosen.image, nullptr)}};
  CorrespondenceSource source(rig, scene, provider, config, Stage::kSingleView, std::move(views), 0);
  source.refresh(pose0);

  Stage1Result result;
  result.camera = camera;
  result.initial_correspondence = source.sets()[0];
  auto stage = run_stage(pose0, source, config.optimizer, config.optimizer.epochs_stage1, limits, 0);
  result.pose = std::move(stage.pose);
  result.trace = std::move(stage.trace);
  return result;
}

Stage2Result stage2_refine(const PoseState& pose, const SkinnedRig& rig, const SceneContext& scene,
                           AffordanceProvider& provider, const PipelineConfig& config, const BoneLimits* limits,
                           const std::filesystem::path& artifact_dir, std::vector<std::filesystem::path>* written,
                           int first_iteration) {
  config.validate();
  rig.validate();
  Stage2Result result;
  result.pose = pose;
  const double distance = ring_distance(rig, config);
  std::mt19937_64 rng(mix_seed(config.seed, 2, 0, 0));
  const RasterOptions blank_style;
  int iteration = first_iteration;

  for (int r = 0; r < config.mv_rounds; ++r) {
    Stage2Round round;
    round.round = r;
    round.gamma = usable_gamma(provider, config.gamma_schedule[static_cast<std::size_t>(r)]);
    const auto posed = skin_vertices(rig, result.pose);
    const Ring ring = score_ring(posed, rig, scene, config, distance);

    std::vector<std::size_t> kept = keep_most_visible(ring.scores);
    std::erase_if(kept, [&](std::size_t i) { return !(ring.scores[i].score > 0.0); });
    if (kept.empty()) throw Error("object not visible");
    const std::size_t n_views = std::min<std::size_t>(static_cast<std::size_t>(config.mv_views), kept.size());
    for (std::size_t i = 0; i < n_views; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, kept.size() - 1);
      std::swap(kept[i], kept[pick(rng)]);
    }
    kept.resize(n_views);
    for (const auto i : kept) round.cameras.push_back(ring.cameras[i]);

    std::vector<RasterOutput> renders;
    std::vector<Mask> masks;
    for (const auto& cam : round.cameras) {
      renders.push_back(rasterize(posed, rig.faces, cam, &scene.mesh));
      masks.push_back(dilate_mask(renders.back().silhouette, dilation_radius(config)));
    }
    const std::filesystem::path round_dir =
        artifact_dir.empty() ? std::filesystem::path() : artifact_dir / ("round" + std::to_string(r));

    const std::size_t n_grids = (n_views + 3) / 4;
    auto inpaint_round = [&](std::uint64_t attempt) {
      std::vector<TargetView> views;
      for (std::size_t g = 0; g < n_grids; ++g) {
        std::array<RgbImage, 4> tiles;
        std::array<Mask, 4> tile_masks;
        RenderHint hint;
        for (std::size_t t = 0; t < 4; ++t) {
          const std::size_t v = g * 4 + t;
          if (v < n_views) {
            tiles[t] = renders[v].color;
            tile_masks[t] = masks[v];
            hint.views.emplace_back(ViewHint{round.cameras[v], result.pose});
          } else {
            tiles[t] = RgbImage(config.image_size, config.image_size);
            for (std::size_t p = 0; p < tiles[t].data.size(); p += 3) {
              std::copy(blank_style.background.begin(), blank_style.background.end(), tiles[t].data.begin() + p);
            }
            tile_masks[t] = Mask(config.image_size, config.image_size);
            hint.views.emplace_back();
          }
        }
        const RgbImage grid = tile_grid<RgbImage>(tiles);
        const Mask grid_mask = tile_grid<Mask>(tile_masks);
        const auto chosen = inpaint_and_select(provider, grid, grid_mask, hint, round.gamma, config,
                                               100 + static_cast<std::uint64_t>(r) * 16 + g, attempt);
        const auto parts = split_grid(chosen.image);
        if (!round_dir.empty()) {
          const auto stem = "grid" + std::to_string(g) + (attempt ? "_retry" : "");
          save(round_dir / (stem + "_input.png"), grid, written);
          save(round_dir / (stem + "_mask.png"), grid_mask, written);
          save(round_dir / (stem + "_inpaint.png"), chosen.image, written);
        }
        for (std::size_t t = 0; t < 4 && g * 4 + t < n_views; ++t) {
          const std::size_t v = g * 4 + t;
          if (!round_dir.empty()) {
            const auto dir = round_dir / ("view" + std::to_string(v));
            save(dir / "render.png", renders[v].color, written);
            save(dir / "mask.png", masks[v], written);
            save(dir / "target.png", parts[t], written);
          }
          views.push_back({round.cameras[v], target_matcher(provider, parts[t], nullptr)});
        }
      }
      auto source = std::make_unique<CorrespondenceSource>(rig, scene, provider, config, Stage::kMultiView,
                                                           std::move(views), iteration);
      source->refresh(result.pose);
      return source;
    };

    auto source = inpaint_round(0);
    round.n_valid_views = source->loss_at(result.pose).n_valid_views;
    if (round.n_valid_views == 0) {
      source = inpaint_round(1);
      round.n_valid_views = source->loss_at(result.pose).n_valid_views;
    }
    if (round.n_valid_views == 0) {
      round.skipped = true;
      result.rounds.push_back(std::move(round));
      continue;
    }
    auto stage = run_stage(result.pose, *source, config.optimizer, config.optimizer.epochs_stage2, limits, iteration);
    iteration += config.optimizer.epochs_stage2;
    result.pose = std::move(stage.pose);
    round.trace = std::move(stage.trace);
    result.rounds.push_back(std::move(round));
  }
  return result;
}

PlacementResult run_full(const SkinnedRig& rig, const SceneContext& scene, AffordanceProvider& provider,
                         const PipelineConfig& config, const BoneLimits* limits, const std::filesystem::path& run_dir,
                         const std::vector<std::uint32_t>& original_joint_indices) {
  PlacementResult result;
  auto* written = &result.artifacts;
  try {
    result.stage1 = stage1_place(rig, scene, provider, config, limits, run_dir, written);
  } catch (const Error& e) {
    throw Error(std::string("stage1: ") + e.what());
  }
  result.stage1_pose = result.stage1.pose;
  try {
    auto refined = stage2_refine(result.stage1_pose, rig, scene, provider, config, limits, run_dir, written,
                                 config.optimizer.epochs_stage1);
    result.pose = std::move(refined.pose);
    result.rounds = std::move(refined.rounds);
  } catch (const Error& e) {
    throw Error(std::string("stage2: ") + e.what());
  }
  result.metrics = score_placement(skin_vertices(rig, result.pose), scene.sdf);

  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir);
    PoseDocument doc;
    doc.pose = result.pose;
    for (const auto& b : rig.skeleton.bones()) doc.bone_names.push_back(b.name);
    doc.original_joint_indices = original_joint_indices;
    write_pose(run_dir / "pose.json", doc);
    {
      std::ofstream trace(run_dir / "trace.jsonl");
      result.stage1.trace.write_jsonl(trace);
      for (const auto& round : result.rounds) round.trace.write_jsonl(trace);
      if (!trace) throw Error("cannot write " + (run_dir / "trace.jsonl").string());
    }
    write_file(run_dir / "report.json", report_json(result.metrics) + "\n");
    for (const char* name : {"pose.json", "trace.jsonl", "report.json"}) result.artifacts.push_back(run_dir / name);
  }
  return result;
}

}  // namespace a3syn
