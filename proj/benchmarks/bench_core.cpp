#include <random>

#include <benchmark/benchmark.h>

#include "a3syn/camera.hpp"
#include "a3syn/correspondence.hpp"
#include "a3syn/gltf.hpp"
#include "a3syn/objective.hpp"
#include "a3syn/raster.hpp"
#include "a3syn/rig.hpp"
#include "a3syn/sdf.hpp"

namespace {

using namespace a3syn;

const RigPackage& quadruped() {
  static const RigPackage pkg = load_rig(std::string(A3SYN_FIXTURE_DIR) + "/quadruped.glb");
  return pkg;
}

PoseState random_pose(std::size_t bones, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  PoseState pose = PoseState::rest(bones);
  for (Eigen::Index i = 0; i < pose.articulation.size(); ++i) pose.articulation.data()[i] = u(rng);
  return pose;
}

TriangleMesh box(const Vec3& lo, const Vec3& hi) {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i) m.vertices.emplace_back(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(), i & 4 ? hi.z() : lo.z());
  const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    m.faces.push_back({static_cast<std::uint32_t>(q[0]), static_cast<std::uint32_t>(q[1]), static_cast<std::uint32_t>(q[2])});
    m.faces.push_back({static_cast<std::uint32_t>(q[0]), static_cast<std::uint32_t>(q[2]), static_cast<std::uint32_t>(q[3])});
  }
  return m;
}

void BM_SkinForward(benchmark::State& state) {
  const auto& rig = quadruped().rig;
  const auto pose = random_pose(rig.num_bones(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(skin_vertices(rig, pose));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rig.num_vertices()));
}
BENCHMARK(BM_SkinForward);

void BM_SdfBuild(benchmark::State& state) {
  const auto mesh = box({-1, -0.2, -1}, {1, 0, 1});
  const int res = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_sdf_grid(mesh, res));
}
BENCHMARK(BM_SdfBuild)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Rasterize(benchmark::State& state) {
  const auto& rig = quadruped().rig;
  const auto verts = skin_vertices(rig, random_pose(rig.num_bones(), 2));
  const auto sphere = bounding_sphere(verts);
  CameraIntrinsics intr;
  intr.width = intr.height = static_cast<int>(state.range(0));
  const auto cam = orbit_camera(sphere.center, 30, 20, 3 * sphere.radius, intr);
  for (auto _ : state) benchmark::DoNotOptimize(rasterize(verts, rig.faces, cam));
}
BENCHMARK(BM_Rasterize)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_FeatureMatch(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const int dim = 64;
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n;
  FeatureMap map(side, side, dim);
  for (auto& v : map.data) v = n(rng);
  const FeatureMatcher matcher(map);
  std::vector<float> query(dim);
  for (auto& v : query) v = n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(matcher.match(query));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_FeatureMatch)->Arg(64)->Arg(128);

void BM_ObjectiveGradient(benchmark::State& state) {
  const auto& rig = quadruped().rig;
  const auto pose = random_pose(rig.num_bones(), 4);
  const auto verts = skin_vertices(rig, pose);
  const auto sphere = bounding_sphere(verts);
  static const SdfGrid grid = build_sdf_grid(box({-2, -2, -2}, {2, -1, 2}), 32);

  ObjectiveContext ctx;
  ctx.rig = &rig;
  ctx.levels = hierarchy_levels(rig.skeleton);
  ctx.sdf = &grid;
  ctx.stage = state.range(0) > 1 ? Stage::kMultiView : Stage::kSingleView;
  const auto owner = attribute_vertices_to_bones(rig.weights);
  for (int v = 0; v < state.range(0); ++v) {
    ViewTarget view;
    view.camera = orbit_camera(sphere.center, 90.0 * v, 15, 3 * sphere.radius);
    for (std::size_t b = 0; b < rig.num_bones(); ++b) {
      BoneTarget t;
      t.bone = b;
      for (std::size_t i = 0; i < owner.size(); ++i)
        if (owner[i] == b) t.vertices.push_back(i);
      if (t.vertices.empty()) continue;
      t.target = Vec2(256.0 + 10.0 * b, 250.0);
      view.bones.push_back(std::move(t));
    }
    ctx.views.push_back(std::move(view));
  }
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_objective(ctx, pose));
}
BENCHMARK(BM_ObjectiveGradient)->Arg(1)->Arg(4);

}  // namespace

BENCHMARK_MAIN();
