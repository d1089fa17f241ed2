#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "a3syn/assets.hpp"
#include "a3syn/codec.hpp"
#include "a3syn/gltf.hpp"
#include "a3syn/http_provider.hpp"
#include "a3syn/metrics.hpp"
#include "a3syn/mock_provider.hpp"
#include "a3syn/pipeline.hpp"
#include "a3syn/raster.hpp"
#include "a3syn/sdf.hpp"

namespace {

using namespace a3syn;

constexpr int kDomainError = 1;
constexpr int kUsageError = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Vec3 triple(const std::vector<double>& v, const char* flag) {
  if (v.size() != 3) throw UsageError(std::string(flag) + " expects three comma-separated numbers");
  return {v[0], v[1], v[2]};
}

SdfGrid scene_sdf(const TriangleMesh& mesh, int resolution) {
  constexpr double kPadding = 0.05;
  if (const char* dir = std::getenv("A3SYN_CACHE_DIR"); dir && *dir) {
    return load_or_build_sdf(mesh, resolution, kPadding, dir);
  }
  return build_sdf_grid(mesh, resolution, kPadding);
}

std::string hash_file(const std::string& path) { return sha256_hex(read_file(path)); }

struct PlaceArgs {
  std::string rig, scene, prompt, out, provider = "mock", mock_target, config;
  std::vector<double> location;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> skin;
  int sdf_res = 128;
};

int run_place(const PlaceArgs& a) {
  const Vec3 location = triple(a.location, "--location");
  const bool mock = a.provider == "mock";
  if (mock && a.mock_target.empty()) throw UsageError("--provider mock requires --mock-target FILE");
  if (!mock && a.provider.rfind("http://", 0) != 0 && a.provider.rfind("https://", 0) != 0) {
    throw UsageError("--provider must be 'mock' or an http(s) URL");
  }
  if (a.sdf_res < 4) throw UsageError("--sdf-res must be >= 4");

  PipelineConfig config = a.config.empty() ? PipelineConfig{} : load_config(a.config);
  config.prompt = a.prompt;
  config.anchor = location;
  if (a.seed) config.seed = *a.seed;
  config.validate();

  RigLoadOptions load_opts;
  load_opts.skin = a.skin;
  const RigPackage pkg = load_rig_any(a.rig, load_opts);
  SceneContext scene;
  scene.mesh = load_scene(a.scene);
  scene.sdf = scene_sdf(scene.mesh, a.sdf_res);

  std::unique_ptr<AffordanceProvider> provider;
  if (mock) {
    const auto target = read_pose(a.mock_target);
    provider = std::make_unique<MockOracle>(pkg.rig, scene.mesh, target.pose,
                                            MockOracleOptions{64, 0x5eed, 4096, config.image_size});
  } else {
    provider = std::make_unique<HttpProvider>(HttpProviderOptions{a.provider, provider_token_from_env()});
  }

  nlohmann::ordered_json run;
  run["rig_sha256"] = pkg.source_sha256.empty() ? hash_file(a.rig) : pkg.source_sha256;
  run["scene_sha256"] = hash_file(a.scene);
  run["provider"] = a.provider;
  run["mock_target_sha256"] = mock ? hash_file(a.mock_target) : "";
  run["config"] = nlohmann::json::parse(config_to_json(config));
  const std::string run_id = sha256_hex(run.dump()).substr(0, 16);
  run["run_id"] = run_id;
  write_file(std::filesystem::path(a.out) / "run.json", run.dump(2) + "\n");

  const BoneLimits* limits = pkg.limits ? &*pkg.limits : nullptr;
  const auto result = run_full(pkg.rig, scene, *provider, config, limits, a.out, pkg.original_joint_indices);

  std::cout << "run_id " << run_id << "\n";
  std::cout << "stage1 iterations " << result.stage1.trace.records.size() << "\n";
  for (const auto& r : result.rounds) {
    std::cout << "round " << r.round << " gamma " << r.gamma << " valid_views " << r.n_valid_views
              << (r.skipped ? " skipped" : "") << "\n";
  }
  std::cout << "non_collision " << result.metrics.non_collision << " contact " << std::boolalpha
            << result.metrics.contact << "\n";
  std::cout << "wrote " << (std::filesystem::path(a.out) / "pose.json").string() << "\n";
  return 0;
}

int run_ingest(const std::string& in, const std::string& out, std::optional<std::size_t> skin, double tolerance) {
  RigLoadOptions opts;
  opts.skin = skin;
  opts.weight_tolerance = tolerance;
  const auto pkg = load_rig(in, opts);
  const auto report = verify_rig(pkg);
  std::cout << pkg.source_name << ": " << pkg.rig.num_bones() << " bones, " << pkg.rig.num_vertices()
            << " vertices, " << pkg.rig.faces.size() << " faces\n";
  for (const auto& c : report.checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
    std::cout << "\n";
  }
  write_file(out, rig_package_to_json(pkg, report));
  if (!report.passed()) {
    std::cerr << "error: rig verification failed\n";
    return kDomainError;
  }
  return 0;
}

std::vector<Vec3> posed_from(const std::string& pose_path, const std::string& rig_path, SkinnedRig* rig_out) {
  const auto pkg = load_rig_any(rig_path);
  const auto doc = read_pose(pose_path);
  if (doc.pose.num_bones() != pkg.rig.num_bones()) {
    throw Error("pose has " + std::to_string(doc.pose.num_bones()) + " bones but the rig has " +
                std::to_string(pkg.rig.num_bones()));
  }
  if (rig_out) *rig_out = pkg.rig;
  return skin_vertices(pkg.rig, doc.pose);
}

int run_metrics(const std::string& pose, const std::string& rig, const std::string& scene, int res) {
  const auto posed = posed_from(pose, rig, nullptr);
  const auto grid = scene_sdf(load_scene(scene), res);
  std::cout << report_json(score_placement(posed, grid)) << "\n";
  return 0;
}

int run_render(const std::string& pose, const std::string& rig_path, const std::string& scene_path,
               const std::vector<double>& camera, const std::string& out, int size, double fov) {
  const Vec3 c = triple(camera, "--camera");
  if (size < 16 || size % 2 != 0) throw UsageError("--size must be even and >= 16");
  SkinnedRig rig;
  const auto posed = posed_from(pose, rig_path, &rig);
  const auto scene = load_scene(scene_path);
  const auto sphere = bounding_sphere(posed);
  const Camera cam = orbit_camera(sphere.center, c[0], c[1], c[2], CameraIntrinsics{deg_to_rad(fov), size, size});
  write_png(out, rasterize(posed, rig.faces, cam, &scene).color);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int run_sdf_cache(const std::string& scene, int res, double padding, const std::string& out) {
  if (res < 4) throw UsageError("--res must be >= 4");
  const auto grid = build_sdf_grid(load_scene(scene), res, padding);
  grid.save(out);
  const auto& d = grid.dims();
  std::cout << "wrote " << out << " (" << d[0] << "x" << d[1] << "x" << d[2] << ", voxel " << grid.voxel_size()
            << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Places rigged objects into 3D scenes with articulated poses."};
  app.require_subcommand(1);

  PlaceArgs place;
  auto* cmd_place = app.add_subcommand("place", "Run the two-stage placement pipeline");
  cmd_place->add_option("--rig", place.rig, "Rig (.gltf/.glb or ingested .json)")->required()->check(CLI::ExistingFile);
  cmd_place->add_option("--scene", place.scene, "Scene mesh (.obj/.gltf/.glb)")->required()->check(CLI::ExistingFile);
  cmd_place->add_option("--prompt", place.prompt, "Text prompt")->required();
  cmd_place->add_option("--location", place.location, "Anchor X,Y,Z in scene units")->required()->delimiter(',');
  cmd_place->add_option("--out", place.out, "Output directory")->required();
  cmd_place->add_option("--provider", place.provider, "'mock' or the base URL of a provider service");
  cmd_place->add_option("--mock-target", place.mock_target, "Hidden target pose for the mock provider")
      ->check(CLI::ExistingFile);
  cmd_place->add_option("--config", place.config, "Pipeline config JSON")->check(CLI::ExistingFile);
  cmd_place->add_option("--seed", place.seed, "Random seed");
  cmd_place->add_option("--skin", place.skin, "Skin index for multi-skin files");
  cmd_place->add_option("--sdf-res", place.sdf_res, "Scene SDF resolution along the longest axis");

  std::string ingest_in, ingest_out;
  std::optional<std::size_t> ingest_skin;
  double ingest_tol = 1e-2;
  auto* cmd_ingest = app.add_subcommand("ingest", "Load and verify a glTF rig, write a rig package");
  cmd_ingest->add_option("--in", ingest_in, "glTF file")->required()->check(CLI::ExistingFile);
  cmd_ingest->add_option("--out", ingest_out, "Package JSON to write")->required();
  cmd_ingest->add_option("--skin", ingest_skin, "Skin index for multi-skin files");
  cmd_ingest->add_option("--weight-tolerance", ingest_tol, "Accepted deviation of weight row sums from 1");

  std::string m_pose, m_rig, m_scene;
  int m_res = 128;
  auto* cmd_metrics = app.add_subcommand("metrics", "Score a pose against a scene");
  cmd_metrics->add_option("--pose", m_pose, "pose.json")->required()->check(CLI::ExistingFile);
  cmd_metrics->add_option("--rig", m_rig, "Rig")->required()->check(CLI::ExistingFile);
  cmd_metrics->add_option("--scene", m_scene, "Scene mesh")->required()->check(CLI::ExistingFile);
  cmd_metrics->add_option("--sdf-res", m_res, "Scene SDF resolution");

  std::string r_pose, r_rig, r_scene, r_out;
  std::vector<double> r_camera;
  int r_size = 512;
  double r_fov = 45.0;
  auto* cmd_render = app.add_subcommand("render", "Render a posed rig in its scene");
  cmd_render->add_option("--pose", r_pose, "pose.json")->required()->check(CLI::ExistingFile);
  cmd_render->add_option("--rig", r_rig, "Rig")->required()->check(CLI::ExistingFile);
  cmd_render->add_option("--scene", r_scene, "Scene mesh")->required()->check(CLI::ExistingFile);
  cmd_render->add_option("--camera", r_camera, "Azimuth,elevation (degrees),distance")->required()->delimiter(',');
  cmd_render->add_option("--out", r_out, "PNG to write")->required();
  cmd_render->add_option("--size", r_size, "Image side in pixels");
  cmd_render->add_option("--fov", r_fov, "Vertical field of view in degrees");

  std::string s_scene, s_out;
  int s_res = 128;
  double s_pad = 0.05;
  auto* cmd_sdf = app.add_subcommand("sdf-cache", "Build and save a scene SDF grid");
  cmd_sdf->add_option("--scene", s_scene, "Scene mesh")->required()->check(CLI::ExistingFile);
  cmd_sdf->add_option("--res", s_res, "Samples along the longest axis")->required();
  cmd_sdf->add_option("--out", s_out, "Output file")->required();
  cmd_sdf->add_option("--padding", s_pad, "Padding as a fraction of the box diagonal");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*cmd_place) return run_place(place);
    if (*cmd_ingest) return run_ingest(ingest_in, ingest_out, ingest_skin, ingest_tol);
    if (*cmd_metrics) return run_metrics(m_pose, m_rig, m_scene, m_res);
    if (*cmd_render) return run_render(r_pose, r_rig, r_scene, r_camera, r_out, r_size, r_fov);
    if (*cmd_sdf) return run_sdf_cache(s_scene, s_res, s_pad, s_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomainError;
  }
  return kUsageError;
}
