#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "a3syn/assets.hpp"
#include "a3syn/codec.hpp"
#include "a3syn/gltf.hpp"
#include "test_support.hpp"

namespace a3syn {
namespace {

using testing::fixture;

TEST(Obj, TwoTrianglesWithAndWithoutDedup) {
  const auto raw = load_scene(fixture("two_tri.obj"));
  EXPECT_EQ(raw.faces.size(), 2u);
  EXPECT_EQ(raw.vertices.size(), 6u);
  const auto dedup = load_scene(fixture("two_tri.obj"), SceneLoadOptions{true});
  EXPECT_EQ(dedup.faces.size(), 2u);
  EXPECT_EQ(dedup.vertices.size(), 4u);
  for (std::size_t f = 0; f < 2; ++f) {
    for (int k = 0; k < 3; ++k) EXPECT_EQ(raw.vertices[raw.faces[f][k]], dedup.vertices[dedup.faces[f][k]]);
  }
}

TEST(Obj, QuadsAreFanTriangulated) {
  const auto m = load_scene(fixture("quad.obj"));
  EXPECT_EQ(m.faces.size(), 4u);
  EXPECT_EQ(m.faces[0], (Face{0, 1, 2}));
  EXPECT_EQ(m.faces[1], (Face{0, 2, 3}));
}

TEST(Obj, ParsesTokensAndNegativeIndices) {
  const auto m = parse_obj(
      "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf 1/1/1 2/1/1 3/1/1\nf -3//1 -2//1 -1//1\n"
      "o other\ng grp\ns off\n");
  ASSERT_EQ(m.faces.size(), 2u);
  EXPECT_EQ(m.faces[1], (Face{0, 1, 2}));
  EXPECT_THROW(parse_obj("v 0 0 0\nf 1 2 3\n"), Error);
  EXPECT_THROW(parse_obj("v 0 0\n"), Error);
  EXPECT_THROW(parse_obj("v 0 0 0\nv 1 0 0\nf 1 2\n"), Error);
}

TEST(Obj, WriteReadRoundTrip) {
  const auto dir = testing::scratch_dir("assets_obj");
  const auto box = testing::box_mesh(Vec3(-1, -2, -3), Vec3(0.5, 0.25, 0.125));
  write_obj(dir / "box.obj", box.vertices, box.faces);
  const auto back = load_scene(dir / "box.obj");
  EXPECT_EQ(back.faces, box.faces);
  ASSERT_EQ(back.vertices.size(), box.vertices.size());
  for (std::size_t i = 0; i < box.vertices.size(); ++i) EXPECT_EQ(back.vertices[i], box.vertices[i]);
}

TEST(Scene, GltfAndUnsupported) {
  const auto m = load_scene(fixture("worm.gltf"));
  EXPECT_GT(m.faces.size(), 0u);
  EXPECT_THROW(load_scene(fixture("smoke_config.json")), Error);
  EXPECT_THROW(load_scene(fixture("missing.obj")), Error);
}

TEST(Pose, RoundTripIsBitExact) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    PoseDocument doc;
    const std::size_t nb = 1 + rng() % 6;
    doc.pose = PoseState::rest(nb, Vec3(u(rng), u(rng), u(rng)));
    doc.pose.articulation = testing::random_articulation(rng, nb, 2.0);
    doc.pose.rotation = Vec3(u(rng), u(rng), u(rng)) * 1e-7;
    doc.pose.scale = std::exp(u(rng));
    for (std::size_t b = 0; b < nb; ++b) {
      doc.bone_names.push_back("bone" + std::to_string(b));
      doc.original_joint_indices.push_back(static_cast<std::uint32_t>(nb - 1 - b));
    }
    const auto back = pose_from_json(pose_to_json(doc));
    EXPECT_EQ(back.pose.articulation, doc.pose.articulation);
    EXPECT_EQ(back.pose.translation, doc.pose.translation);
    EXPECT_EQ(back.pose.rotation, doc.pose.rotation);
    EXPECT_EQ(back.pose.scale, doc.pose.scale);
    EXPECT_EQ(back.bone_names, doc.bone_names);
    EXPECT_EQ(back.original_joint_indices, doc.original_joint_indices);
  }
}

TEST(Pose, Schema) {
  PoseDocument doc;
  doc.pose = PoseState::rest(2);
  doc.bone_names = {"a", "b"};
  doc.original_joint_indices = {1, 0};
  const auto j = nlohmann::json::parse(pose_to_json(doc));
  EXPECT_EQ(j["schema"], "a3syn-pose-v1");
  EXPECT_EQ(j["bones"].size(), 2u);
  EXPECT_EQ(j["bones"][1]["name"], "b");
  EXPECT_EQ(j["bones"][1]["axis_angle"].size(), 3u);
  EXPECT_EQ(j["global"]["scale"], 1.0);
  EXPECT_EQ(j["global"]["translation"].size(), 3u);
  EXPECT_EQ(j["global"]["rotation"].size(), 3u);
  EXPECT_EQ(j["original_joint_indices"], nlohmann::json({1, 0}));

  EXPECT_THROW(pose_from_json("{\"schema\": \"other\"}"), Error);
  EXPECT_THROW(pose_from_json("not json"), Error);
  const auto dir = testing::scratch_dir("assets_pose");
  write_pose(dir / "p.json", doc);
  EXPECT_EQ(read_pose(dir / "p.json").bone_names, doc.bone_names);
  const auto target = read_pose(fixture("worm_target.pose.json"));
  EXPECT_EQ(target.pose.num_bones(), 5u);
}

TEST(Config, DefaultsAndOverrides) {
  const auto c = load_config(fixture("smoke_config.json"));
  EXPECT_EQ(c.per_level, 8);
  EXPECT_EQ(c.image_size, 128);
  EXPECT_EQ(c.mv_rounds, 1);
  EXPECT_EQ(c.gamma_schedule, std::vector<double>{0.8});
  EXPECT_EQ(c.optimizer.epochs_stage1, 60);
  EXPECT_EQ(c.optimizer.lr_scale, 1e-5);
  EXPECT_EQ(c.weights.alpha, 1.2);

  const auto d = config_from_json("{}");
  EXPECT_EQ(d.mv_rounds, 3);
  EXPECT_EQ(d.gamma_schedule, (std::vector<double>{0.8, 0.7, 0.6}));
  EXPECT_EQ(d.weights.loss_threshold, 1000.0);
  EXPECT_EQ(d.weights.pen, 1000.0);
  EXPECT_EQ(d.weights.no_contact, 1000.0);
  EXPECT_EQ(d.weights.rp, 100.0);
  EXPECT_EQ(d.mv_views, 4);
}

TEST(Config, RoundTrip) {
  auto c = load_config(fixture("smoke_config.json"));
  c.anchor = Vec3(0.25, 0.5, -1.0);
  c.weights.rp = 42.0;
  c.seed = 1234567;
  const auto back = config_from_json(config_to_json(c));
  EXPECT_EQ(back.anchor, c.anchor);
  EXPECT_EQ(back.weights.rp, 42.0);
  EXPECT_EQ(back.seed, 1234567u);
  EXPECT_EQ(back.prompt, c.prompt);
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(Config, Rejections) {
  EXPECT_THROW(config_from_json("{\"bogus\": 1}"), ContractViolation);
  EXPECT_THROW(config_from_json("{\"weights\": {\"lambda\": 1}}"), ContractViolation);
  EXPECT_THROW(config_from_json("{\"optimizer\": {\"lr\": 1}}"), ContractViolation);
  EXPECT_THROW(config_from_json("{\"gamma_schedule\": [0.6, 0.8], \"mv_rounds\": 2}"), ContractViolation);
  EXPECT_THROW(config_from_json("{\"gamma_schedule\": [1.5]}"), ContractViolation);
  EXPECT_THROW(config_from_json("{\"mv_views\": 0}"), ContractViolation);
  EXPECT_THROW(config_from_json("{\"per_level\": \"many\"}"), ContractViolation);
  EXPECT_THROW(config_from_json("{\"optimizer\": {\"lr_scale\": 0}}"), ContractViolation);
}

TEST(RigPackage, JsonRoundTrip) {
  const auto pkg = load_rig(fixture("quadruped.glb"));
  const auto report = verify_rig(pkg);
  const auto text = rig_package_to_json(pkg, report);
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j["schema"], "a3syn-rig-v1");
  EXPECT_TRUE(j.contains("verification"));

  const auto dir = testing::scratch_dir("assets_rig");
  write_file(dir / "rig.json", text);
  const auto back = load_rig_any(dir / "rig.json");
  EXPECT_EQ(back.rig.num_bones(), pkg.rig.num_bones());
  EXPECT_EQ(back.original_joint_indices, pkg.original_joint_indices);
  EXPECT_EQ(back.source_sha256, pkg.source_sha256);
  ASSERT_TRUE(back.limits.has_value());
  EXPECT_EQ(back.limits->upper, pkg.limits->upper);
  EXPECT_LT((back.rig.weights - pkg.rig.weights).cwiseAbs().maxCoeff(), 1e-15);

  std::mt19937_64 rng(12);
  PoseState pose = PoseState::rest(pkg.rig.num_bones());
  pose.articulation = testing::random_articulation(rng, pkg.rig.num_bones(), 0.6);
  const auto a = skin_vertices(pkg.rig, pose);
  const auto b = skin_vertices(back.rig, pose);
  for (std::size_t v = 0; v < a.size(); ++v) EXPECT_EQ(a[v], b[v]);
  EXPECT_TRUE(verify_rig(back).passed());

  EXPECT_EQ(load_rig_any(fixture("worm.gltf")).rig.num_bones(), 5u);
}

}  // namespace
}  // namespace a3syn
