#include <random>

#include <gtest/gtest.h>

#include "a3syn/rig.hpp"
#include "a3syn/so3.hpp"
#include "test_support.hpp"

namespace a3syn {
namespace {

using testing::make_chain_rig;
using testing::make_random_rig;
using testing::random_articulation;
using testing::reference_skin;

Skeleton tree_of(const std::vector<std::optional<std::size_t>>& parents) {
  std::vector<Bone> bones;
  for (const auto& p : parents) {
    Bone b;
    b.parent = p;
    bones.push_back(b);
  }
  return Skeleton(bones);
}

TEST(Skeleton, RejectsParentAfterChild) {
  std::vector<Bone> bones(2);
  bones[0].parent = 1;
  EXPECT_THROW(Skeleton{bones}, ContractViolation);
}

TEST(Skeleton, HierarchyLevels) {
  EXPECT_EQ(hierarchy_levels(tree_of({std::nullopt})).levels, (std::vector<int>{0}));
  EXPECT_EQ(hierarchy_levels(tree_of({std::nullopt, 0, 1, 2})).levels, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(hierarchy_levels(tree_of({std::nullopt, 0, 0, 1, 1, 2, 2})).levels,
            (std::vector<int>{0, 1, 1, 2, 2, 2, 2}));
}

TEST(Skeleton, Descendants) {
  const auto sk = tree_of({std::nullopt, 0, 0, 1});
  EXPECT_TRUE(sk.is_descendant(3, 1));
  EXPECT_TRUE(sk.is_descendant(3, 0));
  EXPECT_FALSE(sk.is_descendant(3, 2));
  EXPECT_TRUE(sk.is_descendant(2, 2));
}

TEST(Skinning, RestPoseReproducesVertices) {
  const auto rig = make_chain_rig(4);
  const auto posed = skin_vertices(rig, PoseState::rest(rig.num_bones()));
  for (std::size_t v = 0; v < posed.size(); ++v) EXPECT_LT((posed[v] - rig.vertices[v]).norm(), 1e-12);
}

TEST(Skinning, MatchesBruteForceOracle) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto rig = make_random_rig(rng, 10, 200);
    PoseState pose = PoseState::rest(rig.num_bones());
    pose.articulation = random_articulation(rng, rig.num_bones(), 2.5);
    pose.translation = Vec3(u(rng), u(rng), u(rng));
    pose.rotation = Vec3(u(rng), u(rng), u(rng));
    pose.scale = 0.5 + std::abs(u(rng));
    const auto fast = skin_vertices(rig, pose);
    const auto slow = reference_skin(rig, pose);
    for (std::size_t v = 0; v < fast.size(); ++v) ASSERT_LT((fast[v] - slow[v]).norm(), 1e-9);
  }
}

TEST(Skinning, SingleBoneQuarterTurn) {
  auto rig = make_chain_rig(1);
  PoseState pose = PoseState::rest(1);
  pose.articulation.row(0) = Vec3(0, 0, 1.5707963267948966).transpose();
  const auto posed = skin_vertices(rig, pose);
  for (std::size_t v = 0; v < posed.size(); ++v) {
    const Vec3& x = rig.vertices[v];
    EXPECT_LT((posed[v] - Vec3(-x.y(), x.x(), x.z())).norm(), 1e-12);
  }
}

TEST(Skinning, GlobalTransformIsSimilarity) {
  const auto rig = make_chain_rig(3);
  PoseState pose = PoseState::rest(3, Vec3(1, 2, 3));
  pose.rotation = Vec3(0.1, 0.2, -0.3);
  pose.scale = 2.0;
  const auto posed = skin_vertices(rig, pose);
  const Mat3 r = axis_angle_to_matrix(pose.rotation);
  for (std::size_t v = 0; v < posed.size(); ++v) {
    EXPECT_LT((posed[v] - (2.0 * r * rig.vertices[v] + Vec3(1, 2, 3))).norm(), 1e-12);
  }
}

TEST(Skinning, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const auto rig = make_random_rig(rng, 6, 40);
    PoseState pose = PoseState::rest(rig.num_bones(), Vec3(u(rng), u(rng), u(rng)));
    pose.articulation = random_articulation(rng, rig.num_bones(), 1.0);
    pose.rotation = Vec3(u(rng), u(rng), u(rng)) * 0.5;
    pose.scale = 1.3;
    std::vector<Vec3> g(rig.num_vertices());
    for (auto& x : g) x = Vec3(u(rng), u(rng), u(rng));
    const auto f = [&](const PoseState& p) {
      const auto y = skin_vertices(rig, p);
      double s = 0.0;
      for (std::size_t v = 0; v < y.size(); ++v) s += g[v].dot(y[v]);
      return s;
    };
    const auto fwd = skin_forward(rig, pose);
    const auto grad = skin_backward(rig, pose, fwd, g);
    const double h = 1e-6;
    for (Eigen::Index b = 0; b < pose.articulation.rows(); ++b) {
      for (int k = 0; k < 3; ++k) {
        PoseState a = pose, c = pose;
        a.articulation(b, k) += h;
        c.articulation(b, k) -= h;
        EXPECT_NEAR(grad.articulation(b, k), (f(a) - f(c)) / (2 * h), 1e-6);
      }
    }
    for (int k = 0; k < 3; ++k) {
      PoseState a = pose, c = pose;
      a.translation[k] += h;
      c.translation[k] -= h;
      EXPECT_NEAR(grad.translation[k], (f(a) - f(c)) / (2 * h), 1e-6);
      a = pose;
      c = pose;
      a.rotation[k] += h;
      c.rotation[k] -= h;
      EXPECT_NEAR(grad.rotation[k], (f(a) - f(c)) / (2 * h), 1e-6);
    }
    PoseState a = pose, c = pose;
    a.scale += h;
    c.scale -= h;
    EXPECT_NEAR(grad.scale, (f(a) - f(c)) / (2 * h), 1e-6);
  }
}

TEST(Attribution, LargestWeightWithLowIndexTies) {
  Eigen::MatrixXd w(3, 3);
  w << 0.2, 0.5, 0.3,  //
      0.5, 0.5, 0.0,   //
      0.0, 0.0, 1.0;
  EXPECT_EQ(attribute_vertices_to_bones(w), (std::vector<std::size_t>{1, 0, 2}));
}

TEST(Rig, ValidateRejectsBadRows) {
  auto rig = make_chain_rig(2);
  rig.weights(0, 0) += 0.1;
  EXPECT_THROW(rig.validate(), ContractViolation);
}

TEST(Rig, BoundingSphereContainsPoints) {
  const auto rig = make_chain_rig(4);
  const auto s = bounding_sphere(rig.vertices);
  for (const auto& v : rig.vertices) EXPECT_LE((v - s.center).norm(), s.radius + 1e-12);
  EXPECT_NEAR(s.center.y(), 0.5, 1e-12);
}

TEST(Rig, BoneOriginsFollowChain) {
  const auto rig = make_chain_rig(3, 0.25);
  PoseState pose = PoseState::rest(3, Vec3(1, 0, 0));
  const auto origins = bone_origins(rig, pose);
  ASSERT_EQ(origins.size(), 3u);
  EXPECT_LT((origins[2] - Vec3(1, 0.5, 0)).norm(), 1e-12);
}

}  // namespace
}  // namespace a3syn
