#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "a3syn/correspondence.hpp"

namespace a3syn {
namespace {

void put(FeatureMap& m, int row, int col, std::initializer_list<float> values) {
  std::copy(values.begin(), values.end(), m.at(row, col));
}

void one_hot(FeatureMap& m, int row, int col, int channel, float scale = 1.0f) {
  std::fill(m.at(row, col), m.at(row, col) + m.dim, 0.0f);
  m.at(row, col)[channel] = scale;
}

SemanticMatch brute_force(std::span<const float> q, const FeatureMap& t) {
  double qn = 0.0;
  for (float v : q) qn += double(v) * v;
  SemanticMatch best{0, 0, -2.0};
  for (int r = 0; r < t.height; ++r) {
    for (int c = 0; c < t.width; ++c) {
      double dot = 0.0, tn = 0.0;
      for (int k = 0; k < t.dim; ++k) {
        dot += double(q[k]) * t.at(r, c)[k];
        tn += double(t.at(r, c)[k]) * t.at(r, c)[k];
      }
      if (tn == 0.0) continue;
      const double s = dot / std::sqrt(qn * tn);
      if (s > best.similarity) best = {r, c, s};
    }
  }
  return best;
}

TEST(Matching, UniqueExactPixel) {
  FeatureMap t(3, 4, 3);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) put(t, r, c, {0.0f, 1.0f, 0.0f});
  }
  put(t, 2, 1, {1.0f, 0.0f, 0.0f});
  const std::vector<float> q{1.0f, 0.0f, 0.0f};
  const auto m = match_semantic(q, t);
  EXPECT_EQ(m.row, 2);
  EXPECT_EQ(m.col, 1);
  EXPECT_NEAR(m.similarity, 1.0, 1e-7);

  const std::vector<float> scaled{7.0f, 0.0f, 0.0f};
  const auto m7 = match_semantic(scaled, t);
  EXPECT_EQ(m7.row, 2);
  EXPECT_EQ(m7.col, 1);
}

TEST(Matching, RandomMapsMatchBruteForce) {
  std::mt19937_64 rng(12);
  std::normal_distribution<float> n;
  for (int trial = 0; trial < 200; ++trial) {
    FeatureMap t(4, 4, 5);
    for (auto& v : t.data) v = n(rng);
    std::vector<float> q(5);
    for (auto& v : q) v = n(rng);
    const auto fast = match_semantic(q, t);
    const auto slow = brute_force(q, t);
    EXPECT_EQ(fast.row, slow.row);
    EXPECT_EQ(fast.col, slow.col);
    EXPECT_NEAR(fast.similarity, slow.similarity, 1e-6);
  }
}

TEST(Matching, PositivePixelScalingKeepsArgmax) {
  std::mt19937_64 rng(13);
  std::normal_distribution<float> n;
  std::uniform_real_distribution<float> s(0.1f, 10.0f);
  for (int trial = 0; trial < 50; ++trial) {
    FeatureMap t(5, 6, 4);
    for (auto& v : t.data) v = n(rng);
    std::vector<float> q(4);
    for (auto& v : q) v = n(rng);
    FeatureMap scaled = t;
    for (int p = 0; p < 30; ++p) {
      const float k = s(rng);
      for (int c = 0; c < 4; ++c) scaled.data[static_cast<std::size_t>(p) * 4 + c] *= k;
    }
    const auto a = match_semantic(q, t);
    const auto b = match_semantic(q, scaled);
    EXPECT_EQ(a.row, b.row);
    EXPECT_EQ(a.col, b.col);
  }
}

TEST(Matching, TiesResolveInScanOrder) {
  FeatureMap t(2, 2, 2);
  put(t, 0, 0, {0.0f, 1.0f});
  put(t, 0, 1, {1.0f, 0.0f});
  put(t, 1, 0, {1.0f, 0.0f});
  put(t, 1, 1, {2.0f, 0.0f});
  const std::vector<float> q{1.0f, 0.0f};
  const auto m = match_semantic(q, t);
  EXPECT_EQ(m.row, 0);
  EXPECT_EQ(m.col, 1);
}

TEST(Matching, DegenerateInputs) {
  FeatureMap t(2, 2, 2, 1.0f);
  const std::vector<float> zero{0.0f, 0.0f};
  EXPECT_THROW(match_semantic(zero, t), DegenerateFeature);
  FeatureMap empty(2, 2, 2, 0.0f);
  const std::vector<float> q{1.0f, 0.0f};
  EXPECT_THROW(match_semantic(q, empty), DegenerateFeature);
  try {
    match_semantic(zero, t);
  } catch (const DegenerateFeature& e) {
    EXPECT_STREQ(e.what(), "degenerate feature");
  }
}

TEST(Upsample, IdentityConstantAndRamp) {
  FeatureMap m(2, 2, 2);
  put(m, 0, 0, {0.0f, 1.0f});
  put(m, 0, 1, {2.0f, 3.0f});
  put(m, 1, 0, {4.0f, 5.0f});
  put(m, 1, 1, {6.0f, 7.0f});
  EXPECT_EQ(upsample_features(m, 2, 2).data, m.data);

  const FeatureMap c = upsample_features(FeatureMap(2, 2, 3, 0.75f), 5, 7);
  for (float v : c.data) EXPECT_FLOAT_EQ(v, 0.75f);

  const FeatureMap up = upsample_features(m, 3, 3);
  EXPECT_FLOAT_EQ(up.at(0, 1)[0], 1.0f);
  EXPECT_FLOAT_EQ(up.at(1, 0)[1], 3.0f);
  EXPECT_FLOAT_EQ(up.at(1, 1)[0], 3.0f);
  EXPECT_FLOAT_EQ(up.at(1, 1)[1], 4.0f);
  EXPECT_FLOAT_EQ(up.at(2, 2)[1], 7.0f);
  EXPECT_THROW(upsample_features(m, 1, 2), ContractViolation);
}

// Raster stub: one visible vertex per entry, rendered features one-hot per vertex.
struct Scenario {
  RasterOutput raster;
  FeatureMap rendered;
  FeatureMap target;
  std::vector<std::size_t> attribution;
};

Scenario scenario(int size, const std::vector<Vec2>& sources, const std::vector<Vec2>& targets,
                  const std::vector<std::size_t>& bones) {
  Scenario s;
  const int dim = static_cast<int>(sources.size()) + 1;
  s.raster.color = RgbImage(size, size);
  s.rendered = FeatureMap(size, size, dim);
  s.target = FeatureMap(size, size, dim);
  for (auto* m : {&s.rendered, &s.target}) {
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) one_hot(*m, r, c, 0);
    }
  }
  for (std::size_t i = 0; i < sources.size(); ++i) {
    s.raster.visible_vertices.push_back({i, sources[i], 1.0});
    one_hot(s.rendered, static_cast<int>(sources[i].y()), static_cast<int>(sources[i].x()), static_cast<int>(i) + 1);
    one_hot(s.target, static_cast<int>(targets[i].y()), static_cast<int>(targets[i].x()), static_cast<int>(i) + 1);
  }
  s.attribution = bones;
  return s;
}

TEST(BoneCorrespondence, SingleVertexPerfectMatch) {
  const auto s = scenario(32, {{5, 7}}, {{20, 11}}, {0});
  const auto set = bone_correspondences(s.raster, s.rendered, s.target, s.attribution, 1);
  ASSERT_TRUE(set.bones[0].valid);
  EXPECT_EQ(set.bones[0].source, Vec2(5, 7));
  EXPECT_EQ(set.bones[0].target, Vec2(20, 11));
  EXPECT_EQ(set.bones[0].vertex_count, 1u);
  EXPECT_EQ(set.n_visible, 1u);
}

TEST(BoneCorrespondence, ThreePointMeanWithoutSigmaFilter) {
  const auto s = scenario(32, {{1, 1}, {2, 1}, {3, 1}}, {{10, 10}, {12, 10}, {11, 13}}, {0, 0, 0});
  CorrespondenceOptions opt;
  opt.sigma_filter = false;
  const auto set = bone_correspondences(s.raster, s.rendered, s.target, s.attribution, 1, opt);
  ASSERT_TRUE(set.bones[0].valid);
  EXPECT_LT((set.bones[0].target - Vec2(11, 11)).norm(), 1e-12);
  EXPECT_LT((set.bones[0].source - Vec2(2, 1)).norm(), 1e-12);
}

TEST(BoneCorrespondence, SigmaFilterDropsOutlier) {
  const auto s =
      scenario(128, {{1, 1}, {2, 1}, {3, 1}, {4, 1}}, {{10, 10}, {12, 10}, {11, 13}, {100, 100}}, {0, 0, 0, 0});
  const auto set = bone_correspondences(s.raster, s.rendered, s.target, s.attribution, 1);
  ASSERT_TRUE(set.bones[0].valid);
  EXPECT_EQ(set.bones[0].vertex_count, 3u);
  EXPECT_LT((set.bones[0].target - Vec2(11, 11)).norm(), 1e-12);
  EXPECT_LT((set.bones[0].source - Vec2(2, 1)).norm(), 1e-12);
}

TEST(BoneCorrespondence, SigmaFilterOnThreePointsDropsFarthest) {
  // With the filter on, (11,13) lies 2 px from the mean while sigma is sqrt(8/3).
  const auto s = scenario(32, {{1, 1}, {2, 1}, {3, 1}}, {{10, 10}, {12, 10}, {11, 13}}, {0, 0, 0});
  const auto set = bone_correspondences(s.raster, s.rendered, s.target, s.attribution, 1);
  EXPECT_EQ(set.bones[0].vertex_count, 2u);
  EXPECT_LT((set.bones[0].target - Vec2(11, 10)).norm(), 1e-12);
}

TEST(BoneCorrespondence, ThresholdAndInvisibleBones) {
  auto s = scenario(32, {{1, 1}, {2, 2}}, {{10, 10}, {20, 20}}, {0, 1});
  // Vertex 1's code now matches nothing strongly: mix it with the background.
  std::fill(s.rendered.at(2, 2), s.rendered.at(2, 2) + s.rendered.dim, 0.0f);
  s.rendered.at(2, 2)[0] = 1.0f;
  s.rendered.at(2, 2)[2] = 0.2f;
  s.target.at(20, 20)[0] = 0.0f;
  CorrespondenceOptions opt;
  opt.similarity_threshold = 0.99;
  const auto set = bone_correspondences(s.raster, s.rendered, s.target, s.attribution, 3, opt);
  EXPECT_TRUE(set.bones[0].valid);
  EXPECT_EQ(set.bones[1].valid, false);
  EXPECT_EQ(set.bones[2].valid, false);
  EXPECT_EQ(set.n_visible, 1u);
}

TEST(BoneCorrespondence, CentroidsInsideHullAndDeterministic) {
  std::mt19937_64 rng(21);
  std::vector<int> cells(64 * 64);
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(cells.begin(), cells.end(), rng);
  std::vector<Vec2> src, tgt;
  std::vector<std::size_t> bones;
  for (int i = 0; i < 40; ++i) {
    src.emplace_back(cells[i] % 64, cells[i] / 64);
    tgt.emplace_back(cells[40 + i] % 64, cells[40 + i] / 64);
    bones.push_back(static_cast<std::size_t>(i % 3));
  }
  const auto s = scenario(64, src, tgt, bones);
  CorrespondenceOptions opt;
  opt.sigma_filter = false;
  const auto a = bone_correspondences(s.raster, s.rendered, s.target, s.attribution, 3, opt);
  const auto b = bone_correspondences(s.raster, s.rendered, s.target, s.attribution, 3, opt);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(a.bones[k].source, b.bones[k].source);
    EXPECT_EQ(a.bones[k].target, b.bones[k].target);
    Vec2 mean_src = Vec2::Zero(), mean_tgt = Vec2::Zero();
    int n = 0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (bones[i] != k) continue;
      mean_src += src[i];
      mean_tgt += tgt[i];
      ++n;
    }
    ASSERT_GT(n, 0);
    EXPECT_LT((a.bones[k].source - mean_src / n).norm(), 1e-12);
    EXPECT_LT((a.bones[k].target - mean_tgt / n).norm(), 1e-12);
  }
}

TEST(BoneCorrespondence, MeanCentroidError) {
  CorrespondenceSet set;
  set.bones.resize(3);
  set.bones[0] = {0, Vec2(0, 0), Vec2(3, 4), 1, true, {}};
  set.bones[1] = {1, Vec2(1, 1), Vec2(1, 2), 1, true, {}};
  EXPECT_DOUBLE_EQ(mean_centroid_error(set), 3.0);
}

}  // namespace
}  // namespace a3syn
