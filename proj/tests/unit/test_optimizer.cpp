#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "a3syn/optimizer.hpp"
#include "test_support.hpp"

namespace a3syn {
namespace {

// (x - 3)^2 on translation.x.
class Quadratic : public GradientSource {
 public:
  Evaluation evaluate(const PoseState& pose) override {
    Evaluation e;
    const double d = pose.translation.x() - 3.0;
    e.loss.total = d * d;
    e.gradient = PoseGradient::zero(static_cast<std::size_t>(pose.articulation.rows()));
    e.gradient.translation.x() = 2.0 * d;
    return e;
  }
};

class Zero : public GradientSource {
 public:
  Evaluation evaluate(const PoseState& pose) override {
    Evaluation e;
    e.gradient = PoseGradient::zero(static_cast<std::size_t>(pose.articulation.rows()));
    return e;
  }
};

class Objective : public GradientSource {
 public:
  explicit Objective(const ObjectiveContext& ctx) : ctx_(ctx) {}
  Evaluation evaluate(const PoseState& pose) override { return evaluate_objective(ctx_, pose); }

 private:
  const ObjectiveContext& ctx_;
};

OptimizerConfig plain(double lr) {
  OptimizerConfig c;
  c.adaptive_moments = false;
  c.lr_articulation = c.lr_translation = c.lr_rotation = lr;
  return c;
}

TEST(RunStage, QuadraticConverges) {
  Quadratic q;
  const auto r = run_stage(PoseState::rest(2), q, plain(0.1), 200);
  EXPECT_NEAR(r.pose.translation.x(), 3.0, 1e-3);
  ASSERT_EQ(r.trace.records.size(), 200u);
  // Closed form: x_k = 3 - 3 * 0.8^k.
  EXPECT_NEAR(r.trace.records[10].loss.total, std::pow(3.0 * std::pow(0.8, 10), 2), 1e-12);
}

TEST(RunStage, ZeroGradientLeavesStateUnchanged) {
  Zero z;
  std::mt19937_64 rng(4);
  PoseState p = PoseState::rest(3, Vec3(0.1, 0.2, 0.3));
  p.articulation = testing::random_articulation(rng, 3, 0.5);
  p.rotation = Vec3(0.1, -0.2, 0.05);
  p.scale = 1.3;
  for (bool adam : {true, false}) {
    OptimizerConfig c;
    c.adaptive_moments = adam;
    const auto r = run_stage(p, z, c, 57);
    EXPECT_EQ(r.pose.articulation, p.articulation);
    EXPECT_EQ(r.pose.translation, p.translation);
    EXPECT_EQ(r.pose.rotation, p.rotation);
    EXPECT_EQ(r.pose.scale, p.scale);
  }
}

TEST(RunStage, PlainDescentIsMonotoneAtSmallRate) {
  std::mt19937_64 rng(9);
  const auto f = testing::random_objective(rng, Stage::kSingleView, false);
  ObjectiveContext ctx = f.context;
  ctx.sdf = nullptr;
  Objective src(ctx);
  OptimizerConfig c = plain(1e-3);
  c.lr_articulation = c.lr_rotation = 1e-6;
  c.lr_translation = 1e-5;
  c.lr_scale = 1e-7;
  const auto r = run_stage(f.pose, src, c, 50);
  for (std::size_t i = 1; i < r.trace.records.size(); ++i) {
    EXPECT_LE(r.trace.records[i].loss.total, r.trace.records[i - 1].loss.total * (1.0 + 1e-12));
  }
}

TEST(RunStage, ScaleStaysPositive) {
  class PushScale : public GradientSource {
   public:
    Evaluation evaluate(const PoseState& pose) override {
      Evaluation e;
      e.gradient = PoseGradient::zero(static_cast<std::size_t>(pose.articulation.rows()));
      e.gradient.scale = 1e3;
      return e;
    }
  } src;
  OptimizerConfig c = plain(1e-2);
  c.lr_scale = 1e-3;
  const auto r = run_stage(PoseState::rest(1), src, c, 100);
  EXPECT_GT(r.pose.scale, 0.0);
  EXPECT_LT(r.pose.scale, 1.0);
}

TEST(RunStage, DeterministicTraces) {
  std::mt19937_64 rng(10);
  const auto f = testing::random_objective(rng, Stage::kSingleView, true);
  Objective a(f.context), b(f.context);
  const auto ra = run_stage(f.pose, a, OptimizerConfig{}, 40);
  const auto rb = run_stage(f.pose, b, OptimizerConfig{}, 40);
  std::ostringstream ja, jb;
  ra.trace.write_jsonl(ja);
  rb.trace.write_jsonl(jb);
  EXPECT_EQ(ja.str(), jb.str());
  EXPECT_EQ(ra.pose.articulation, rb.pose.articulation);
}

TEST(RunStage, NonFiniteGradientAbortsWithTrace) {
  class Breaks : public GradientSource {
   public:
    Evaluation evaluate(const PoseState& pose) override {
      Evaluation e;
      e.gradient = PoseGradient::zero(static_cast<std::size_t>(pose.articulation.rows()));
      if (++calls_ == 4) e.gradient.translation.y() = std::numeric_limits<double>::quiet_NaN();
      return e;
    }
    int calls_ = 0;
  } src;
  try {
    run_stage(PoseState::rest(1), src, OptimizerConfig{}, 10, nullptr, 7);
    FAIL() << "expected abort";
  } catch (const OptimizationAborted& e) {
    ASSERT_EQ(e.trace().records.size(), 4u);
    EXPECT_EQ(e.trace().records.front().iteration, 7);
    EXPECT_EQ(e.trace().records.back().iteration, 10);
  }
}

TEST(RunStage, RefreshHookAndIterationIndices) {
  class Hooked : public Quadratic {
   public:
    void before_iteration(int iteration, const PoseState&) override { seen.push_back(iteration); }
    std::vector<int> seen;
  } src;
  const auto r = run_stage(PoseState::rest(1), src, OptimizerConfig{}, 5, nullptr, 200);
  EXPECT_EQ(src.seen, (std::vector<int>{200, 201, 202, 203, 204}));
  for (std::size_t i = 0; i < r.trace.records.size(); ++i) EXPECT_EQ(r.trace.records[i].iteration, 200 + int(i));
}

TEST(RunStage, EnforcedLimits) {
  class Spin : public GradientSource {
   public:
    Evaluation evaluate(const PoseState& pose) override {
      Evaluation e;
      e.gradient = PoseGradient::zero(static_cast<std::size_t>(pose.articulation.rows()));
      e.gradient.articulation.setConstant(-1.0);
      return e;
    }
  } src;
  BoneLimits lim{Articulation::Constant(2, 3, -0.2), Articulation::Constant(2, 3, 0.3)};
  OptimizerConfig c = plain(0.1);
  c.enforce_limits = true;
  const auto r = run_stage(PoseState::rest(2), src, c, 20, &lim);
  EXPECT_TRUE((r.pose.articulation.array() == 0.3).all());
  c.enforce_limits = false;
  const auto free = run_stage(PoseState::rest(2), src, c, 20, &lim);
  EXPECT_NEAR(free.pose.articulation(0, 0), 2.0, 1e-12);
}

TEST(RunStage, ConfigValidation) {
  Zero z;
  OptimizerConfig c;
  c.lr_scale = 0.0;
  EXPECT_THROW(run_stage(PoseState::rest(1), z, c, 1), ContractViolation);
  c = OptimizerConfig{};
  c.epochs_stage1 = 0;
  EXPECT_THROW(c.validate(), ContractViolation);
  EXPECT_EQ(OptimizerConfig{}.lr_scale, 1e-5);
  EXPECT_EQ(OptimizerConfig{}.epochs_stage1, 200);
  EXPECT_EQ(OptimizerConfig{}.epochs_stage2, 100);
}

TEST(Clamp, Examples) {
  PoseState p = PoseState::rest(1);
  p.articulation << 0.7, -0.9, 0.1;
  EXPECT_EQ(clamp_constraints(p, nullptr).articulation, p.articulation);
  BoneLimits lim{Articulation::Constant(1, 3, -0.5), Articulation::Constant(1, 3, 0.5)};
  const auto c = clamp_constraints(p, &lim);
  EXPECT_EQ(c.articulation(0, 0), 0.5);
  EXPECT_EQ(c.articulation(0, 1), -0.5);
  EXPECT_EQ(c.articulation(0, 2), 0.1);
}

TEST(Clamp, RandomMatchesElementwiseOracle) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int nb = 1 + static_cast<int>(rng() % 8);
    PoseState p = PoseState::rest(static_cast<std::size_t>(nb));
    BoneLimits lim{Articulation(nb, 3), Articulation(nb, 3)};
    for (int b = 0; b < nb; ++b) {
      for (int k = 0; k < 3; ++k) {
        p.articulation(b, k) = u(rng);
        const double x = u(rng), y = u(rng);
        lim.lower(b, k) = std::min(x, y);
        lim.upper(b, k) = std::max(x, y);
      }
    }
    const auto c = clamp_constraints(p, &lim);
    for (int b = 0; b < nb; ++b) {
      for (int k = 0; k < 3; ++k) {
        double expect = p.articulation(b, k);
        if (expect < lim.lower(b, k)) expect = lim.lower(b, k);
        if (expect > lim.upper(b, k)) expect = lim.upper(b, k);
        EXPECT_EQ(c.articulation(b, k), expect);
      }
    }
  }
}

TEST(Trace, JsonLines) {
  ConvergenceTrace t;
  TraceRecord r;
  r.iteration = 3;
  r.loss.total = 1.5;
  r.loss.bc = 1.0;
  r.bone_degrees = {90.0, 0.0};
  t.records = {r, r};
  t.records[1].iteration = 4;
  std::ostringstream out;
  t.write_jsonl(out);
  std::istringstream in(out.str());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["iteration"], 3 + n);
    EXPECT_EQ(j["total"], 1.5);
    EXPECT_EQ(j["bone_degrees"].size(), 2u);
    for (const char* key : {"bc", "rp", "pen", "no_contact"}) EXPECT_TRUE(j.contains(key));
    ++n;
  }
  EXPECT_EQ(n, 2);
  Articulation a(1, 3);
  a << 0.0, kPi / 2.0, 0.0;
  EXPECT_NEAR(bone_rotation_degrees(a)[0], 90.0, 1e-12);
}

}  // namespace
}  // namespace a3syn
