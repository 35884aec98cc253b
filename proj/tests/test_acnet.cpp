#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "gradcheck.hpp"
#include "navgym/acnet.hpp"

using namespace navgym;
using navgym::testing::random_observation;

TEST(AcNet, DefaultShapes) {
  const NetShape s;
  EXPECT_EQ(s.conv1_len(), 269);
  EXPECT_EQ(s.conv2_len(), 133);
  EXPECT_EQ(s.flat(), 4256);
  EXPECT_EQ(s.dense_in(), 4384);
  const ParamLayout L(s);
  EXPECT_EQ(L.conv1_w.size, 16u * 4 * 9);
  EXPECT_EQ(L.conv2_w.size, 32u * 16 * 5);
  EXPECT_EQ(L.dense_w.size, 4384u * 256);
  EXPECT_EQ(L.policy_w.size, 256u * 7);
  EXPECT_EQ(L.value_w.size, 256u);
  EXPECT_EQ(L.total, 576u + 16 + 2560 + 32 + 4384u * 256 + 256 + 1792 + 7 + 256 + 1);
}

TEST(AcNet, ZeroParamsGiveUniformPolicy) {
  const NetShape s;
  const NetParams<float> p(s);
  Rng rng(1);
  const NetOutput out = forward(p, random_observation(s, rng));
  for (double q : out.policy) EXPECT_NEAR(q, 1.0 / 7.0, 1e-7);
  EXPECT_EQ(out.value, 0.0);
  EXPECT_NEAR(policy_entropy(out.policy), std::log(7.0), 1e-6);
  EXPECT_NEAR(std::log(7.0), 1.9459, 1e-4);
}

TEST(AcNet, InitIsSeededAndUnsaturated) {
  const NetShape s;
  Rng a(5), b(5);
  const auto p = init_params<float>(s, a);
  EXPECT_EQ(p.values, init_params<float>(s, b).values);
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    const NetOutput out = forward(p, random_observation(s, rng));
    EXPECT_NEAR(std::accumulate(out.policy.begin(), out.policy.end(), 0.0), 1.0, 1e-6);
    for (double q : out.policy) {
      EXPECT_GT(q, 0.01);
      EXPECT_LT(q, 0.9);
    }
  }
}

TEST(AcNet, BatchMatchesSingle) {
  const NetShape s;
  Rng rng(7);
  const auto p = init_params<float>(s, rng);
  std::vector<Observation> obs;
  for (int i = 0; i < 9; ++i) obs.push_back(random_observation(s, rng));
  std::vector<const Observation*> ptrs;
  for (const auto& o : obs) ptrs.push_back(&o);
  const auto batch = forward(p, std::span<const Observation* const>(ptrs));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const NetOutput one = forward(p, obs[i]);
    for (int k = 0; k < 7; ++k) EXPECT_NEAR(batch[i].policy[k], one.policy[k], 1e-6);
    EXPECT_NEAR(batch[i].value, one.value, 1e-6);
  }
}

TEST(AcNet, ForwardDeterministic) {
  const NetShape s;
  Rng rng(8);
  const auto p = init_params<float>(s, rng);
  const Observation o = random_observation(s, rng);
  const NetOutput a = forward(p, o), b = forward(p, o);
  EXPECT_EQ(a.policy, b.policy);
  EXPECT_EQ(a.value, b.value);
}

TEST(AcNet, ShapeMismatchRejected) {
  const NetShape s;
  const NetParams<float> p(s);
  Observation o;
  o.beams = 100;
  o.scan_stack.assign(400, 0.0f);
  o.bearing_onehot.assign(128, 0.0f);
  EXPECT_THROW(forward(p, o), std::invalid_argument);
}

TEST(AcNet, GradientsMatchFiniteDifferences) {
  Rng rng(2024);
  for (int draw = 0; draw < 10; ++draw) {
    const auto r = navgym::testing::gradient_check(rng);
    EXPECT_LT(r.max_rel_error, 1e-4) << "draw " << draw;
    EXPECT_GT(r.checked, 9 * (r.checked + r.skipped_kinks) / 10);
  }
}

TEST(AcNet, ZeroAdvantageLeavesOnlyEntropyGradient) {
  const NetShape s = navgym::testing::small_shape();
  Rng rng(3);
  const auto p = init_params<double>(s, rng);
  const Observation o = random_observation(s, rng);
  const double v = forward(p, o).value;
  std::vector<TrainingSample> batch{{o, 2, v}};
  NetParams<double> with_entropy, without;
  GradWorkspace<double> ws;
  compute_gradients<double>(p, batch, with_entropy, ws, {0.01, 0.5});
  const Losses l = compute_gradients<double>(p, batch, without, ws, {0.0, 0.5});
  EXPECT_NEAR(l.value, 0.0, 1e-20);
  EXPECT_NEAR(l.policy, 0.0, 1e-20);
  for (double gv : without.values) EXPECT_NEAR(gv, 0.0, 1e-15);
  EXPECT_GT(std::abs(with_entropy.values[p.layout.policy_b.offset]), 0.0);
}

TEST(AcNet, ZeroGradientLeavesParams) {
  const NetShape s = navgym::testing::small_shape();
  Rng rng(1);
  auto p = init_params<float>(s, rng);
  const auto before = p.values;
  OptState opt(p.values.size(), 3e-4);
  apply_update(p, opt, NetParams<float>(s));
  EXPECT_EQ(p.values, before);
  EXPECT_EQ(opt.steps, 1u);
}

TEST(AcNet, RmspropStepApproachesLearningRate) {
  const NetShape s = navgym::testing::small_shape();
  NetParams<float> p(s), g(s);
  std::fill(g.values.begin(), g.values.end(), 0.5f);
  g.values[0] = -0.5f;
  OptState opt(p.values.size(), 3e-4);
  float prev0 = 0.0f, prev1 = 0.0f;
  for (int i = 0; i < 2000; ++i) {
    prev0 = p.values[0];
    prev1 = p.values[1];
    apply_update(p, opt, g);
  }
  EXPECT_NEAR(p.values[0] - prev0, 3e-4, 1e-6);
  EXPECT_NEAR(p.values[1] - prev1, -3e-4, 1e-6);
  for (float a : opt.accum) EXPECT_GE(a, 0.0f);
}

TEST(AcNet, UpdateDeterministic) {
  const NetShape s = navgym::testing::small_shape();
  Rng rng(1);
  auto a = init_params<float>(s, rng);
  auto b = a;
  auto g = init_params<float>(s, rng);
  OptState oa(a.values.size(), 1e-3), ob(b.values.size(), 1e-3);
  for (int i = 0; i < 5; ++i) {
    apply_update(a, oa, g);
    apply_update(b, ob, g);
  }
  EXPECT_EQ(a.values, b.values);
}
