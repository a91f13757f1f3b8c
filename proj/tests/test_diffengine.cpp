#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "entrokeys/diffengine.hpp"
#include "entrokeys/gradcheck.hpp"

using namespace entrokeys;

namespace {

EntropyMap blob_entropy(int w, int h, double cx, double cy, double r, double value) {
  EntropyMap m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m(x, y) = ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) ? value : 0.0;
  }
  return m;
}

/// Loss assembled from the loss module on full-canvas heatmaps.
double reference_total(const EntropyMap& ht, const EntropyMap* hp, const EntropyMap* hc, const KeypointState& cur,
                       const KeypointState* prev, const LossWeights& w, const HeatmapParams& p) {
  const int W = ht.width();
  const int H = ht.height();
  std::vector<Heatmap> hm;
  std::vector<GaussianField> gs;
  std::vector<double> s;
  for (const auto& k : cur) {
    hm.push_back(keypoint_heatmap(k, p, W, H));
    const Point c = clamp_to_image({k.x, k.y}, W, H);
    gs.push_back(gaussian_field(c.x, c.y, p.sigma, W, H));
    s.push_back(k.status());
  }
  const AggregatedMask m = aggregate_mask(hm, s);
  LossComponents c;
  c.me = masked_entropy_loss(ht, m).value;
  c.overlap = overlap_loss(gs, w.beta);
  c.status = status_loss(s);
  if (hp != nullptr) {
    c.mce = masked_conditional_entropy_loss(*hc, m).value;
    std::vector<Heatmap> hm_prev;
    for (const auto& k : *prev) hm_prev.push_back(keypoint_heatmap(k, p, W, H));
    c.it = information_transport_loss(ht, *hp, *hc, cur, *prev, hm, hm_prev, w, heatmap_area(p)).total;
  }
  return mint_loss(c, w).total;
}

}  // namespace

TEST(Flatten, RoundTrip) {
  const KeypointState k{{1, 2, 3}, {4, 5, 6}};
  const auto f = flatten(k);
  EXPECT_EQ(f, (std::vector<double>{1, 2, 3, 4, 5, 6}));
  const KeypointState back = unflatten(f);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].status_logit, 6.0);
  EXPECT_THROW(unflatten(std::vector<double>{1, 2}), ValidationError);
}

TEST(MintObjective, LossMatchesLossModule) {
  const int w = 48;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  EntropyMap ht(w, w);
  EntropyMap hp(w, w);
  for (std::size_t i = 0; i < ht.size(); ++i) {
    ht[i] = u(rng);
    hp[i] = u(rng);
  }
  const EntropyMap hc = conditional_entropy(ht, hp);
  const LossWeights lw;
  const HeatmapParams p{6.0, 0.1, 3.5};
  const KeypointState cur{{10.2, 12.7, 1.5}, {30.5, 33.1, -0.5}, {47.5, 2.0, 0.3}, {-3.0, 20.0, 2.0}};
  const KeypointState prev{{11.0, 12.0, 0.5}, {28.0, 35.0, 1.0}, {44.0, 5.0, -1.0}, {1.0, 21.0, 0.0}};
  const MintObjective pair(ht, hp, hc, lw, p);
  EXPECT_NEAR(pair.evaluate(cur, &prev, GradientScope::kNone).loss.total,
              reference_total(ht, &hp, &hc, cur, &prev, lw, p), 1e-9);
  const MintObjective single(ht, lw, p);
  EXPECT_NEAR(single.evaluate(cur, nullptr, GradientScope::kNone).loss.total,
              reference_total(ht, nullptr, nullptr, cur, nullptr, lw, p), 1e-9);
}

TEST(MintObjective, PairModeRequiresPrevious) {
  const EntropyMap h(32, 32, 1.0);
  const MintObjective pair(h, h, EntropyMap(32, 32), LossWeights{}, HeatmapParams{});
  const KeypointState k{{5, 5, 0}};
  EXPECT_THROW(pair.evaluate(k, nullptr, GradientScope::kCurrent), ValidationError);
  const KeypointState bad{{std::nan(""), 5, 0}};
  EXPECT_THROW(pair.evaluate(bad, &k, GradientScope::kCurrent), ValidationError);
}

TEST(MintObjective, SaturatedStatusesHaveNoLogitGradient) {
  GradcheckCase c = make_gradcheck_case(5);
  for (std::size_t i = 0; i < c.cur.size(); ++i) {
    c.cur[i].status_logit = (i % 2 == 0) ? 25.0 : -25.0;
    c.prev[i].status_logit = (i % 2 == 0) ? -30.0 : 30.0;
  }
  const Evaluation e = c.objective.evaluate(c.cur, &c.prev, GradientScope::kPair);
  for (std::size_t i = 2; i < e.gradient.size(); i += 3) EXPECT_LT(std::abs(e.gradient[i]), 1e-6) << i;
}

TEST(MintObjective, MovementOnlyGradient) {
  const EntropyMap zero(40, 40);
  LossWeights w;
  w.lambda_me = w.lambda_mce = w.lambda_o = w.lambda_s = 0.0;
  w.lambda_it = 1.0;
  w.m_d = 0.7;
  const MintObjective obj(zero, zero, zero, w, HeatmapParams{});
  const KeypointState prev{{10, 10, 0}};
  const KeypointState cur{{13, 14, 0}};
  const Evaluation e = obj.evaluate(cur, &prev, GradientScope::kPair);
  ASSERT_EQ(e.gradient.size(), 6u);
  EXPECT_NEAR(e.gradient[3], 2 * 0.7 * 3, 1e-12);
  EXPECT_NEAR(e.gradient[4], 2 * 0.7 * 4, 1e-12);
  EXPECT_NEAR(e.gradient[0], -2 * 0.7 * 3, 1e-12);
  EXPECT_NEAR(e.gradient[1], -2 * 0.7 * 4, 1e-12);
  EXPECT_NEAR(e.loss.it, 0.7 * 25, 1e-12);
}

TEST(MintObjective, FarKeypointOnlyFeelsMovement) {
  const int w = 96;
  const EntropyMap ht = blob_entropy(w, w, 15, 15, 6, 2.0);
  const EntropyMap hp = blob_entropy(w, w, 16, 15, 6, 2.0);
  const EntropyMap hc = conditional_entropy(ht, hp);
  LossWeights lw;
  lw.lambda_o = 0.0;
  const MintObjective obj(ht, hp, hc, lw, HeatmapParams{});
  const KeypointState prev{{15, 15, 1.0}, {70, 72, 0.5}};
  const KeypointState cur{{15.5, 15, 1.0}, {72, 75, 0.5}};
  const Evaluation e = obj.evaluate(cur, &prev, GradientScope::kCurrent);
  ASSERT_EQ(e.gradient.size(), 6u);
  EXPECT_NEAR(e.gradient[3], lw.lambda_it * 2 * lw.m_d * 2, 1e-9);
  EXPECT_NEAR(e.gradient[4], lw.lambda_it * 2 * lw.m_d * 3, 1e-9);
}

TEST(MintObjective, CurrentScopeIsTailOfPairScope) {
  GradcheckCase c = make_gradcheck_case(8);
  const Evaluation pair = c.objective.evaluate(c.cur, &c.prev, GradientScope::kPair);
  const Evaluation cur = c.objective.evaluate(c.cur, &c.prev, GradientScope::kCurrent);
  const std::size_t n = cur.gradient.size();
  ASSERT_EQ(pair.gradient.size(), 2 * n);
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(cur.gradient[i], pair.gradient[n + i]);
  EXPECT_EQ(pair.loss.total, cur.loss.total);
}

TEST(FiniteDiff, QuadraticIsExact) {
  const std::vector<double> x{0.3, -1.2, 2.5, 4.0};
  const std::vector<double> a{1.5, 2.0, -0.5, 3.0};
  auto f = [&](const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += a[i] * p[i] * p[i] + (i + 1.0) * p[i];
    return s;
  };
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = 2 * a[i] * x[i] + (i + 1.0);
  const GradientReport r = finite_diff_check(x, g, 1e-3, f);
  EXPECT_EQ(r.checked, x.size());
  EXPECT_LT(r.max_relative_error, 1e-9);
  EXPECT_TRUE(r.passed(1e-4));
}

TEST(FiniteDiff, MaxErrorIgnoresFlaggedEntries) {
  const std::vector<double> x{0.0, 1.0, 2.0};
  const std::vector<double> wrong{5.0, 1.0, 1.0};
  auto f = [](const std::vector<double>& p) {
    // |p0| has a kink at the evaluation point; the signature reports it.
    return Probe{std::abs(p[0]) + p[1] + p[2], p[0] > 0.0 ? 1u : 0u};
  };
  std::vector<double> steps(3, 1e-3);
  const GradientReport r = finite_diff_check(f, x, wrong, steps);
  EXPECT_TRUE(r.flagged[0]);
  EXPECT_FALSE(r.flagged[1]);
  EXPECT_EQ(r.checked, 2u);
  double worst = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!r.flagged[i]) worst = std::max(worst, r.relative_error[i]);
  }
  EXPECT_EQ(r.max_relative_error, worst);
  EXPECT_LT(r.max_relative_error, 1e-9);
}

TEST(FiniteDiff, LengthMismatchRejected) {
  const std::vector<double> x{1.0, 2.0};
  const std::vector<double> g{1.0};
  EXPECT_THROW(finite_diff_check(x, g, 1e-3, [](const std::vector<double>&) { return 0.0; }), ValidationError);
}

TEST(CheckObjective, RandomPairsAgree) {
  for (std::uint64_t seed = 100; seed < 104; ++seed) {
    GradcheckCase c = make_gradcheck_case(seed);
    const GradientReport r = check_objective(c.objective, c.prev, c.cur);
    EXPECT_TRUE(r.passed(1e-4)) << seed << " " << r.max_relative_error << " checked " << r.checked;
    EXPECT_GE(r.checked, r.analytic.size() / 3) << seed;
  }
}

TEST(CheckObjective, SingleFrameAgrees) {
  GradcheckCase c = make_gradcheck_case(21);
  const EntropyMap h = blob_entropy(64, 64, 30, 30, 12, 1.5);
  const MintObjective single(h, LossWeights{}, HeatmapParams{});
  const GradientReport r = check_objective(single, {}, c.cur);
  EXPECT_TRUE(r.passed(1e-4)) << r.max_relative_error;
}

TEST(CheckObjective, LiteralOverlapFormAgrees) {
  const int w = 64;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 2.5);
  EntropyMap ht(w, w);
  EntropyMap hp(w, w);
  for (std::size_t i = 0; i < ht.size(); ++i) {
    ht[i] = u(rng);
    hp[i] = u(rng);
  }
  const MintObjective obj(ht, hp, conditional_entropy(ht, hp), LossWeights{}, HeatmapParams{}, OverlapForm::kLiteral);
  const KeypointState prev{{20.3, 22.1, 0.4}, {40.7, 35.2, -0.3}, {30.1, 50.6, 1.1}};
  const KeypointState cur{{21.4, 23.9, 0.2}, {38.2, 36.6, 0.8}, {31.3, 48.8, -0.6}};
  const GradientReport r = check_objective(obj, prev, cur);
  EXPECT_TRUE(r.passed(1e-4)) << r.max_relative_error;
}
