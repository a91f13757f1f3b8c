#include <gtest/gtest.h>

#include "entrokeys/discoverer.hpp"
#include "entrokeys/metrics.hpp"
#include "entrokeys/synth.hpp"
#include "entrokeys/trajectory.hpp"

using namespace entrokeys;

namespace {

DiscoveryConfig small_config(int k, std::uint64_t seed) {
  DiscoveryConfig c;
  c.num_keypoints = k;
  c.seed = seed;
  c.iterations = 150;
  return c;
}

}  // namespace

TEST(Discover, BlankVideoKeepsAtMostOneActive) {
  const std::vector<Frame> frames(4, Frame(48, 48, 0.5));
  const Trajectory tr = discover(frames, small_config(5, 1));
  ASSERT_EQ(tr.frames.size(), 4u);
  EXPECT_TRUE(tr.degenerate);
  for (std::size_t t = 0; t < tr.frames.size(); ++t) {
    EXPECT_LE(tr.active_count(t), 1u) << t;
    for (const auto& k : tr.frames[t].keypoints) {
      EXPECT_TRUE(std::isfinite(k.x));
      EXPECT_TRUE(std::isfinite(k.y));
    }
  }
}

TEST(Discover, StaticDiscIsCovered) {
  SceneSpec s;
  s.width = 64;
  s.height = 64;
  s.frames = 3;
  s.objects = {disc(32, 30, 8)};
  const RenderedScene r = render(s);
  const Trajectory tr = discover(r.frames, small_config(3, 4));
  for (const auto& f : tr.frames) {
    EXPECT_LE(f.loss.me, 0.3) << f.frame;
    EXPECT_FALSE(f.loss.degenerate_me);
  }
  const MetricsReport m = evaluate_metrics(tr, r.masks);
  EXPECT_EQ(*m.dop, 1.0);
}

TEST(Discover, MovingObjectKeepsItsKeypoint) {
  SceneSpec s;
  s.width = 72;
  s.height = 56;
  s.frames = 12;
  s.objects = {disc(18, 28, 8, 2.0, 0.0)};
  const RenderedScene r = render(s);
  const Trajectory tr = discover(r.frames, small_config(3, 2));
  const MetricsReport m = evaluate_metrics(tr, r.masks);
  EXPECT_GE(*m.top, 0.9);
  EXPECT_GE(*m.dop, 0.9);
}

TEST(Discover, SameSeedSameTrajectory) {
  const RenderedScene r = render(preset("static3"));
  DiscoveryConfig c = small_config(4, 9);
  const std::string a = to_jsonl(discover(r.frames, c));
  c.threads = 3;
  EXPECT_EQ(to_jsonl(discover(r.frames, c)), a);
}

TEST(Discover, KeypointsStayInsideImage) {
  const RenderedScene r = render(preset("comeandgo"));
  std::vector<Frame> frames(r.frames.begin(), r.frames.begin() + 12);
  const Trajectory tr = discover(frames, small_config(4, 3));
  for (const auto& f : tr.frames) {
    ASSERT_EQ(f.keypoints.size(), 4u);
    for (const auto& k : f.keypoints) {
      EXPECT_GE(k.x, 0.0);
      EXPECT_LE(k.x, frames[0].width() - 1.0);
      EXPECT_GE(k.y, 0.0);
      EXPECT_LE(k.y, frames[0].height() - 1.0);
      EXPECT_EQ(k.active, k.status > 0.5);
    }
  }
}

TEST(Discover, RejectsBadConfig) {
  const std::vector<Frame> frames(2, Frame(32, 32, 0.5));
  DiscoveryConfig c;
  c.num_keypoints = 0;
  EXPECT_THROW(discover(frames, c), ValidationError);
  EXPECT_THROW(discover({}, DiscoveryConfig{}), ValidationError);
  std::vector<Frame> mixed{Frame(32, 32), Frame(30, 32)};
  EXPECT_THROW(discover(mixed, DiscoveryConfig{}), ValidationError);
}
