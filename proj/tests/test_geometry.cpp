#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "entrokeys/geometry.hpp"

using namespace entrokeys;

TEST(SoftArgmax, UniformMapGivesCenter) {
  const Point p = soft_argmax(FeatureMap(64, 48, 0.3));
  EXPECT_NEAR(p.x, 31.5, 1e-12);
  EXPECT_NEAR(p.y, 23.5, 1e-12);
}

TEST(SoftArgmax, SharpPeak) {
  FeatureMap f(64, 64);
  f(20, 10) = 50.0;
  const Point p = soft_argmax(f);
  EXPECT_NEAR(p.x, 20.0, 0.01);
  EXPECT_NEAR(p.y, 10.0, 0.01);
}

TEST(SoftArgmax, TranslationEquivariantAwayFromBorders) {
  FeatureMap a(64, 64);
  FeatureMap b(64, 64);
  for (int dy = -2; dy <= 2; ++dy) {
    for (int dx = -2; dx <= 2; ++dx) {
      const double v = 40.0 - 3.0 * (dx * dx + dy * dy) + 0.5 * dx;
      a(30 + dx, 30 + dy) = v;
      b(35 + dx, 27 + dy) = v;
    }
  }
  const Point pa = soft_argmax(a);
  const Point pb = soft_argmax(b);
  EXPECT_NEAR(pb.x - pa.x, 5.0, 1e-9);
  EXPECT_NEAR(pb.y - pa.y, -3.0, 1e-9);
}

TEST(SoftArgmax, HugeValuesStayFinite) {
  FeatureMap f(8, 8, -1e300);
  f(3, 4) = 1e300;
  const Point p = soft_argmax(f);
  EXPECT_EQ(p.x, 3.0);
  EXPECT_EQ(p.y, 4.0);
}

TEST(GaussianField, PeakAndHalfWidth) {
  const double sigma = 9.0;
  const GaussianField g = gaussian_field(20.0, 30.0, sigma, 64, 64);
  EXPECT_EQ(g(20, 30), 1.0);
  const double half = sigma * std::sqrt(2.0 * std::log(2.0));
  const GaussianField h = gaussian_field(10.0 - half, 5.0, sigma, 64, 64);
  EXPECT_NEAR(h(10, 5), 0.5, 1e-12);
}

TEST(HeatmapParams, Defaults) {
  const HeatmapParams p;
  EXPECT_EQ(p.sigma, 9.0);
  EXPECT_EQ(p.tau, 0.1);
  EXPECT_EQ(p.eta, 3.5);
}

TEST(HeatmapValue, Examples) {
  EXPECT_EQ(heatmap_value(1.0, 0.1, 3.5), 1.0);
  EXPECT_EQ(heatmap_value(0.1, 0.1, 3.5), 0.0);
  EXPECT_NEAR(heatmap_value(0.3, 0.1, 3.5), 0.7, 1e-15);
  EXPECT_EQ(heatmap_slope(0.3, 0.1, 3.5), 3.5);
  EXPECT_EQ(heatmap_slope(0.05, 0.1, 3.5), 0.0);
  EXPECT_EQ(heatmap_slope(0.9, 0.1, 3.5), 0.0);
}

TEST(HeatmapArea, MatchesDiscCount) {
  const HeatmapParams p;
  const double r = p.support_radius();
  EXPECT_NEAR(r, 9.0 * std::sqrt(2.0 * std::log(10.0)), 1e-12);
  EXPECT_NEAR(r, 19.31, 0.01);
  long disc = 0;
  for (int v = -25; v <= 25; ++v) {
    for (int u = -25; u <= 25; ++u) disc += (u * u + v * v < r * r) ? 1 : 0;
  }
  const double area = heatmap_area(p);
  EXPECT_NEAR(area, static_cast<double>(disc), 0.02 * disc);
  EXPECT_NEAR(area, M_PI * r * r, 0.02 * M_PI * r * r);
}

TEST(HeatmapArea, ShrinksToZeroAsTauApproachesOne) {
  EXPECT_GT(heatmap_area({9.0, 0.9, 3.5}), 0.0);
  EXPECT_LT(heatmap_area({9.0, 0.9, 3.5}), heatmap_area({9.0, 0.5, 3.5}));
  EXPECT_EQ(heatmap_area({9.0, 0.999999, 3.5}), 1.0);
}

TEST(HeatmapArea, IndependentOfPositionInsideCanvas) {
  const HeatmapParams p;
  for (double x : {25.0, 40.0, 70.0}) {
    const Heatmap h = keypoint_heatmap({x, 50.0, 0.0}, p, 100, 100);
    double count = 0;
    for (double v : h.values()) count += v > 0.0 ? 1 : 0;
    EXPECT_EQ(count, heatmap_area(p)) << x;
  }
}

TEST(AggregateMask, Examples) {
  Heatmap a(1, 1, 0.8);
  Heatmap b(1, 1, 0.8);
  const std::vector<Heatmap> both{a, b};
  EXPECT_EQ(aggregate_mask(both, std::vector<double>{1.0, 1.0})[0], 1.0);
  EXPECT_EQ(aggregate_mask(both, std::vector<double>{0.0, 0.0})[0], 0.0);
  const std::vector<Heatmap> one{Heatmap(2, 1, std::vector<double>{0.6, 0.2})};
  const AggregatedMask m = aggregate_mask(one, std::vector<double>{0.5});
  EXPECT_EQ(m[0], 0.3);
  EXPECT_EQ(m[1], 0.1);
  EXPECT_THROW(aggregate_mask(one, std::vector<double>{}), ValidationError);
}

TEST(KeypointHeatmap, ClampsCoordinates) {
  const HeatmapParams p;
  const Heatmap out = keypoint_heatmap({-30.0, 200.0, 0.0}, p, 40, 40);
  const Heatmap corner = keypoint_heatmap({0.0, 39.0, 0.0}, p, 40, 40);
  EXPECT_EQ(out, corner);
  EXPECT_EQ(corner(0, 39), 1.0);
}

TEST(HeatmapParams, Validation) {
  EXPECT_THROW((HeatmapParams{0.0, 0.1, 3.5}.validate()), ValidationError);
  EXPECT_THROW((HeatmapParams{9.0, 1.0, 3.5}.validate()), ValidationError);
  EXPECT_THROW((HeatmapParams{9.0, 0.1, 0.0}.validate()), ValidationError);
}
