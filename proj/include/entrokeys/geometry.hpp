#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

#include "entrokeys/error.hpp"
#include "entrokeys/field.hpp"
#include "entrokeys/numeric.hpp"

namespace entrokeys {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// One keypoint: continuous pixel coordinates plus an unbounded status logit.
/// The soft status is logistic(status_logit).
struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double status_logit = 0.0;

  double status() const noexcept { return logistic(status_logit); }
  bool active(double threshold = 0.5) const noexcept { return status() > threshold; }
};

using KeypointState = std::vector<Keypoint>;

/// Parameters of the Gaussian -> heatmap construction.
struct HeatmapParams {
  double sigma = 9.0;
  double tau = 0.1;
  double eta = 3.5;

  void validate() const {
    if (!(sigma > 0.0)) throw ValidationError("sigma_g must be > 0");
    if (!(tau >= 0.0 && tau < 1.0)) throw ValidationError("tau must be in [0, 1)");
    if (!(eta > 0.0)) throw ValidationError("eta must be > 0");
  }

  /// Radius beyond which G <= tau, i.e. the heatmap is zero.
  double support_radius() const noexcept {
    return tau > 0.0 ? sigma * std::sqrt(-2.0 * std::log(tau)) : std::numeric_limits<double>::infinity();
  }
};

/// Clamps coordinates into [0, W-1] x [0, H-1].
inline Point clamp_to_image(Point p, int width, int height) noexcept {
  return {std::clamp(p.x, 0.0, static_cast<double>(width - 1)), std::clamp(p.y, 0.0, static_cast<double>(height - 1))};
}

/// Spatial soft-argmax: softmax over the flattened map (max subtracted first),
/// then the expected pixel coordinate under those weights.
inline Point soft_argmax(const FeatureMap& f) {
  if (f.empty()) throw ValidationError("soft_argmax: empty feature map");
  const double peak = f.max();
  double total = 0.0;
  double sx = 0.0;
  double sy = 0.0;
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      const double w = std::exp(f(x, y) - peak);
      total += w;
      sx += w * x;
      sy += w * y;
    }
  }
  return {sx / total, sy / total};
}

/// G(u, v) = exp(-((u - x)^2 + (v - y)^2) / (2 sigma^2)) sampled at pixel centers.
inline GaussianField gaussian_field(double x, double y, double sigma, int width, int height) {
  if (!(sigma > 0.0)) throw ValidationError("gaussian_field: sigma must be > 0");
  GaussianField g(width, height);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> gx(static_cast<std::size_t>(width));
  for (int u = 0; u < width; ++u) gx[static_cast<std::size_t>(u)] = std::exp(-(u - x) * (u - x) * inv);
  for (int v = 0; v < height; ++v) {
    const double gy = std::exp(-(v - y) * (v - y) * inv);
    for (int u = 0; u < width; ++u) g(u, v) = gy * gx[static_cast<std::size_t>(u)];
  }
  return g;
}

/// Scalar heatmap response h = clamp(eta * max(G - tau, 0), 0, 1).
inline double heatmap_value(double g, double tau, double eta) noexcept {
  return std::clamp(eta * std::max(g - tau, 0.0), 0.0, 1.0);
}

/// dh/dG; zero on the flat sides, and zero exactly at either kink.
inline double heatmap_slope(double g, double tau, double eta) noexcept {
  return (g > tau && eta * (g - tau) < 1.0) ? eta : 0.0;
}

inline Heatmap heatmap(const GaussianField& g, double tau, double eta) {
  HeatmapParams{1.0, tau, eta}.validate();
  Heatmap h(g.width(), g.height());
  for (std::size_t i = 0; i < g.size(); ++i) h[i] = heatmap_value(g[i], tau, eta);
  return h;
}

/// Heatmap of one keypoint; coordinates are clamped into the image first.
inline Heatmap keypoint_heatmap(const Keypoint& kp, const HeatmapParams& params, int width, int height) {
  params.validate();
  const Point c = clamp_to_image({kp.x, kp.y}, width, height);
  return heatmap(gaussian_field(c.x, c.y, params.sigma, width, height), params.tau, params.eta);
}

/// Count of strictly positive pixels of a heatmap centered on a canvas large
/// enough to hold its whole support. Memoized per (sigma, tau, eta).
inline double heatmap_area(const HeatmapParams& params) {
  params.validate();
  static std::mutex mutex;
  static std::map<std::tuple<double, double, double>, double> cache;
  const auto key = std::make_tuple(params.sigma, params.tau, params.eta);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const double radius = params.support_radius();
  if (!std::isfinite(radius)) throw ValidationError("heatmap_area: tau = 0 gives unbounded support");
  const int half = static_cast<int>(std::ceil(radius)) + 2;
  const double inv = 1.0 / (2.0 * params.sigma * params.sigma);
  long count = 0;
  for (int v = -half; v <= half; ++v) {
    for (int u = -half; u <= half; ++u) {
      const double g = std::exp(-(u * u + v * v) * inv);
      if (heatmap_value(g, params.tau, params.eta) > 0.0) ++count;
    }
  }
  const double area = static_cast<double>(count);
  std::lock_guard lock(mutex);
  cache.emplace(key, area);
  return area;
}

/// M = min(sum_i h_i * s_i, 1).
inline AggregatedMask aggregate_mask(std::span<const Heatmap> heatmaps, std::span<const double> statuses) {
  if (heatmaps.size() != statuses.size()) throw ValidationError("aggregate_mask: one status per heatmap required");
  if (heatmaps.empty()) throw ValidationError("aggregate_mask: no heatmaps");
  AggregatedMask m(heatmaps.front().width(), heatmaps.front().height());
  for (std::size_t k = 0; k < heatmaps.size(); ++k) {
    require_same_shape(heatmaps[k], m, "aggregate_mask");
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += heatmaps[k][i] * statuses[k];
  }
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::min(m[i], 1.0);
  return m;
}

/// Heatmaps and mask for a whole keypoint state.
inline AggregatedMask keypoint_mask(const KeypointState& kps, const HeatmapParams& params, int width, int height) {
  std::vector<Heatmap> hs;
  std::vector<double> s;
  for (const auto& kp : kps) {
    hs.push_back(keypoint_heatmap(kp, params, width, height));
    s.push_back(kp.status());
  }
  if (hs.empty()) return AggregatedMask(width, height);
  return aggregate_mask(hs, s);
}

}  // namespace entrokeys
