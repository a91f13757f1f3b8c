#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "entrokeys/diffengine.hpp"
#include "entrokeys/entropy.hpp"
#include "entrokeys/error.hpp"
#include "entrokeys/geometry.hpp"
#include "entrokeys/image_io.hpp"
#include "entrokeys/losses.hpp"
#include "entrokeys/trajectory.hpp"

namespace entrokeys {

enum class InitStrategy { kEntropy, kGrid };

inline std::string_view to_string(InitStrategy s) { return s == InitStrategy::kEntropy ? "entropy" : "grid"; }

inline InitStrategy parse_init_strategy(std::string_view s) {
  if (s == "entropy") return InitStrategy::kEntropy;
  if (s == "grid") return InitStrategy::kGrid;
  throw ValidationError("init must be 'entropy' or 'grid'");
}

/// Units of the keypoint displacement in the movement penalty m_d * d^2.
enum class MovementUnits { kNormalized, kPixel };

inline std::string_view to_string(MovementUnits u) { return u == MovementUnits::kNormalized ? "normalized" : "pixel"; }

inline MovementUnits parse_movement_units(std::string_view s) {
  if (s == "normalized") return MovementUnits::kNormalized;
  if (s == "pixel") return MovementUnits::kPixel;
  throw ValidationError("movement_units must be 'normalized' or 'pixel'");
}

struct DiscoveryConfig {
  int num_keypoints = 25;
  int iterations = 300;
  double learning_rate = 0.5;
  double momentum = 0.9;
  /// Global L2 norm bound on the gradient.
  double clip = 10.0;
  InitStrategy init = InitStrategy::kEntropy;
  std::uint64_t seed = 0;
  double status_threshold = 0.5;
  double initial_logit = 2.0;
  /// Status logits are projected into [-bound, bound] after every step.
  double logit_bound = 6.0;
  /// Uncovered entropy fraction above which inactive keypoints are re-seeded.
  double respawn_threshold = 0.05;
  LossWeights weights;
  HeatmapParams heatmap;
  OverlapForm overlap_form = OverlapForm::kHinge;
  /// kNormalized measures d in image coordinates scaled to [-1, 1] along the
  /// longer side; kPixel uses raw pixels.
  MovementUnits movement_units = MovementUnits::kNormalized;
  HistogramSpec histogram;
  PreprocessOptions preprocess;
  int threads = 1;

  void validate() const {
    if (num_keypoints < 1) throw ValidationError("num_keypoints must be >= 1");
    if (iterations < 1) throw ValidationError("iterations must be >= 1");
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must be in [0, 1)");
    if (!(clip > 0.0)) throw ValidationError("clip must be > 0");
    if (!(status_threshold > 0.0 && status_threshold < 1.0)) throw ValidationError("status_threshold must be in (0, 1)");
    if (!std::isfinite(initial_logit)) throw ValidationError("initial_logit must be finite");
    if (!(logit_bound > 0.0)) throw ValidationError("logit_bound must be > 0");
    if (!(respawn_threshold >= 0.0 && respawn_threshold <= 1.0)) {
      throw ValidationError("respawn_threshold must be in [0, 1]");
    }
    if (threads < 1) throw ValidationError("threads must be >= 1");
    weights.validate();
    heatmap.validate();
    if (!(heatmap.tau > 0.0)) throw ValidationError("tau must be > 0 for discovery");
    histogram.validate();
  }
};

/// Entropy maps of a video: one per frame, one conditional map per consecutive pair.
struct EntropyStack {
  std::vector<EntropyMap> frames;
  /// conditional[t] = H(I_t | I_{t-1}); conditional[0] is all zero.
  std::vector<EntropyMap> conditional;
};

inline EntropyStack compute_entropy_stack(const std::vector<Frame>& frames, const HistogramSpec& spec,
                                          const PreprocessOptions& pre, int threads) {
  if (frames.empty()) throw ValidationError("no frames");
  EntropyStack s;
  EntropyOptions opt;
  opt.threads = threads;
  for (const auto& f : frames) {
    if (f.width() != frames.front().width() || f.height() != frames.front().height()) {
      throw ValidationError("frame dimensions differ within the video");
    }
    s.frames.push_back(spatial_entropy(preprocess(f, pre), spec, opt));
  }
  s.conditional.emplace_back(frames.front().width(), frames.front().height());
  for (std::size_t t = 1; t < s.frames.size(); ++t) {
    s.conditional.push_back(conditional_entropy(s.frames[t], s.frames[t - 1]));
  }
  return s;
}

namespace detail {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  /// Pixel index drawn with probability proportional to weights (inverse CDF).
  std::size_t draw(const std::vector<double>& cdf) {
    const double u = uniform() * cdf.back();
    return static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  }

 private:
  std::mt19937_64 rng_;
};

inline std::vector<double> cumulative(std::span<const double> w) {
  std::vector<double> cdf(w.size());
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    s += std::max(w[i], 0.0);
    cdf[i] = s;
  }
  return cdf;
}

inline double min_distance(const Point& p, const std::vector<Point>& others) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : others) best = std::min(best, std::hypot(p.x - o.x, p.y - o.y));
  return best;
}

/// Point drawn proportional to `weights`, jittered within its pixel, kept at
/// least `separation` away from `taken` when possible (else the farthest of
/// the candidates drawn).
inline Point sample_point(Sampler& rng, const std::vector<double>& cdf, int width, int height,
                          const std::vector<Point>& taken, double separation) {
  constexpr int kAttempts = 64;
  Point best;
  double best_d = -1.0;
  for (int a = 0; a < kAttempts; ++a) {
    const std::size_t idx = std::min(rng.draw(cdf), cdf.size() - 1);
    const double jx = rng.uniform() - 0.5;
    const double jy = rng.uniform() - 0.5;
    const Point p = clamp_to_image({static_cast<double>(idx % static_cast<std::size_t>(width)) + jx,
                                    static_cast<double>(idx / static_cast<std::size_t>(width)) + jy},
                                   width, height);
    const double d = min_distance(p, taken);
    if (d >= separation) return p;
    if (d > best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

inline double global_norm(std::span<const double> g) {
  double s = 0.0;
  for (double v : g) s += v * v;
  return std::sqrt(s);
}

}  // namespace detail

/// Loss weights as seen by the pixel-unit objective for a w x h video.
inline LossWeights effective_weights(const DiscoveryConfig& cfg, int width, int height) {
  LossWeights w = cfg.weights;
  if (cfg.movement_units == MovementUnits::kNormalized) {
    const double scale = 2.0 / std::max(1, std::max(width, height) - 1);
    w.m_d *= scale * scale;
  }
  return w;
}

/// Initial keypoints for the first frame.
inline KeypointState initial_keypoints(const EntropyMap& h, const DiscoveryConfig& cfg, detail::Sampler& rng) {
  const int w = h.width();
  const int hh = h.height();
  const auto k = static_cast<std::size_t>(cfg.num_keypoints);
  KeypointState kps;
  const bool blank = !(h.sum() > 0.0);
  if (cfg.init == InitStrategy::kGrid || blank) {
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k))));
    const int rows = static_cast<int>((k + static_cast<std::size_t>(cols) - 1) / static_cast<std::size_t>(cols));
    for (std::size_t i = 0; i < k; ++i) {
      const int c = static_cast<int>(i) % cols;
      const int r = static_cast<int>(i) / cols;
      kps.push_back({(c + 0.5) * w / cols - 0.5, (r + 0.5) * hh / rows - 0.5, cfg.initial_logit});
    }
    return kps;
  }
  const auto cdf = detail::cumulative(h.values());
  std::vector<Point> taken;
  for (std::size_t i = 0; i < k; ++i) {
    const Point p = detail::sample_point(rng, cdf, w, hh, taken, cfg.heatmap.support_radius());
    taken.push_back(p);
    kps.push_back({p.x, p.y, cfg.initial_logit});
  }
  return kps;
}

/// Momentum descent with backtracking; a step is taken only if it does not
/// increase the loss. Returns the final evaluation.
inline Evaluation optimize_frame(const MintObjective& obj, KeypointState& kps, const KeypointState* prev,
                                 const DiscoveryConfig& cfg) {
  const int w = obj.width();
  const int h = obj.height();
  auto project = [&](std::vector<double>& p) {
    for (std::size_t i = 0; i < p.size(); i += 3) {
      p[i] = std::clamp(p[i], 0.0, static_cast<double>(w - 1));
      p[i + 1] = std::clamp(p[i + 1], 0.0, static_cast<double>(h - 1));
      p[i + 2] = std::clamp(p[i + 2], -cfg.logit_bound, cfg.logit_bound);
    }
  };
  std::vector<double> params = flatten(kps);
  project(params);
  Evaluation ev = obj.evaluate(unflatten(params), prev, GradientScope::kCurrent);
  std::vector<double> velocity(params.size(), 0.0);
  std::vector<double> cand(params.size());
  constexpr int kMaxHalvings = 5;
  constexpr int kMaxBlockHalvings = 2;
  constexpr int kPatience = 12;
  constexpr int kWindow = 20;
  constexpr double kMinWindowGain = 1e-6;
  int idle = 0;
  std::vector<double> history;
  for (int it = 0; it < cfg.iterations; ++it) {
    history.push_back(ev.loss.total);
    if (history.size() > kWindow &&
        history[history.size() - 1 - kWindow] - ev.loss.total < kMinWindowGain * std::max(1.0, std::abs(ev.loss.total))) {
      break;
    }
    std::vector<double> g = ev.gradient;
    const double norm = detail::global_norm(g);
    if (norm > cfg.clip) {
      for (double& v : g) v *= cfg.clip / norm;
    }
    for (std::size_t i = 0; i < g.size(); ++i) velocity[i] = cfg.momentum * velocity[i] - cfg.learning_rate * g[i];
    bool accepted = false;
    double scale = 1.0;
    for (int half = 0; half <= kMaxHalvings; ++half, scale *= 0.5) {
      for (std::size_t i = 0; i < params.size(); ++i) cand[i] = params[i] + scale * velocity[i];
      project(cand);
      const double total = obj.evaluate(unflatten(cand), prev, GradientScope::kNone).loss.total;
      if (total <= ev.loss.total) {
        const double gain = ev.loss.total - total;
        for (std::size_t i = 0; i < params.size(); ++i) velocity[i] = cand[i] - params[i];
        params.swap(cand);
        ev = obj.evaluate(unflatten(params), prev, GradientScope::kCurrent);
        accepted = true;
        idle = gain <= 1e-12 * std::max(1.0, std::abs(ev.loss.total)) ? idle + 1 : 0;
        break;
      }
    }
    if (!accepted) {
      // At a kink of one keypoint's terms the joint step can fail for all
      // keypoints; retry each keypoint's own block of the gradient step.
      std::fill(velocity.begin(), velocity.end(), 0.0);
      const double before = ev.loss.total;
      double current = before;
      for (std::size_t b = 0; b < params.size(); b += kParamsPerKeypoint) {
        if (detail::global_norm(std::span(g).subspan(b, kParamsPerKeypoint)) == 0.0) continue;
        double block_scale = 1.0;
        for (int half = 0; half <= kMaxBlockHalvings; ++half, block_scale *= 0.5) {
          cand = params;
          for (std::size_t i = b; i < b + kParamsPerKeypoint; ++i) cand[i] -= block_scale * cfg.learning_rate * g[i];
          project(cand);
          if (cand == params) break;
          const double total = obj.evaluate(unflatten(cand), prev, GradientScope::kNone).loss.total;
          if (total <= current) {
            params.swap(cand);
            current = total;
            break;
          }
        }
      }
      ev = obj.evaluate(unflatten(params), prev, GradientScope::kCurrent);
      const double gain = before - ev.loss.total;
      idle = gain <= 1e-12 * std::max(1.0, std::abs(ev.loss.total)) ? idle + 1 : 0;
    }
    if (idle >= kPatience) break;
  }
  kps = unflatten(params);
  return ev;
}

/// Re-seeds inactive keypoints on uncovered entropy while the uncovered
/// fraction exceeds the threshold. Re-seeded keypoints start at logit 0 and
/// their previous-frame position is moved with them.
inline int respawn_inactive(const EntropyMap& h, KeypointState& kps, KeypointState& prev, const DiscoveryConfig& cfg,
                            detail::Sampler& rng) {
  const double total = h.sum();
  if (!(total >= kBlankEntropyPerPixel * static_cast<double>(h.size()))) return 0;
  const int w = h.width();
  const int hh = h.height();
  AggregatedMask m = keypoint_mask(kps, cfg.heatmap, w, hh);
  int respawned = 0;
  for (std::size_t i = 0; i < kps.size(); ++i) {
    if (kps[i].status() > cfg.status_threshold) continue;
    std::vector<double> uncovered(h.size());
    double free = 0.0;
    for (std::size_t p = 0; p < h.size(); ++p) {
      uncovered[p] = h[p] * (1.0 - m[p]);
      free += uncovered[p];
    }
    if (free / total <= cfg.respawn_threshold) break;
    std::vector<Point> taken;
    for (const auto& k : kps) {
      if (k.status() > cfg.status_threshold) taken.push_back(clamp_to_image({k.x, k.y}, w, hh));
    }
    const Point p = detail::sample_point(rng, detail::cumulative(uncovered), w, hh, taken,
                                         cfg.heatmap.support_radius() / 2.0);
    kps[i] = {p.x, p.y, 0.0};
    prev[i] = {p.x, p.y, prev[i].status_logit};
    const Heatmap hm = keypoint_heatmap(kps[i], cfg.heatmap, w, hh);
    for (std::size_t q = 0; q < m.size(); ++q) m[q] = std::min(m[q] + hm[q], 1.0);
    ++respawned;
  }
  return respawned;
}

/// Direct keypoint discovery from precomputed entropy maps.
inline Trajectory discover_from_entropy(const EntropyStack& stack, const DiscoveryConfig& cfg) {
  cfg.validate();
  if (stack.frames.empty()) throw ValidationError("discover: no frames");
  Trajectory tr;
  detail::Sampler rng(cfg.seed);
  const LossWeights weights = effective_weights(cfg, stack.frames.front().width(), stack.frames.front().height());
  KeypointState kps = initial_keypoints(stack.frames.front(), cfg, rng);
  {
    MintObjective obj(stack.frames.front(), weights, cfg.heatmap, cfg.overlap_form);
    const Evaluation ev = optimize_frame(obj, kps, nullptr, cfg);
    TrajectoryFrame f = make_trajectory_frame(0, kps, cfg.status_threshold);
    f.loss = ev.loss;
    tr.degenerate = tr.degenerate || ev.loss.degenerate_me;
    tr.frames.push_back(std::move(f));
  }
  for (std::size_t t = 1; t < stack.frames.size(); ++t) {
    KeypointState prev = kps;
    respawn_inactive(stack.frames[t], kps, prev, cfg, rng);
    MintObjective obj(stack.frames[t], stack.frames[t - 1], stack.conditional[t], weights, cfg.heatmap,
                      cfg.overlap_form);
    const Evaluation ev = optimize_frame(obj, kps, &prev, cfg);
    TrajectoryFrame f = make_trajectory_frame(static_cast<int>(t), kps, cfg.status_threshold);
    f.loss = ev.loss;
    tr.degenerate = tr.degenerate || ev.loss.degenerate_me;
    tr.frames.push_back(std::move(f));
  }
  return tr;
}

inline Trajectory discover(const std::vector<Frame>& frames, const DiscoveryConfig& cfg) {
  cfg.validate();
  return discover_from_entropy(compute_entropy_stack(frames, cfg.histogram, cfg.preprocess, cfg.threads), cfg);
}

}  // namespace entrokeys
