#pragma once

#include <cstdint>
#include <random>

#include <json.hpp>

#include "entrokeys/diffengine.hpp"
#include "entrokeys/discoverer.hpp"
#include "entrokeys/synth.hpp"

namespace entrokeys {

/// A seeded random frame pair with keypoints at t-1 and t.
struct GradcheckCase {
  MintObjective objective;
  KeypointState prev;
  KeypointState cur;
};

/// Two frames of 2-3 textured discs moving a few pixels, entropy maps at
/// default settings, and K keypoints with random positions and logits.
inline GradcheckCase make_gradcheck_case(std::uint64_t seed, int width = 64, int height = 64, int k = 5,
                                         const LossWeights& weights = {}, const HeatmapParams& params = {}) {
  if (width < 16 || height < 16) throw ValidationError("gradcheck: frames must be at least 16x16");
  if (k < 1) throw ValidationError("gradcheck: K must be >= 1");
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * detail::unit_uniform(rng); };
  SceneSpec spec;
  spec.width = width;
  spec.height = height;
  spec.frames = 2;
  spec.seed = seed;
  const int n_objects = 2 + static_cast<int>(rng() % 2);
  for (int i = 0; i < n_objects; ++i) {
    SceneObject o;
    o.radius = uniform(5.0, 9.0);
    o.x = uniform(o.radius, width - 1 - o.radius);
    o.y = uniform(o.radius, height - 1 - o.radius);
    o.vx = uniform(-3.0, 3.0);
    o.vy = uniform(-3.0, 3.0);
    o.shape = (rng() % 2) ? Shape::kDisc : Shape::kSquare;
    o.color_a = {uniform(0, 1), uniform(0, 1), uniform(0, 1)};
    o.color_b = {uniform(0, 1), uniform(0, 1), uniform(0, 1)};
    spec.objects.push_back(o);
  }
  const RenderedScene scene = render(spec);
  const EntropyStack stack = compute_entropy_stack(scene.frames, HistogramSpec{}, PreprocessOptions{}, 1);
  GradcheckCase c{MintObjective(stack.frames[1], stack.frames[0], stack.conditional[1], weights, params), {}, {}};
  for (int i = 0; i < k; ++i) {
    const Keypoint cur{uniform(2.0, width - 3.0), uniform(2.0, height - 3.0), uniform(-3.0, 3.0)};
    c.cur.push_back(cur);
    c.prev.push_back({cur.x + uniform(-3.0, 3.0), cur.y + uniform(-3.0, 3.0), uniform(-3.0, 3.0)});
  }
  return c;
}

inline nlohmann::json to_json(const GradientReport& r, double tolerance) {
  nlohmann::json flagged = nlohmann::json::array();
  for (bool f : r.flagged) flagged.push_back(f);
  return {{"analytic", r.analytic},
          {"numeric", r.numeric},
          {"relative_error", r.relative_error},
          {"flagged", flagged},
          {"checked", r.checked},
          {"max_relative_error", r.max_relative_error},
          {"tolerance", tolerance},
          {"pass", r.passed(tolerance)}};
}

}  // namespace entrokeys
