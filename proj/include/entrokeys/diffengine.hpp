#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <type_traits>
#include <vector>

#include "entrokeys/error.hpp"
#include "entrokeys/field.hpp"
#include "entrokeys/geometry.hpp"
#include "entrokeys/losses.hpp"

namespace entrokeys {

/// Parameters per keypoint in a flattened vector: x, y, status_logit.
inline constexpr std::size_t kParamsPerKeypoint = 3;

/// Keypoint-major layout x1, y1, l1, x2, ...
inline std::vector<double> flatten(const KeypointState& kps) {
  std::vector<double> p;
  p.reserve(kps.size() * kParamsPerKeypoint);
  for (const auto& k : kps) {
    p.push_back(k.x);
    p.push_back(k.y);
    p.push_back(k.status_logit);
  }
  return p;
}

inline KeypointState unflatten(std::span<const double> p) {
  if (p.size() % kParamsPerKeypoint != 0) throw ValidationError("parameter vector length must be a multiple of 3");
  KeypointState kps(p.size() / kParamsPerKeypoint);
  for (std::size_t i = 0; i < kps.size(); ++i) {
    kps[i] = {p[3 * i], p[3 * i + 1], p[3 * i + 2]};
  }
  return kps;
}

/// Which parameters receive gradients.
enum class GradientScope {
  kNone,     ///< loss only
  kCurrent,  ///< 3K parameters of frame t
  kPair,     ///< 6K parameters: frame t-1 block, then frame t block
};

struct Evaluation {
  LossBreakdown loss;
  /// Empty for kNone, 3K for kCurrent, 6K for kPair.
  std::vector<double> gradient;
  /// Hash of every discrete branch taken (thresholds, saturations, hinges,
  /// clamps, arg-max); 0 unless requested.
  std::uint64_t signature = 0;
};

namespace detail {

class Fnv1a {
 public:
  void add(std::uint64_t v) noexcept {
    for (int b = 0; b < 8; ++b) {
      hash_ ^= (v >> (8 * b)) & 0xffu;
      hash_ *= 0x100000001b3ull;
    }
  }
  void add_bit(bool b) noexcept {
    hash_ ^= b ? 1u : 0u;
    hash_ *= 0x100000001b3ull;
  }
  std::uint64_t value() const noexcept { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

struct Box {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;

  bool contains(int x, int y) const noexcept { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  int width() const noexcept { return x1 - x0 + 1; }
  std::size_t local(int x, int y) const noexcept {
    return static_cast<std::size_t>(y - y0) * static_cast<std::size_t>(width()) + static_cast<std::size_t>(x - x0);
  }
  static Box hull(const Box& a, const Box& b) noexcept {
    return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1), std::max(a.y1, b.y1)};
  }
};

/// One keypoint's Gaussian and heatmap restricted to a box that contains its
/// whole support plus a margin; outside the box h and dh/dG are zero.
struct LocalHeatmap {
  Point center;
  double dclamp_x = 1.0;
  double dclamp_y = 1.0;
  Box box;
  std::vector<double> g;
  std::vector<double> h;
  std::vector<double> slope;
  /// Separable factors of the Gaussian over the full image width / height.
  std::vector<double> gx;
  std::vector<double> gy;

  double h_at(int x, int y) const noexcept { return box.contains(x, y) ? h[box.local(x, y)] : 0.0; }
};

inline LocalHeatmap make_local_heatmap(const Keypoint& kp, const HeatmapParams& params, int width, int height) {
  LocalHeatmap lh;
  lh.center = clamp_to_image({kp.x, kp.y}, width, height);
  lh.dclamp_x = (kp.x >= 0.0 && kp.x <= width - 1) ? 1.0 : 0.0;
  lh.dclamp_y = (kp.y >= 0.0 && kp.y <= height - 1) ? 1.0 : 0.0;
  const double reach = std::ceil(params.support_radius()) + 1.0;
  lh.box.x0 = std::max(0, static_cast<int>(std::floor(lh.center.x - reach)));
  lh.box.x1 = std::min(width - 1, static_cast<int>(std::ceil(lh.center.x + reach)));
  lh.box.y0 = std::max(0, static_cast<int>(std::floor(lh.center.y - reach)));
  lh.box.y1 = std::min(height - 1, static_cast<int>(std::ceil(lh.center.y + reach)));
  const double inv = 1.0 / (2.0 * params.sigma * params.sigma);
  lh.gx.resize(static_cast<std::size_t>(width));
  lh.gy.resize(static_cast<std::size_t>(height));
  for (int u = 0; u < width; ++u) lh.gx[static_cast<std::size_t>(u)] = std::exp(-(u - lh.center.x) * (u - lh.center.x) * inv);
  for (int v = 0; v < height; ++v) lh.gy[static_cast<std::size_t>(v)] = std::exp(-(v - lh.center.y) * (v - lh.center.y) * inv);
  const std::size_t n = static_cast<std::size_t>(lh.box.width()) * static_cast<std::size_t>(lh.box.y1 - lh.box.y0 + 1);
  lh.g.resize(n);
  lh.h.resize(n);
  lh.slope.resize(n);
  for (int y = lh.box.y0; y <= lh.box.y1; ++y) {
    for (int x = lh.box.x0; x <= lh.box.x1; ++x) {
      const std::size_t i = lh.box.local(x, y);
      const double g = lh.gy[static_cast<std::size_t>(y)] * lh.gx[static_cast<std::size_t>(x)];
      lh.g[i] = g;
      lh.h[i] = heatmap_value(g, params.tau, params.eta);
      lh.slope[i] = heatmap_slope(g, params.tau, params.eta);
    }
  }
  return lh;
}

/// Summed-area table for O(1) rectangle sums.
class SummedArea {
 public:
  SummedArea() = default;
  template <class Tag>
  explicit SummedArea(const Field<Tag>& f) : width_(f.width()), table_((f.width() + 1) * (f.height() + 1), 0.0) {
    for (int y = 0; y < f.height(); ++y) {
      double row = 0.0;
      for (int x = 0; x < f.width(); ++x) {
        row += f(x, y);
        at(x + 1, y + 1) = at(x + 1, y) + row;
      }
    }
  }
  double sum(const Box& b) const noexcept {
    return cat(b.x1 + 1, b.y1 + 1) - cat(b.x0, b.y1 + 1) - cat(b.x1 + 1, b.y0) + cat(b.x0, b.y0);
  }

 private:
  double& at(int x, int y) noexcept { return table_[static_cast<std::size_t>(y) * (width_ + 1) + x]; }
  double cat(int x, int y) const noexcept { return table_[static_cast<std::size_t>(y) * (width_ + 1) + x]; }
  int width_ = 0;
  std::vector<double> table_;
};

}  // namespace detail

/// MINT objective over fixed entropy maps with closed-form gradients.
///
/// Single-frame mode (no previous frame): ME + O + (1 - ME) S, weighted.
/// Pair mode: the full combination including MCE and IT.
/// Gradients follow G -> h -> M -> losses; entropy maps are constants and
/// the (1 - ME) status schedule is held constant.
class MintObjective {
 public:
  MintObjective(EntropyMap h_t, LossWeights weights, HeatmapParams params, OverlapForm form = OverlapForm::kHinge)
      : h_t_(std::move(h_t)), weights_(weights), params_(params), form_(form) {
    init();
  }

  MintObjective(EntropyMap h_t, EntropyMap h_prev, EntropyMap h_cond, LossWeights weights, HeatmapParams params,
                OverlapForm form = OverlapForm::kHinge)
      : h_t_(std::move(h_t)), h_prev_(std::move(h_prev)), h_cond_(std::move(h_cond)), weights_(weights),
        params_(params), form_(form), pair_(true) {
    require_same_shape(h_t_, h_prev_, "MintObjective");
    require_same_shape(h_t_, h_cond_, "MintObjective");
    init();
  }

  bool pair_mode() const noexcept { return pair_; }
  int width() const noexcept { return h_t_.width(); }
  int height() const noexcept { return h_t_.height(); }
  const EntropyMap& current_entropy() const noexcept { return h_t_; }
  double heatmap_area_px() const noexcept { return area_; }

  /// Evaluates the loss for keypoints `cur` at frame t (and `prev` at t-1 in
  /// pair mode). `frozen_schedule` replaces the (1 - ME) factor when given.
  Evaluation evaluate(const KeypointState& cur, const KeypointState* prev = nullptr,
                      GradientScope scope = GradientScope::kCurrent, std::optional<double> frozen_schedule = {},
                      bool with_signature = false) const {
    const std::size_t k = cur.size();
    if (k == 0) throw ValidationError("MintObjective: K must be >= 1");
    check_finite(cur);
    if (pair_) {
      if (prev == nullptr || prev->size() != k) throw ValidationError("MintObjective: previous keypoints required");
      check_finite(*prev);
    } else if (scope == GradientScope::kPair) {
      throw ValidationError("MintObjective: pair gradients need a previous frame");
    }
    const int w = width();
    const int h = height();
    const double kd = static_cast<double>(k);
    detail::Fnv1a sig;

    std::vector<detail::LocalHeatmap> lt;
    std::vector<detail::LocalHeatmap> lp;
    std::vector<double> status(k);
    for (std::size_t i = 0; i < k; ++i) {
      lt.push_back(detail::make_local_heatmap(cur[i], params_, w, h));
      status[i] = cur[i].status();
      if (pair_) lp.push_back(detail::make_local_heatmap((*prev)[i], params_, w, h));
    }

    // Aggregated mask.
    AggregatedMask a(w, h);
    for (std::size_t i = 0; i < k; ++i) {
      const auto& l = lt[i];
      for (int y = l.box.y0; y <= l.box.y1; ++y) {
        for (int x = l.box.x0; x <= l.box.x1; ++x) a(x, y) += l.h[l.box.local(x, y)] * status[i];
      }
    }
    double covered_t = 0.0;
    double covered_c = 0.0;
    for (std::size_t p = 0; p < a.size(); ++p) {
      const double m = std::min(a[p], 1.0);
      covered_t += h_t_[p] * m;
      if (pair_) covered_c += h_cond_[p] * m;
    }

    LossBreakdown out;
    out.degenerate_me = degenerate_me_;
    out.me = degenerate_me_ ? 0.0 : 1.0 - covered_t / sum_t_;
    if (pair_) {
      out.degenerate_mce = degenerate_mce_;
      out.mce = degenerate_mce_ ? 0.0 : 1.0 - covered_c / sum_c_;
    }

    // Overlap: hard max of the summed Gaussians over the whole image.
    std::size_t argmax = 0;
    double peak = -1.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) s += lt[i].gy[static_cast<std::size_t>(y)] * lt[i].gx[static_cast<std::size_t>(x)];
        if (s > peak) {
          peak = s;
          argmax = a.index(x, y);
        }
      }
    }
    const double excess = peak - weights_.beta;
    const bool overlap_live = form_ == OverlapForm::kHinge ? excess > 0.0 : excess < 0.0;
    out.overlap = overlap_live ? excess / kd : 0.0;

    double status_sum = 0.0;
    for (double s : status) status_sum += s;
    out.status = status_sum / kd;

    // Information transport, per keypoint.
    std::vector<std::vector<double>> it_dh_t(k);
    std::vector<std::vector<double>> it_dh_p(k);
    const bool want_grad = scope != GradientScope::kNone;
    if (pair_) {
      out.it_terms.resize(k);
      out.distances.resize(k);
      for (std::size_t i = 0; i < k; ++i) {
        const auto& t = lt[i];
        const auto& q = lp[i];
        const detail::Box u = detail::Box::hull(t.box, q.box);
        double deficit = base_deficit_total_ - base_deficit_.sum(u);
        if (want_grad) {
          it_dh_t[i].assign(t.h.size(), 0.0);
          if (scope == GradientScope::kPair) it_dh_p[i].assign(q.h.size(), 0.0);
        }
        for (int y = u.y0; y <= u.y1; ++y) {
          for (int x = u.x0; x <= u.x1; ++x) {
            const std::size_t p = h_t_.index(x, y);
            const double ht = t.h_at(x, y);
            const double hp = q.h_at(x, y);
            const double r = h_prev_[p] * (1.0 - hp) * (1.0 - ht) + h_t_[p] * ht + weights_.kappa * h_cond_[p] * (1.0 - ht);
            const bool live = h_t_[p] > r;
            if (with_signature) sig.add_bit(live);
            if (!live) continue;
            deficit += h_t_[p] - r;
            if (!want_grad) continue;
            if (t.box.contains(x, y)) {
              it_dh_t[i][t.box.local(x, y)] =
                  (h_prev_[p] * (1.0 - hp) - h_t_[p] + weights_.kappa * h_cond_[p]) / area_;
            }
            if (scope == GradientScope::kPair && q.box.contains(x, y)) {
              it_dh_p[i][q.box.local(x, y)] = h_prev_[p] * (1.0 - ht) / area_;
            }
          }
        }
        const double dx = t.center.x - q.center.x;
        const double dy = t.center.y - q.center.y;
        out.distances[i] = dx * dx + dy * dy;
        out.it_terms[i] = deficit / area_ + weights_.m_d * out.distances[i];
        out.it += out.it_terms[i];
      }
    }

    const double schedule = frozen_schedule.value_or(1.0 - out.me);
    out.total = weights_.lambda_me * out.me + weights_.lambda_mce * out.mce + weights_.lambda_it * out.it +
                weights_.lambda_o * out.overlap + schedule * weights_.lambda_s * out.status;

    Evaluation ev;
    ev.loss = std::move(out);

    if (with_signature) {
      for (std::size_t i = 0; i < k; ++i) {
        for (const auto* l : {&lt[i], pair_ ? &lp[i] : nullptr}) {
          if (l == nullptr) continue;
          sig.add_bit(l->dclamp_x > 0.0);
          sig.add_bit(l->dclamp_y > 0.0);
          for (std::size_t j = 0; j < l->g.size(); ++j) {
            sig.add_bit(l->g[j] > params_.tau);
            sig.add_bit(params_.eta * (l->g[j] - params_.tau) >= 1.0);
          }
        }
      }
      for (std::size_t p = 0; p < a.size(); ++p) {
        if (a[p] >= 1.0) sig.add(p);
      }
      sig.add(argmax);
      sig.add_bit(overlap_live);
      sig.add_bit(ev.loss.degenerate_me);
      sig.add_bit(ev.loss.degenerate_mce);
      ev.signature = sig.value();
    }
    if (!want_grad) return ev;

    // dL/dM where the mask is unsaturated.
    const double me_scale = degenerate_me_ ? 0.0 : -weights_.lambda_me / sum_t_;
    const double mce_scale = (pair_ && !degenerate_mce_) ? -weights_.lambda_mce / sum_c_ : 0.0;

    const std::size_t offset = scope == GradientScope::kPair ? kParamsPerKeypoint * k : 0;
    ev.gradient.assign(offset + kParamsPerKeypoint * k, 0.0);
    const double inv_s2 = 1.0 / (params_.sigma * params_.sigma);
    const Point arg_pt{static_cast<double>(argmax % static_cast<std::size_t>(w)),
                       static_cast<double>(argmax / static_cast<std::size_t>(w))};

    for (std::size_t i = 0; i < k; ++i) {
      const auto& l = lt[i];
      double gx = 0.0;
      double gy = 0.0;
      double gs = 0.0;
      for (int y = l.box.y0; y <= l.box.y1; ++y) {
        for (int x = l.box.x0; x <= l.box.x1; ++x) {
          const std::size_t j = l.box.local(x, y);
          const std::size_t p = a.index(x, y);
          double dmask = 0.0;
          if (a[p] < 1.0) dmask = me_scale * h_t_[p] + (pair_ ? mce_scale * h_cond_[p] : 0.0);
          gs += dmask * l.h[j];
          if (l.slope[j] == 0.0) continue;
          double dh = dmask * status[i];
          if (pair_) dh += weights_.lambda_it * it_dh_t[i][j];
          const double dg = dh * l.slope[j] * l.g[j] * inv_s2;
          gx += dg * (x - l.center.x);
          gy += dg * (y - l.center.y);
        }
      }
      if (overlap_live) {
        const double g_star = l.gx[static_cast<std::size_t>(arg_pt.x)] * l.gy[static_cast<std::size_t>(arg_pt.y)];
        const double c = weights_.lambda_o / kd * g_star * inv_s2;
        gx += c * (arg_pt.x - l.center.x);
        gy += c * (arg_pt.y - l.center.y);
      }
      if (pair_) {
        const double c = 2.0 * weights_.lambda_it * weights_.m_d;
        gx += c * (l.center.x - lp[i].center.x);
        gy += c * (l.center.y - lp[i].center.y);
      }
      gs += schedule * weights_.lambda_s / kd;
      const double s = status[i];
      ev.gradient[offset + 3 * i] = gx * l.dclamp_x;
      ev.gradient[offset + 3 * i + 1] = gy * l.dclamp_y;
      ev.gradient[offset + 3 * i + 2] = gs * s * (1.0 - s);
    }

    if (scope == GradientScope::kPair) {
      for (std::size_t i = 0; i < k; ++i) {
        const auto& q = lp[i];
        double gx = 0.0;
        double gy = 0.0;
        for (int y = q.box.y0; y <= q.box.y1; ++y) {
          for (int x = q.box.x0; x <= q.box.x1; ++x) {
            const std::size_t j = q.box.local(x, y);
            if (q.slope[j] == 0.0) continue;
            const double dg = weights_.lambda_it * it_dh_p[i][j] * q.slope[j] * q.g[j] * inv_s2;
            gx += dg * (x - q.center.x);
            gy += dg * (y - q.center.y);
          }
        }
        const double c = 2.0 * weights_.lambda_it * weights_.m_d;
        gx -= c * (lt[i].center.x - q.center.x);
        gy -= c * (lt[i].center.y - q.center.y);
        ev.gradient[3 * i] = gx * q.dclamp_x;
        ev.gradient[3 * i + 1] = gy * q.dclamp_y;
      }
    }
    return ev;
  }

 private:
  void init() {
    weights_.validate();
    params_.validate();
    if (!(params_.tau > 0.0)) throw ValidationError("MintObjective: tau must be > 0");
    if (h_t_.empty()) throw ValidationError("MintObjective: empty entropy map");
    area_ = heatmap_area(params_);
    sum_t_ = h_t_.sum();
    degenerate_me_ = !(sum_t_ >= kBlankEntropyPerPixel * static_cast<double>(h_t_.size()));
    if (pair_) {
      sum_c_ = h_cond_.sum();
      degenerate_mce_ = !(sum_c_ >= kStaticConditionalTotal);
      EntropyMap base(width(), height());
      for (std::size_t p = 0; p < base.size(); ++p) {
        base[p] = std::max(h_t_[p] - (h_prev_[p] + weights_.kappa * h_cond_[p]), 0.0);
      }
      base_deficit_total_ = base.sum();
      base_deficit_ = detail::SummedArea(base);
    }
  }

  static void check_finite(const KeypointState& kps) {
    for (const auto& kp : kps) {
      if (!std::isfinite(kp.x) || !std::isfinite(kp.y) || !std::isfinite(kp.status_logit)) {
        throw ValidationError("non-finite keypoint parameter");
      }
    }
  }

  EntropyMap h_t_;
  EntropyMap h_prev_;
  EntropyMap h_cond_;
  LossWeights weights_;
  HeatmapParams params_;
  OverlapForm form_;
  bool pair_ = false;
  double area_ = 1.0;
  double sum_t_ = 0.0;
  double sum_c_ = 0.0;
  bool degenerate_me_ = false;
  bool degenerate_mce_ = false;
  double base_deficit_total_ = 0.0;
  detail::SummedArea base_deficit_;
};

struct GradientReport {
  std::vector<double> analytic;
  std::vector<double> numeric;
  std::vector<double> relative_error;
  /// Parameters within two steps of a non-smooth set; excluded from the verdict.
  std::vector<bool> flagged;
  double max_relative_error = 0.0;
  std::size_t checked = 0;

  bool passed(double tolerance) const noexcept { return checked > 0 && max_relative_error < tolerance; }
};

/// Value plus branch signature of one function probe.
struct Probe {
  double value = 0.0;
  std::uint64_t signature = 0;
};

/// |a - n| / max(|a|, |n|, floor).
inline double relative_error(double a, double n, double floor = 1e-4) noexcept {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

/// Central differences of f around `params`. f returns a double or a Probe;
/// a parameter is flagged when the signature at p +- step or p +- 2 step
/// differs from the one at p.
template <class F>
GradientReport finite_diff_check(F&& f, std::span<const double> params, std::span<const double> analytic,
                                 std::span<const double> steps) {
  if (analytic.size() != params.size() || steps.size() != params.size()) {
    throw ValidationError("finite_diff_check: length mismatch");
  }
  auto probe = [&](const std::vector<double>& p) -> Probe {
    if constexpr (std::is_same_v<std::invoke_result_t<F&, const std::vector<double>&>, Probe>) {
      return f(p);
    } else {
      return {static_cast<double>(f(p)), 0};
    }
  };
  GradientReport r;
  r.analytic.assign(analytic.begin(), analytic.end());
  r.numeric.resize(params.size());
  r.relative_error.resize(params.size());
  r.flagged.resize(params.size());
  std::vector<double> p(params.begin(), params.end());
  const std::uint64_t base = probe(p).signature;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double step = steps[i];
    if (!(step > 0.0)) throw ValidationError("finite_diff_check: step must be > 0");
    const double x = params[i];
    auto at = [&](double v) {
      p[i] = v;
      Probe q = probe(p);
      p[i] = x;
      return q;
    };
    const Probe plus = at(x + step);
    const Probe minus = at(x - step);
    bool flagged = plus.signature != base || minus.signature != base;
    if (!flagged) flagged = at(x + 2 * step).signature != base || at(x - 2 * step).signature != base;
    r.numeric[i] = (plus.value - minus.value) / (2.0 * step);
    r.relative_error[i] = relative_error(analytic[i], r.numeric[i]);
    r.flagged[i] = flagged;
    if (!flagged) {
      ++r.checked;
      r.max_relative_error = std::max(r.max_relative_error, r.relative_error[i]);
    }
  }
  return r;
}

inline GradientReport finite_diff_check(std::span<const double> params, std::span<const double> analytic,
                                        double step, const std::function<double(const std::vector<double>&)>& f) {
  std::vector<double> steps(params.size(), step);
  return finite_diff_check(f, params, analytic, steps);
}

/// Checks the pair-scope gradient of `objective` at (prev, cur) with the
/// status schedule frozen at its value at the base point.
inline GradientReport check_objective(const MintObjective& objective, const KeypointState& prev,
                                      const KeypointState& cur, double coord_step = 1e-3, double logit_step = 1e-3) {
  const bool pair = objective.pair_mode();
  const GradientScope scope = pair ? GradientScope::kPair : GradientScope::kCurrent;
  const Evaluation base = objective.evaluate(cur, pair ? &prev : nullptr, scope);
  const double schedule = 1.0 - base.loss.me;
  std::vector<double> params = pair ? flatten(prev) : std::vector<double>{};
  const std::vector<double> cur_flat = flatten(cur);
  params.insert(params.end(), cur_flat.begin(), cur_flat.end());
  std::vector<double> steps(params.size());
  for (std::size_t i = 0; i < steps.size(); ++i) steps[i] = (i % 3 == 2) ? logit_step : coord_step;
  const std::size_t n_prev = pair ? prev.size() * kParamsPerKeypoint : 0;
  auto f = [&](const std::vector<double>& p) {
    const KeypointState pv = unflatten(std::span(p).first(n_prev));
    const KeypointState cv = unflatten(std::span(p).subspan(n_prev));
    const Evaluation e = objective.evaluate(cv, pair ? &pv : nullptr, GradientScope::kNone, schedule, true);
    return Probe{e.loss.total, e.signature};
  };
  return finite_diff_check(f, params, base.gradient, steps);
}

}  // namespace entrokeys
