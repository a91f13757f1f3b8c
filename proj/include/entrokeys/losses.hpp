#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "entrokeys/error.hpp"
#include "entrokeys/field.hpp"
#include "entrokeys/geometry.hpp"

namespace entrokeys {

/// Overlap loss variants: the hinge (1/K) max(max sum G - beta, 0) and the
/// printed form (1/K) min(max sum G - beta, 0), kept for comparison runs.
enum class OverlapForm { kHinge, kLiteral };

inline std::string_view to_string(OverlapForm f) { return f == OverlapForm::kHinge ? "hinge" : "literal"; }

inline OverlapForm parse_overlap_form(std::string_view s) {
  if (s == "hinge") return OverlapForm::kHinge;
  if (s == "literal") return OverlapForm::kLiteral;
  throw ValidationError("overlap_form must be 'hinge' or 'literal'");
}

struct LossWeights {
  double lambda_me = 100.0;
  double lambda_mce = 100.0;
  double lambda_it = 20.0;
  double lambda_o = 30.0;
  double lambda_s = 10.0;
  double kappa = 0.9;
  double m_d = 1.0;
  double beta = 4.0;

  void validate() const {
    for (double v : {lambda_me, lambda_mce, lambda_it, lambda_o, lambda_s, m_d, beta}) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("loss weights must be finite and >= 0");
    }
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw ValidationError("kappa must be in [0, 1]");
  }
};

/// Mean entropy per pixel below which a frame counts as blank.
inline constexpr double kBlankEntropyPerPixel = 1e-4;
/// Conditional-entropy total below which consecutive frames count as static.
inline constexpr double kStaticConditionalTotal = 1e-9;

struct RatioLoss {
  double value = 0.0;
  bool degenerate = false;
};

namespace detail {

template <class Tag>
RatioLoss uncovered_fraction(const Field<Tag>& h, const AggregatedMask& m, double degenerate_below) {
  require_same_shape(h, m, "masked entropy loss");
  const double total = h.sum();
  if (!(total >= degenerate_below) || total <= 0.0) return {0.0, true};
  double covered = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) covered += h[i] * m[i];
  return {1.0 - covered / total, false};
}

}  // namespace detail

/// 1 - sum(H M) / sum(H); blank frames give 0 with the degenerate flag set.
inline RatioLoss masked_entropy_loss(const EntropyMap& h_t, const AggregatedMask& m) {
  return detail::uncovered_fraction(h_t, m, kBlankEntropyPerPixel * static_cast<double>(h_t.size()));
}

/// Same ratio on the conditional entropy; static frame pairs give 0.
inline RatioLoss masked_conditional_entropy_loss(const EntropyMap& h_cond, const AggregatedMask& m) {
  return detail::uncovered_fraction(h_cond, m, kStaticConditionalTotal);
}

struct TransportLoss {
  double total = 0.0;
  /// Per keypoint: reconstruction deficit / A_h + m_d * d_i.
  std::vector<double> terms;
  /// Squared displacement d_i of each keypoint between the two frames.
  std::vector<double> distances;
};

/// Information transport loss. For keypoint i:
///   S_i = H_prev (1 - hp_i)(1 - ht_i)
///   T_i = H_t ht_i + kappa H_cond (1 - ht_i)
///   R_i = S_i + T_i
///   term_i = sum_px max(H_t - min(H_t, R_i), 0) / A_h + m_d |p_t - p_prev|^2
inline TransportLoss information_transport_loss(const EntropyMap& h_t, const EntropyMap& h_prev,
                                                const EntropyMap& h_cond, const KeypointState& kp_t,
                                                const KeypointState& kp_prev, std::span<const Heatmap> heatmaps_t,
                                                std::span<const Heatmap> heatmaps_prev, const LossWeights& weights,
                                                double heatmap_area_px) {
  require_same_shape(h_t, h_prev, "information_transport_loss");
  require_same_shape(h_t, h_cond, "information_transport_loss");
  const std::size_t k = kp_t.size();
  if (kp_prev.size() != k || heatmaps_t.size() != k || heatmaps_prev.size() != k) {
    throw ValidationError("information_transport_loss: keypoint/heatmap counts differ");
  }
  if (!(heatmap_area_px > 0.0)) throw ValidationError("information_transport_loss: heatmap area must be > 0");
  TransportLoss out;
  for (std::size_t i = 0; i < k; ++i) {
    const Heatmap& ht = heatmaps_t[i];
    const Heatmap& hp = heatmaps_prev[i];
    require_same_shape(h_t, ht, "information_transport_loss");
    require_same_shape(h_t, hp, "information_transport_loss");
    double deficit = 0.0;
    for (std::size_t p = 0; p < h_t.size(); ++p) {
      const double source = h_prev[p] * (1.0 - hp[p]) * (1.0 - ht[p]);
      const double target = h_t[p] * ht[p] + weights.kappa * h_cond[p] * (1.0 - ht[p]);
      const double reconstructed = source + target;
      deficit += std::max(h_t[p] - std::min(h_t[p], reconstructed), 0.0);
    }
    const Point a = clamp_to_image({kp_t[i].x, kp_t[i].y}, h_t.width(), h_t.height());
    const Point b = clamp_to_image({kp_prev[i].x, kp_prev[i].y}, h_t.width(), h_t.height());
    const double d = (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
    out.distances.push_back(d);
    out.terms.push_back(deficit / heatmap_area_px + weights.m_d * d);
    out.total += out.terms.back();
  }
  return out;
}

/// Overlap of the keypoints' Gaussians, measured at the hottest pixel of their sum.
inline double overlap_loss(std::span<const GaussianField> gaussians, double beta,
                           OverlapForm form = OverlapForm::kHinge) {
  if (gaussians.empty()) throw ValidationError("overlap_loss: K must be >= 1");
  GaussianField sum(gaussians.front().width(), gaussians.front().height());
  for (const auto& g : gaussians) {
    require_same_shape(g, sum, "overlap_loss");
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += g[i];
  }
  const double excess = sum.max() - beta;
  const double k = static_cast<double>(gaussians.size());
  return (form == OverlapForm::kHinge ? std::max(excess, 0.0) : std::min(excess, 0.0)) / k;
}

/// Mean soft status.
inline double status_loss(std::span<const double> statuses) {
  if (statuses.empty()) throw ValidationError("status_loss: K must be >= 1");
  double s = 0.0;
  for (double v : statuses) s += v;
  return s / static_cast<double>(statuses.size());
}

struct LossComponents {
  double me = 0.0;
  double mce = 0.0;
  double it = 0.0;
  double overlap = 0.0;
  double status = 0.0;
};

struct LossBreakdown {
  double me = 0.0;
  double mce = 0.0;
  double it = 0.0;
  double overlap = 0.0;
  double status = 0.0;
  double total = 0.0;
  std::vector<double> it_terms;
  std::vector<double> distances;
  bool degenerate_me = false;
  bool degenerate_mce = false;
};

/// total = l_me ME + l_mce MCE + l_it IT + l_o O + (1 - ME) l_s S.
/// The (1 - ME) schedule is a constant as far as gradients are concerned.
inline LossBreakdown mint_loss(const LossComponents& c, const LossWeights& w) {
  LossBreakdown out;
  out.me = c.me;
  out.mce = c.mce;
  out.it = c.it;
  out.overlap = c.overlap;
  out.status = c.status;
  out.total = w.lambda_me * c.me + w.lambda_mce * c.mce + w.lambda_it * c.it + w.lambda_o * c.overlap +
              (1.0 - c.me) * w.lambda_s * c.status;
  return out;
}

}  // namespace entrokeys
