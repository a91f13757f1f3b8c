#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "entrokeys/error.hpp"
#include "entrokeys/image_io.hpp"
#include "entrokeys/trajectory.hpp"

namespace entrokeys {

/// Per-pixel object labels of one frame; 0 is background.
struct ObjectMask {
  int width = 0;
  int height = 0;
  std::vector<int> labels;
  /// Number of object ids the mask declares (PGM maxval); labels may be absent.
  int declared = 0;

  ObjectMask() = default;
  ObjectMask(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

  int at(int x, int y) const noexcept { return labels[static_cast<std::size_t>(y) * width + x]; }
  int& at(int x, int y) noexcept { return labels[static_cast<std::size_t>(y) * width + x]; }
  int max_label() const noexcept { return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()); }

  /// Pixel count per label, index 0 = background.
  std::vector<long> areas() const {
    std::vector<long> a(static_cast<std::size_t>(std::max(max_label(), declared)) + 1, 0);
    for (int l : labels) ++a[static_cast<std::size_t>(l)];
    return a;
  }

  /// Label under a continuous position: coordinates are clamped into the
  /// image and rounded half up.
  int label_at(double x, double y) const noexcept {
    const int px = std::clamp(static_cast<int>(std::floor(x + 0.5)), 0, width - 1);
    const int py = std::clamp(static_cast<int>(std::floor(y + 0.5)), 0, height - 1);
    return at(px, py);
  }
};

inline ObjectMask mask_from_gray(const GrayImage& g) {
  ObjectMask m(g.width, g.height);
  for (std::size_t i = 0; i < g.values.size(); ++i) m.labels[i] = g.values[i];
  m.declared = g.maxval;
  return m;
}

/// PGM with maxval = number of objects (at least 1).
inline GrayImage mask_to_gray(const ObjectMask& m, int n_objects) {
  GrayImage g;
  g.width = m.width;
  g.height = m.height;
  g.maxval = std::max(1, n_objects);
  for (int l : m.labels) g.values.push_back(static_cast<std::uint16_t>(l));
  return g;
}

inline std::vector<ObjectMask> load_masks(const std::filesystem::path& dir) {
  std::vector<ObjectMask> masks;
  for (const auto& p : list_sequence(dir, "mask_", ".pgm")) masks.push_back(mask_from_gray(load_pgm(p)));
  if (masks.empty()) throw IoError("no mask_*.pgm files in " + dir.string());
  return masks;
}

struct FrameMetrics {
  int frame = 0;
  int n_gt = 0;
  int detected = 0;
  int tracked = 0;
  std::optional<double> dop;
  std::optional<double> top;
  double uak = 0.0;
  std::optional<double> rak;
};

struct MetricsReport {
  std::optional<double> dop;
  std::optional<double> top;
  double uak = 0.0;
  std::optional<double> rak;
  double a_k = 0.0;
  /// (frame, declared object) pairs with an empty mask; left out of every rate.
  int skipped_zero_area = 0;
  std::vector<FrameMetrics> per_frame;
};

/// Mean object area over every (frame, object) with a nonempty mask.
inline double a_k_default(const std::vector<ObjectMask>& masks) {
  double total = 0.0;
  long count = 0;
  for (const auto& m : masks) {
    const auto a = m.areas();
    for (std::size_t l = 1; l < a.size(); ++l) {
      if (a[l] == 0) continue;
      total += static_cast<double>(a[l]);
      ++count;
    }
  }
  if (count == 0) throw ValidationError("a_k_default: no objects in the masks");
  return total / static_cast<double>(count);
}

/// DOP, TOP, UAK and RAK for one video. Only active keypoints are
/// assignments. DOP averages frames with objects; TOP averages the same frames
/// from the second one on, since frame 0 has no predecessor.
inline MetricsReport evaluate_metrics(const Trajectory& tr, const std::vector<ObjectMask>& masks,
                                      std::optional<double> a_k = {}) {
  if (tr.frames.size() != masks.size()) {
    throw ValidationError("frame count mismatch: trajectory has " + std::to_string(tr.frames.size()) +
                          " frames, masks " + std::to_string(masks.size()));
  }
  if (masks.empty()) throw ValidationError("evaluate: no frames");
  for (const auto& m : masks) {
    if (m.width != masks.front().width || m.height != masks.front().height) {
      throw ValidationError("evaluate: mask dimensions differ between frames");
    }
  }
  MetricsReport rep;
  int n_labels = 0;
  for (const auto& m : masks) n_labels = std::max(n_labels, m.max_label());
  if (a_k.has_value()) {
    if (!(*a_k > 0.0)) throw ValidationError("a_k must be > 0");
    rep.a_k = *a_k;
  } else {
    rep.a_k = n_labels > 0 ? a_k_default(masks) : 0.0;
  }

  double dop_sum = 0.0;
  double top_sum = 0.0;
  int gt_frames = 0;
  int top_frames = 0;
  double uak_sum = 0.0;
  double rak_sum = 0.0;
  long rak_count = 0;
  std::vector<int> prev_labels;
  for (std::size_t t = 0; t < masks.size(); ++t) {
    const ObjectMask& m = masks[t];
    const auto areas = m.areas();
    FrameMetrics fm;
    fm.frame = tr.frames[t].frame;
    std::vector<int> labels;
    std::vector<int> counts(areas.size(), 0);
    int background = 0;
    for (const auto& k : tr.frames[t].keypoints) {
      const int l = k.active ? m.label_at(k.x, k.y) : -1;
      labels.push_back(l);
      if (l == 0) ++background;
      if (l > 0) ++counts[static_cast<std::size_t>(l)];
    }
    fm.uak = background;
    uak_sum += background;
    double frame_rak = 0.0;
    int frame_objects = 0;
    for (std::size_t obj = 1; obj < areas.size(); ++obj) {
      if (areas[obj] == 0) {
        ++rep.skipped_zero_area;
        continue;
      }
      ++fm.n_gt;
      ++frame_objects;
      if (counts[obj] > 0) ++fm.detected;
      bool tracked = false;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != static_cast<int>(obj)) continue;
        if (t > 0 && i < prev_labels.size() && prev_labels[i] == static_cast<int>(obj)) tracked = true;
      }
      if (tracked) ++fm.tracked;
      if (rep.a_k > 0.0) {
        const double area = static_cast<double>(areas[obj]);
        frame_rak += std::abs(area - rep.a_k * counts[obj]) / area;
      }
    }
    if (fm.n_gt > 0) {
      fm.dop = static_cast<double>(fm.detected) / fm.n_gt;
      dop_sum += *fm.dop;
      ++gt_frames;
      if (t > 0) {
        fm.top = static_cast<double>(fm.tracked) / fm.n_gt;
        top_sum += *fm.top;
        ++top_frames;
      }
      fm.rak = frame_rak / frame_objects;
      rak_sum += frame_rak;
      rak_count += frame_objects;
    }
    rep.per_frame.push_back(fm);
    prev_labels = std::move(labels);
  }
  if (gt_frames > 0) {
    rep.dop = dop_sum / gt_frames;
  }
  if (top_frames > 0) rep.top = top_sum / top_frames;
  rep.uak = uak_sum / static_cast<double>(masks.size());
  if (rak_count > 0) rep.rak = rak_sum / static_cast<double>(rak_count);
  return rep;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : r.per_frame) {
    frames.push_back({{"frame", f.frame},
                      {"n_gt", f.n_gt},
                      {"detected", f.detected},
                      {"tracked", f.tracked},
                      {"dop", opt(f.dop)},
                      {"top", opt(f.top)},
                      {"uak", f.uak},
                      {"rak", opt(f.rak)}});
  }
  return {{"dop", opt(r.dop)},
          {"top", opt(r.top)},
          {"uak", r.uak},
          {"rak", opt(r.rak)},
          {"a_k", r.a_k},
          {"skipped_zero_area", r.skipped_zero_area},
          {"top_le_dop", !r.dop || !r.top || *r.top <= *r.dop},
          {"per_frame", std::move(frames)}};
}

}  // namespace entrokeys
