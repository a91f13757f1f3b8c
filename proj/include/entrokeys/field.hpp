#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "entrokeys/error.hpp"

namespace entrokeys {

/// Single-channel row-major scalar raster. The tag keeps entropy maps,
/// heatmaps, masks and feature maps from being mixed up by accident.
/// Pixel (x, y): x = column, y = row, origin top-left.
template <class Tag>
class Field {
 public:
  Field() = default;

  Field(int width, int height, double fill = 0.0)
      : width_(checked_dim(width)), height_(checked_dim(height)),
        values_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

  Field(int width, int height, std::vector<double> values)
      : width_(checked_dim(width)), height_(checked_dim(height)), values_(std::move(values)) {
    if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw ValidationError("field data length does not match width*height");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double operator()(int x, int y) const noexcept { return values_[index(x, y)]; }
  double& operator()(int x, int y) noexcept { return values_[index(x, y)]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  double sum() const noexcept { return std::accumulate(values_.begin(), values_.end(), 0.0); }
  double max() const noexcept {
    return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
  }

  template <class Other>
  bool same_shape(const Field<Other>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Field& a, const Field& b) = default;

 private:
  static int checked_dim(int d) {
    if (d < 0) throw ValidationError("negative field dimension");
    return d;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

struct EntropyTag;
struct GaussianTag;
struct HeatmapTag;
struct MaskTag;
struct FeatureTag;

/// Per-pixel spatial entropy in nats.
using EntropyMap = Field<EntropyTag>;
/// exp(-d^2 / 2 sigma^2) around a keypoint; peak 1.
using GaussianField = Field<GaussianTag>;
/// Thresholded, scaled and clamped Gaussian; values in [0,1].
using Heatmap = Field<HeatmapTag>;
/// Saturated status-weighted sum of heatmaps; values in [0,1].
using AggregatedMask = Field<MaskTag>;
/// Nonnegative per-pixel activations emitted by a keypoint model.
using FeatureMap = Field<FeatureTag>;

template <class A, class B>
void require_same_shape(const Field<A>& a, const Field<B>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ValidationError(std::string(what) + ": dimension mismatch (" + std::to_string(a.width()) + "x" +
                          std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                          std::to_string(b.height()) + ")");
  }
}

/// Pixel-wise multiply of any two same-shaped fields; result carries the tag of `a`.
template <class A, class B>
Field<A> multiply(const Field<A>& a, const Field<B>& b) {
  require_same_shape(a, b, "multiply");
  Field<A> out(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

}  // namespace entrokeys
