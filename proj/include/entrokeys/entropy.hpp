#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "entrokeys/error.hpp"
#include "entrokeys/field.hpp"
#include "entrokeys/image_io.hpp"
#include "entrokeys/numeric.hpp"
#include "entrokeys/parallel.hpp"

namespace entrokeys {

inline constexpr int kHistogramBins = 256;
inline constexpr double kBinWidth = 1.0 / 256.0;
inline constexpr double kProbabilityFloor = 1e-12;
/// ln 256; upper bound of every per-pixel entropy.
inline const double kMaxEntropy = std::log(256.0);

/// Soft-histogram configuration. Bin b is centered at b/256 and is kBinWidth
/// wide; intensities above 255/256 fall into the top bin.
struct HistogramSpec {
  double bandwidth = 1.0 / 8192.0;
  int region_size = 3;

  void validate() const {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ValidationError("bandwidth must be > 0");
    if (region_size < 3 || region_size % 2 == 0) throw ValidationError("region_size must be odd and >= 3");
  }

  int region_area() const noexcept { return region_size * region_size; }

  /// Bins on either side of a sample's own bin that receive non-negligible
  /// mass (< 1e-17 beyond the window).
  int kernel_half_width() const noexcept {
    const double k = std::ceil(39.2 * bandwidth / kBinWidth);
    return static_cast<int>(std::clamp(k, 1.0, 255.0));
  }
};

namespace detail {

/// logistic(hi) - logistic(lo) for hi >= lo, evaluated on the tail that avoids cancellation.
inline double logistic_difference(double hi, double lo) noexcept {
  if (lo >= 0.0) return logistic(-lo) - logistic(-hi);
  return logistic(hi) - logistic(lo);
}

inline double histogram_coordinate(double v) noexcept { return std::min(v, 255.0 / 256.0); }

/// Mass that one sample deposits in bin b.
inline double bin_mass(double v, int b, double bandwidth) noexcept {
  const double d = histogram_coordinate(v) - b * kBinWidth;
  return logistic_difference((d + 0.5 * kBinWidth) / bandwidth, (d - 0.5 * kBinWidth) / bandwidth);
}

inline double entropy_term(double p) noexcept {
  if (!(p > 0.0)) return 0.0;
  return -p * std::log(std::max(p, kProbabilityFloor));
}

}  // namespace detail

/// Normalized soft histogram of a region given as interleaved RGB samples.
/// p(b) = sum_c hist_c(b) / (3 |R|).
inline std::array<double, kHistogramBins> soft_histogram(std::span<const double> rgb_samples,
                                                         const HistogramSpec& spec) {
  spec.validate();
  if (rgb_samples.empty() || rgb_samples.size() % 3 != 0) {
    throw ValidationError("soft_histogram expects a nonempty list of RGB triples");
  }
  std::array<double, kHistogramBins> p{};
  const int half = spec.kernel_half_width();
  for (double v : rgb_samples) {
    const int center = static_cast<int>(std::lround(detail::histogram_coordinate(v) * 256.0));
    for (int b = std::max(0, center - half); b <= std::min(kHistogramBins - 1, center + half); ++b) {
      p[static_cast<std::size_t>(b)] += detail::bin_mass(v, b, spec.bandwidth);
    }
  }
  const double norm = 1.0 / static_cast<double>(rgb_samples.size());
  for (double& q : p) q *= norm;
  return p;
}

/// Shannon entropy in nats with 0 ln 0 := 0 and p floored before the log.
inline double histogram_entropy(std::span<const double> p) noexcept {
  double h = 0.0;
  for (double q : p) h += detail::entropy_term(q);
  return h;
}

struct EntropyOptions {
  int threads = 1;
  int tile_rows = 8;
  /// When false the whole image is one serial pass (reference for tiling checks).
  bool tiled = true;
};

/// Per-pixel spatial entropy of the region centered at each pixel
/// (replicate padding at the borders).
///
/// Each sample's kernel weights are computed once; each output row then
/// slides a histogram along x, adding the entering column and removing the
/// leaving one. Rows are independent, so tiling and thread count do not
/// change the result.
inline EntropyMap spatial_entropy(const PreprocessedFrame& frame, const HistogramSpec& spec,
                                  const EntropyOptions& options = {}) {
  spec.validate();
  const int w = frame.width();
  const int h = frame.height();
  if (w < 1 || h < 1) throw ValidationError("spatial_entropy: empty frame");
  if (w < spec.region_size || h < spec.region_size) {
    throw ValidationError("spatial_entropy: frame smaller than the entropy region");
  }

  const int half = spec.kernel_half_width();
  const int span = 2 * half + 1;
  const std::size_t n_samples = frame.data().size();
  std::vector<std::int16_t> first_bin(n_samples);
  std::vector<double> weights(n_samples * static_cast<std::size_t>(span));

  const int tile_rows = std::max(1, options.tile_rows);
  const int n_tiles = options.tiled ? (h + tile_rows - 1) / tile_rows : 1;
  const int rows_per_task = options.tiled ? tile_rows : h;
  const int threads = options.tiled ? options.threads : 1;

  parallel_for(n_tiles, threads, [&](int tile) {
    const std::size_t begin = static_cast<std::size_t>(tile) * rows_per_task * w * 3;
    const std::size_t end = std::min(n_samples, static_cast<std::size_t>(tile + 1) * rows_per_task * w * 3);
    for (std::size_t i = begin; i < end; ++i) {
      const double v = frame.data()[i];
      const int center = static_cast<int>(std::lround(detail::histogram_coordinate(v) * 256.0));
      first_bin[i] = static_cast<std::int16_t>(center - half);
      double* wt = &weights[i * span];
      for (int k = 0; k < span; ++k) {
        const int b = center - half + k;
        wt[k] = (b >= 0 && b < kHistogramBins) ? detail::bin_mass(v, b, spec.bandwidth) : 0.0;
      }
    }
  });

  EntropyMap out(w, h);
  const int r = spec.region_size / 2;
  const double norm = 1.0 / (3.0 * spec.region_area());

  parallel_for(n_tiles, threads, [&](int tile) {
    std::array<double, kHistogramBins> hist{};
    std::array<int, kHistogramBins> refs{};
    auto apply_column = [&](int cx, int y, int sign) {
      cx = std::clamp(cx, 0, w - 1);
      for (int dy = -r; dy <= r; ++dy) {
        const int sy = std::clamp(y + dy, 0, h - 1);
        for (int c = 0; c < 3; ++c) {
          const std::size_t i = frame.offset(cx, sy, c);
          const int b0 = first_bin[i];
          const double* wt = &weights[i * span];
          for (int k = 0; k < span; ++k) {
            const int b = b0 + k;
            if (b < 0 || b >= kHistogramBins) continue;
            const auto bi = static_cast<std::size_t>(b);
            refs[bi] += sign;
            hist[bi] = refs[bi] == 0 ? 0.0 : hist[bi] + sign * wt[k];
          }
        }
      }
    };

    const int y_begin = tile * rows_per_task;
    const int y_end = std::min(h, y_begin + rows_per_task);
    for (int y = y_begin; y < y_end; ++y) {
      hist.fill(0.0);
      refs.fill(0);
      for (int dx = -r; dx <= r; ++dx) apply_column(dx, y, +1);
      for (int x = 0; x < w; ++x) {
        if (x > 0) {
          apply_column(x - r - 1, y, -1);
          apply_column(x + r, y, +1);
        }
        double entropy = 0.0;
        for (int b = 0; b < kHistogramBins; ++b) {
          if (refs[static_cast<std::size_t>(b)] > 0) entropy += detail::entropy_term(hist[static_cast<std::size_t>(b)] * norm);
        }
        out(x, y) = std::clamp(entropy, 0.0, kMaxEntropy);
      }
    }
  });
  return out;
}

/// Joint entropy approximated by the pixel-wise max of the marginals.
inline EntropyMap joint_entropy(const EntropyMap& a, const EntropyMap& b) {
  require_same_shape(a, b, "joint_entropy");
  EntropyMap out(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::max(a[i], b[i]);
  return out;
}

/// H(I_t | I_prev) = max(H_t, H_prev) - H_prev = max(H_t - H_prev, 0).
inline EntropyMap conditional_entropy(const EntropyMap& h_t, const EntropyMap& h_prev) {
  require_same_shape(h_t, h_prev, "conditional_entropy");
  EntropyMap out(h_t.width(), h_t.height());
  for (std::size_t i = 0; i < h_t.size(); ++i) out[i] = std::max(h_t[i] - h_prev[i], 0.0);
  return out;
}

/// I(a, b) = H_a + H_b - max(H_a, H_b) = min(H_a, H_b).
inline EntropyMap mutual_information(const EntropyMap& a, const EntropyMap& b) {
  require_same_shape(a, b, "mutual_information");
  EntropyMap out(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::min(a[i], b[i]);
  return out;
}

/// Fano lower bound on the average per-pixel error probability:
///   1 - covered / (N ln|V|) - ln 2 / ln|V|.
/// Serves the masked-entropy, masked-conditional and transport bounds alike;
/// only the covered sum differs.
inline double fano_bound(double covered_entropy_sum, long long n_pixels, int vocabulary = kHistogramBins) {
  if (!(covered_entropy_sum >= 0.0)) throw ValidationError("fano_bound: covered entropy must be >= 0");
  if (n_pixels < 1) throw ValidationError("fano_bound: n_pixels must be >= 1");
  if (vocabulary < 2) throw ValidationError("fano_bound: vocabulary must be >= 2");
  const double log_v = std::log(static_cast<double>(vocabulary));
  return 1.0 - covered_entropy_sum / (static_cast<double>(n_pixels) * log_v) - std::numbers::ln2 / log_v;
}

// ---------------------------------------------------------------------------
// EMAP: "EMAP1\n", "width height\n", then width*height little-endian float32.

inline void write_emap(const EntropyMap& map, const std::filesystem::path& path) {
  std::string out = "EMAP1\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n";
  const std::size_t header = out.size();
  out.resize(header + map.size() * 4);
  for (std::size_t i = 0; i < map.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(map[i]));
    for (int k = 0; k < 4; ++k) out[header + 4 * i + k] = static_cast<char>((bits >> (8 * k)) & 0xffu);
  }
  detail::write_file(path, out);
}

inline EntropyMap read_emap(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  if (!bytes.starts_with("EMAP1\n")) throw ParseError(ParseErrorKind::kWrongMagic, path.string());
  std::size_t pos = 6;
  auto next_int = [&]() {
    long v = 0;
    bool any = false;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      v = v * 10 + (bytes[pos++] - '0');
      any = true;
      if (v > 1'000'000) break;
    }
    if (!any || v > 1'000'000) throw ParseError(ParseErrorKind::kMalformedHeader, path.string());
    return static_cast<int>(v);
  };
  const int w = next_int();
  if (pos >= bytes.size() || bytes[pos++] != ' ') throw ParseError(ParseErrorKind::kMalformedHeader, path.string());
  const int h = next_int();
  if (pos >= bytes.size() || bytes[pos++] != '\n') throw ParseError(ParseErrorKind::kMalformedHeader, path.string());
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - pos < n * 4) throw ParseError(ParseErrorKind::kTruncatedPayload, path.string());
  EntropyMap map(w, h);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + 4 * i + k])) << (8 * k);
    map[i] = std::bit_cast<float>(bits);
  }
  return map;
}

/// 8-bit preview with values scaled by 255 / ln 256.
inline GrayImage entropy_preview(const EntropyMap& map) {
  GrayImage img{map.width(), map.height(), 255, std::vector<std::uint16_t>(map.size())};
  for (std::size_t i = 0; i < map.size(); ++i) {
    img.values[i] = static_cast<std::uint16_t>(std::clamp(std::floor(map[i] * 255.0 / kMaxEntropy + 0.5), 0.0, 255.0));
  }
  return img;
}

}  // namespace entrokeys
