#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "entrokeys/error.hpp"

namespace entrokeys {

/// Interleaved RGB raster with intensities in [0,1], row-major.
template <class Tag>
class RgbRaster {
 public:
  static constexpr int kChannels = 3;

  RgbRaster() = default;

  RgbRaster(int width, int height, double fill = 0.0)
      : RgbRaster(width, height,
                  std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) *
                                          static_cast<std::size_t>(std::max(height, 0)) * kChannels,
                                      fill)) {}

  RgbRaster(int width, int height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 0 || height < 0) throw ValidationError("negative frame dimension");
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * kChannels) {
      throw ValidationError("frame data length must equal width*height*3");
    }
    for (double v : data_) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("frame intensity outside [0,1] or not finite");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  double at(int x, int y, int c) const noexcept { return data_[offset(x, y, c)]; }
  std::span<const double> data() const noexcept { return data_; }

  /// Writes are clamped to [0,1] so the range invariant cannot be broken.
  void set(int x, int y, int c, double v) noexcept { data_[offset(x, y, c)] = std::clamp(v, 0.0, 1.0); }

  std::size_t offset(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) *
               kChannels +
           static_cast<std::size_t>(c);
  }

  friend bool operator==(const RgbRaster& a, const RgbRaster& b) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

struct FrameTag;
struct PreprocessedTag;

using Frame = RgbRaster<FrameTag>;
/// Output of the blur -> sharpen -> divide chain; same layout as Frame.
using PreprocessedFrame = RgbRaster<PreprocessedTag>;

/// 8-bit or 16-bit grayscale image as stored in a P5 PGM.
struct GrayImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint16_t> values;

  std::uint16_t at(int x, int y) const noexcept {
    return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
};

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failure on " + path.string());
}

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

/// Netpbm header: magic, width, height, maxval, then exactly one whitespace byte.
struct NetpbmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t payload_offset = 0;
};

inline NetpbmHeader parse_netpbm_header(std::string_view bytes, std::string_view magic, const std::string& name) {
  if (bytes.size() < 2 || bytes.substr(0, 2) != magic) {
    throw ParseError(ParseErrorKind::kWrongMagic, name + ": expected " + std::string(magic));
  }
  std::size_t pos = 2;
  auto next_int = [&](const char* field) {
    for (;;) {
      while (pos < bytes.size() && is_space(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || bytes[pos] < '0' || bytes[pos] > '9') {
      throw ParseError(ParseErrorKind::kMalformedHeader, name + ": missing " + field);
    }
    long value = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1'000'000) throw ParseError(ParseErrorKind::kMalformedHeader, name + ": " + field + " too large");
      ++pos;
    }
    return static_cast<int>(value);
  };
  NetpbmHeader h;
  h.width = next_int("width");
  h.height = next_int("height");
  h.maxval = next_int("maxval");
  if (pos >= bytes.size() || !is_space(bytes[pos])) {
    throw ParseError(ParseErrorKind::kMalformedHeader, name + ": no separator after maxval");
  }
  h.payload_offset = pos + 1;
  if (h.width <= 0 || h.height <= 0) throw ParseError(ParseErrorKind::kMalformedHeader, name + ": zero dimension");
  return h;
}

inline std::uint8_t quantize_byte(double v) {
  // round half up: 0.5 -> 127.5 -> 128
  return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5));
}

}  // namespace detail

/// Loads a binary P6 PPM with maxval 255; intensities become byte/255.
inline Frame load_ppm(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  const auto h = detail::parse_netpbm_header(bytes, "P6", path.string());
  if (h.maxval != 255) {
    throw ParseError(ParseErrorKind::kUnsupportedMaxval, path.string() + ": maxval " + std::to_string(h.maxval));
  }
  const std::size_t n = static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height) * 3;
  if (bytes.size() - h.payload_offset < n) {
    throw ParseError(ParseErrorKind::kTruncatedPayload, path.string());
  }
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = static_cast<unsigned char>(bytes[h.payload_offset + i]) / 255.0;
  }
  return Frame(h.width, h.height, std::move(data));
}

/// Writes a P6 PPM, maxval 255, bytes = round(v*255) with halves rounded up.
template <class Tag>
void save_ppm(const RgbRaster<Tag>& frame, const std::filesystem::path& path) {
  std::string out = "P6\n" + std::to_string(frame.width()) + " " + std::to_string(frame.height()) + "\n255\n";
  const auto header = out.size();
  out.resize(header + frame.data().size());
  for (std::size_t i = 0; i < frame.data().size(); ++i) {
    out[header + i] = static_cast<char>(detail::quantize_byte(frame.data()[i]));
  }
  detail::write_file(path, out);
}

/// Loads a P5 PGM with 1 <= maxval <= 65535 (two bytes, big-endian, above 255).
inline GrayImage load_pgm(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  const auto h = detail::parse_netpbm_header(bytes, "P5", path.string());
  if (h.maxval < 1 || h.maxval > 65535) {
    throw ParseError(ParseErrorKind::kUnsupportedMaxval, path.string() + ": maxval " + std::to_string(h.maxval));
  }
  const std::size_t n = static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height);
  const std::size_t bpp = h.maxval > 255 ? 2 : 1;
  if (bytes.size() - h.payload_offset < n * bpp) throw ParseError(ParseErrorKind::kTruncatedPayload, path.string());
  GrayImage img{h.width, h.height, h.maxval, std::vector<std::uint16_t>(n)};
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + h.payload_offset);
  for (std::size_t i = 0; i < n; ++i) {
    img.values[i] = bpp == 1 ? p[i] : static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]);
    if (img.values[i] > h.maxval) {
      throw ParseError(ParseErrorKind::kMalformedRecord, path.string() + ": sample exceeds maxval");
    }
  }
  return img;
}

inline void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  if (img.maxval < 1 || img.maxval > 65535) throw ValidationError("pgm maxval must be in [1, 65535]");
  if (img.values.size() != static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height)) {
    throw ValidationError("pgm data length must equal width*height");
  }
  std::string out =
      "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n" + std::to_string(img.maxval) + "\n";
  const bool wide = img.maxval > 255;
  for (std::uint16_t v : img.values) {
    v = std::min<std::uint16_t>(v, static_cast<std::uint16_t>(img.maxval));
    if (wide) out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
  }
  detail::write_file(path, out);
}

/// Files named <prefix>NNNNNN<ext> in `dir`, sorted lexicographically (= temporal order).
inline std::vector<std::filesystem::path> list_sequence(const std::filesystem::path& dir, std::string_view prefix,
                                                        std::string_view ext) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > prefix.size() + ext.size() && name.starts_with(prefix) && name.ends_with(ext)) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

inline std::string sequence_name(std::string_view prefix, int index, std::string_view ext) {
  char digits[16];
  std::snprintf(digits, sizeof digits, "%06d", index);
  return std::string(prefix) + digits + std::string(ext);
}

inline std::vector<Frame> load_frames(const std::filesystem::path& dir) {
  std::vector<Frame> frames;
  for (const auto& p : list_sequence(dir, "frame_", ".ppm")) frames.push_back(load_ppm(p));
  if (frames.empty()) throw IoError("no frame_*.ppm files in " + dir.string());
  return frames;
}

struct PreprocessOptions {
  int blur_radius = 2;  // 5x5 box
  double epsilon = 1e-6;
};

/// Entropy-layer preprocessing, per channel:
///   smooth = box mean over (2r+1)^2 with replicate padding
///   sharp  = clamp(2 I - smooth, 0, 1)
///   out    = clamp(sharp / (smooth + eps), 0, 1)
inline PreprocessedFrame preprocess(const Frame& frame, const PreprocessOptions& opt = {}) {
  if (opt.blur_radius < 1) throw ValidationError("blur_radius must be >= 1");
  if (!(opt.epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
  const int w = frame.width();
  const int h = frame.height();
  const int r = opt.blur_radius;
  const double inv_area = 1.0 / static_cast<double>((2 * r + 1) * (2 * r + 1));
  std::vector<double> out(frame.data().size());
  std::vector<double> rows(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int c = 0; c < 3; ++c) {
    // Horizontal box sums; each output is summed fresh so no running-sum drift.
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int dx = -r; dx <= r; ++dx) s += frame.at(std::clamp(x + dx, 0, w - 1), y, c);
        rows[static_cast<std::size_t>(y) * w + x] = s;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int dy = -r; dy <= r; ++dy) s += rows[static_cast<std::size_t>(std::clamp(y + dy, 0, h - 1)) * w + x];
        const double smooth = s * inv_area;
        const double sharp = std::clamp(2.0 * frame.at(x, y, c) - smooth, 0.0, 1.0);
        out[frame.offset(x, y, c)] = std::clamp(sharp / (smooth + opt.epsilon), 0.0, 1.0);
      }
    }
  }
  return PreprocessedFrame(w, h, std::move(out));
}

}  // namespace entrokeys
