#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "entrokeys/error.hpp"
#include "entrokeys/geometry.hpp"
#include "entrokeys/image_io.hpp"
#include "entrokeys/losses.hpp"

namespace entrokeys {

struct TrackedKeypoint {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  double status = 0.0;
  bool active = false;
};

struct TrajectoryFrame {
  int frame = 0;
  std::vector<TrackedKeypoint> keypoints;
  LossBreakdown loss;
};

/// Keypoint index i denotes the same entity in every frame.
struct Trajectory {
  std::vector<TrajectoryFrame> frames;
  /// Set when a frame's entropy total was degenerate (blank input).
  bool degenerate = false;

  std::size_t active_count(std::size_t t) const {
    std::size_t n = 0;
    for (const auto& k : frames.at(t).keypoints) n += k.active ? 1 : 0;
    return n;
  }
};

inline TrajectoryFrame make_trajectory_frame(int frame, const KeypointState& kps, double threshold) {
  TrajectoryFrame f;
  f.frame = frame;
  for (std::size_t i = 0; i < kps.size(); ++i) {
    const double s = kps[i].status();
    f.keypoints.push_back({static_cast<int>(i), kps[i].x, kps[i].y, s, s > threshold});
  }
  return f;
}

inline nlohmann::json to_json(const LossBreakdown& l) {
  return {{"me", l.me}, {"mce", l.mce}, {"it", l.it}, {"overlap", l.overlap}, {"status", l.status}, {"total", l.total}};
}

inline std::string to_jsonl(const Trajectory& tr) {
  std::string out;
  for (const auto& f : tr.frames) {
    nlohmann::json kps = nlohmann::json::array();
    for (const auto& k : f.keypoints) {
      kps.push_back({{"id", k.id}, {"x", k.x}, {"y", k.y}, {"status", k.status}, {"active", k.active}});
    }
    nlohmann::json rec = {{"frame", f.frame}, {"keypoints", std::move(kps)}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

inline Trajectory parse_jsonl(const std::string& text) {
  Trajectory tr;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      TrajectoryFrame f;
      f.frame = rec.at("frame").get<int>();
      for (const auto& k : rec.at("keypoints")) {
        f.keypoints.push_back({k.at("id").get<int>(), k.at("x").get<double>(), k.at("y").get<double>(),
                               k.at("status").get<double>(), k.at("active").get<bool>()});
      }
      tr.frames.push_back(std::move(f));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(ParseErrorKind::kMalformedRecord,
                       "trajectory line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return tr;
}

inline void save_trajectory(const Trajectory& tr, const std::filesystem::path& path) {
  detail::write_file(path, to_jsonl(tr));
}

inline Trajectory load_trajectory(const std::filesystem::path& path) { return parse_jsonl(detail::read_file(path)); }

/// Fixed color of keypoint `id`.
inline std::array<double, 3> keypoint_color(int id) {
  static constexpr std::array<std::array<double, 3>, 10> kPalette{{
      {1.0, 0.0, 0.0},
      {0.0, 1.0, 0.0},
      {0.0, 0.4, 1.0},
      {1.0, 1.0, 0.0},
      {1.0, 0.0, 1.0},
      {0.0, 1.0, 1.0},
      {1.0, 0.5, 0.0},
      {0.5, 0.0, 1.0},
      {1.0, 1.0, 1.0},
      {0.0, 0.0, 0.0},
  }};
  return kPalette[static_cast<std::size_t>(id) % kPalette.size()];
}

/// Copy of `frame` with a 3x3 square at each active keypoint.
inline Frame render_overlay(const Frame& frame, const TrajectoryFrame& tf) {
  Frame out = frame;
  for (const auto& k : tf.keypoints) {
    if (!k.active) continue;
    const int cx = static_cast<int>(std::floor(k.x + 0.5));
    const int cy = static_cast<int>(std::floor(k.y + 0.5));
    const auto color = keypoint_color(k.id);
    for (int y = cy - 1; y <= cy + 1; ++y) {
      for (int x = cx - 1; x <= cx + 1; ++x) {
        if (x < 0 || y < 0 || x >= frame.width() || y >= frame.height()) continue;
        for (int c = 0; c < 3; ++c) out.set(x, y, c, color[static_cast<std::size_t>(c)]);
      }
    }
  }
  return out;
}

}  // namespace entrokeys
