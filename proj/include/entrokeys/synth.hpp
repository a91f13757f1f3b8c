#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "entrokeys/error.hpp"
#include "entrokeys/image_io.hpp"
#include "entrokeys/metrics.hpp"
#include "entrokeys/parallel.hpp"

namespace entrokeys {

using Color = std::array<double, 3>;

enum class Shape { kDisc, kSquare };

struct SceneObject {
  Shape shape = Shape::kDisc;
  /// Disc radius or square half-width, in pixels.
  double radius = 8.0;
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  /// Inclusive, 0-based frame interval during which the object exists.
  int enter = 0;
  int exit = std::numeric_limits<int>::max();
  Color color_a{0.9, 0.15, 0.15};
  Color color_b{0.15, 0.15, 0.9};
  /// 2-color checker at 2-px pitch; false fills with color_a only.
  bool textured = true;
};

struct SceneSpec {
  int width = 96;
  int height = 96;
  int frames = 10;
  std::uint64_t seed = 0;
  Color background{0.5, 0.5, 0.5};
  /// Amplitude of static uniform noise added to the background.
  double noise = 0.0;
  /// Later objects occlude earlier ones.
  std::vector<SceneObject> objects;

  void validate() const {
    if (width < 1 || height < 1) throw ValidationError("scene dimensions must be >= 1");
    if (frames < 1) throw ValidationError("scene frame count must be >= 1");
    if (!(noise >= 0.0 && noise <= 1.0)) throw ValidationError("background noise must be in [0, 1]");
    for (std::size_t i = 0; i < objects.size(); ++i) {
      const auto& o = objects[i];
      const std::string id = "object " + std::to_string(i + 1);
      if (!(o.radius >= 3.0)) throw ValidationError(id + ": radius must be >= 3");
      if (std::abs(o.vx) > o.radius || std::abs(o.vy) > o.radius) {
        throw ValidationError(id + ": speed per frame must not exceed the radius");
      }
      if (!(o.x >= 0.0 && o.x <= width - 1 && o.y >= 0.0 && o.y <= height - 1)) {
        throw ValidationError(id + ": initial position outside the canvas");
      }
      if (o.enter < 0 || o.exit < o.enter) throw ValidationError(id + ": lifetime must satisfy 0 <= enter <= exit");
    }
  }
};

struct ObjectCenter {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
};

struct RenderedScene {
  std::vector<Frame> frames;
  std::vector<ObjectMask> masks;
  /// Centers of the objects alive in each frame.
  std::vector<std::vector<ObjectCenter>> centers;
};

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Advances one coordinate by v with elastic reflection off [lo, hi].
inline void bounce(double& p, double& v, double lo, double hi) {
  p += v;
  if (hi <= lo) {
    p = lo;
    return;
  }
  for (int guard = 0; guard < 8 && (p < lo || p > hi); ++guard) {
    if (p < lo) p = 2.0 * lo - p;
    if (p > hi) p = 2.0 * hi - p;
    v = -v;
  }
}

inline bool covers(const SceneObject& o, double cx, double cy, int x, int y) {
  const double dx = x - cx;
  const double dy = y - cy;
  if (o.shape == Shape::kDisc) return dx * dx + dy * dy <= o.radius * o.radius;
  return std::abs(dx) <= o.radius && std::abs(dy) <= o.radius;
}

inline Color object_color(const SceneObject& o, double cx, double cy, int x, int y) {
  if (!o.textured) return o.color_a;
  const long cell = static_cast<long>(std::floor((x - cx) / 2.0)) + static_cast<long>(std::floor((y - cy) / 2.0));
  return (cell & 1) ? o.color_b : o.color_a;
}

}  // namespace detail

/// Object centers per frame, integrated at unit timestep from each object's
/// entry frame; centers bounce so the shape stays inside the canvas.
inline std::vector<std::vector<ObjectCenter>> object_trajectories(const SceneSpec& spec) {
  std::vector<std::vector<ObjectCenter>> out(static_cast<std::size_t>(spec.frames));
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    const auto& o = spec.objects[i];
    double x = o.x;
    double y = o.y;
    double vx = o.vx;
    double vy = o.vy;
    const double lo_x = std::min(o.radius, (spec.width - 1) / 2.0);
    const double lo_y = std::min(o.radius, (spec.height - 1) / 2.0);
    for (int t = o.enter; t < spec.frames && t <= o.exit; ++t) {
      if (t > o.enter) {
        detail::bounce(x, vx, lo_x, spec.width - 1 - lo_x);
        detail::bounce(y, vy, lo_y, spec.height - 1 - lo_y);
      }
      out[static_cast<std::size_t>(t)].push_back({static_cast<int>(i) + 1, x, y});
    }
  }
  return out;
}

inline RenderedScene render(const SceneSpec& spec, int threads = 1) {
  spec.validate();
  RenderedScene scene;
  scene.centers = object_trajectories(spec);
  const int w = spec.width;
  const int h = spec.height;
  Frame background(w, h);
  std::mt19937_64 rng(spec.seed);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double n = spec.noise > 0.0 ? spec.noise * (2.0 * detail::unit_uniform(rng) - 1.0) : 0.0;
        background.set(x, y, c, spec.background[static_cast<std::size_t>(c)] + n);
      }
    }
  }
  scene.frames.assign(static_cast<std::size_t>(spec.frames), background);
  scene.masks.assign(static_cast<std::size_t>(spec.frames), ObjectMask(w, h));
  parallel_for(spec.frames, threads, [&](int t) {
    Frame& f = scene.frames[static_cast<std::size_t>(t)];
    ObjectMask& m = scene.masks[static_cast<std::size_t>(t)];
    m.declared = static_cast<int>(spec.objects.size());
    for (const auto& c : scene.centers[static_cast<std::size_t>(t)]) {
      const auto& o = spec.objects[static_cast<std::size_t>(c.id - 1)];
      const int x0 = std::max(0, static_cast<int>(std::floor(c.x - o.radius)));
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(c.x + o.radius)));
      const int y0 = std::max(0, static_cast<int>(std::floor(c.y - o.radius)));
      const int y1 = std::min(h - 1, static_cast<int>(std::ceil(c.y + o.radius)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if (!detail::covers(o, c.x, c.y, x, y)) continue;
          const Color col = detail::object_color(o, c.x, c.y, x, y);
          for (int ch = 0; ch < 3; ++ch) f.set(x, y, ch, col[static_cast<std::size_t>(ch)]);
          m.at(x, y) = c.id;
        }
      }
    }
  });
  return scene;
}

inline SceneObject disc(double x, double y, double radius, double vx = 0.0, double vy = 0.0) {
  SceneObject o;
  o.x = x;
  o.y = y;
  o.radius = radius;
  o.vx = vx;
  o.vy = vy;
  return o;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"static3", "mixed", "comeandgo", "occlusion", "lowtexture"};
  return names;
}

inline SceneSpec preset(std::string_view name, std::uint64_t seed = 0) {
  SceneSpec s;
  s.seed = seed;
  if (name == "static3") {
    s.frames = 10;
    s.objects = {disc(24, 24, 8), disc(70, 30, 8), disc(44, 70, 8)};
    s.objects[1].color_a = {0.15, 0.8, 0.2};
    s.objects[2].color_b = {0.95, 0.9, 0.1};
  } else if (name == "mixed") {
    s.frames = 40;
    s.objects = {disc(20, 20, 8), disc(76, 20, 8), disc(14, 52, 8, 2.0, 0.0), disc(82, 80, 8, -2.0, 0.0)};
    s.objects[1].color_a = {0.15, 0.8, 0.2};
    s.objects[2].color_b = {0.95, 0.9, 0.1};
    s.objects[3].color_a = {0.9, 0.5, 0.1};
    s.objects[3].color_b = {0.1, 0.7, 0.8};
  } else if (name == "comeandgo") {
    s.frames = 60;
    s.objects = {disc(24, 24, 8), disc(56, 64, 8, 1.0, 0.0)};
    s.objects[1].enter = 10;
    s.objects[1].exit = 40;
    s.objects[1].color_a = {0.15, 0.8, 0.2};
    s.objects[1].color_b = {0.95, 0.9, 0.1};
  } else if (name == "occlusion") {
    s.frames = 40;
    s.objects = {disc(12, 40, 8, 2.0, 0.0), disc(84, 50, 8, -2.0, 0.0)};
    s.objects[1].color_a = {0.15, 0.8, 0.2};
    s.objects[1].color_b = {0.95, 0.9, 0.1};
  } else if (name == "lowtexture") {
    s.frames = 20;
    s.objects = {disc(30, 30, 8), disc(66, 60, 8, 1.5, 0.0)};
    for (auto& o : s.objects) {
      o.textured = false;
      o.color_a = {0.55, 0.55, 0.55};
    }
  } else {
    throw ValidationError("unknown preset '" + std::string(name) + "'");
  }
  return s;
}

namespace detail {

inline Color json_color(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw ValidationError("colors must have 3 components");
  return {v[0], v[1], v[2]};
}

}  // namespace detail

/// Scene from JSON:
/// {"width":96,"height":96,"frames":40,"seed":1,
///  "background":{"color":[r,g,b],"noise":0.02},
///  "objects":[{"shape":"disc","radius":8,"position":[x,y],"velocity":[vx,vy],
///              "lifetime":[enter,exit],"colors":[[r,g,b],[r,g,b]],"textured":true}]}
inline SceneSpec scene_from_json(const nlohmann::json& j) {
  SceneSpec s;
  try {
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.frames = j.value("frames", s.frames);
    s.seed = j.value("seed", s.seed);
    if (j.contains("background")) {
      const auto& b = j.at("background");
      if (b.contains("color")) s.background = detail::json_color(b.at("color"));
      s.noise = b.value("noise", 0.0);
    }
    for (const auto& jo : j.value("objects", nlohmann::json::array())) {
      SceneObject o;
      const std::string shape = jo.value("shape", std::string("disc"));
      if (shape == "disc") {
        o.shape = Shape::kDisc;
      } else if (shape == "square") {
        o.shape = Shape::kSquare;
      } else {
        throw ValidationError("unknown shape '" + shape + "'");
      }
      o.radius = jo.value("radius", o.radius);
      const auto pos = jo.at("position").get<std::vector<double>>();
      if (pos.size() != 2) throw ValidationError("position must have 2 components");
      o.x = pos[0];
      o.y = pos[1];
      if (jo.contains("velocity")) {
        const auto v = jo.at("velocity").get<std::vector<double>>();
        if (v.size() != 2) throw ValidationError("velocity must have 2 components");
        o.vx = v[0];
        o.vy = v[1];
      }
      if (jo.contains("lifetime")) {
        const auto l = jo.at("lifetime").get<std::vector<int>>();
        if (l.size() != 2) throw ValidationError("lifetime must be [enter, exit]");
        o.enter = l[0];
        o.exit = l[1];
      }
      if (jo.contains("colors")) {
        const auto& c = jo.at("colors");
        if (!c.is_array() || c.empty() || c.size() > 2) throw ValidationError("colors must list 1 or 2 colors");
        o.color_a = detail::json_color(c[0]);
        o.color_b = c.size() == 2 ? detail::json_color(c[1]) : o.color_a;
      }
      o.textured = jo.value("textured", true);
      s.objects.push_back(o);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("scene spec: ") + e.what());
  }
  s.validate();
  return s;
}

inline std::string centers_jsonl(const RenderedScene& scene) {
  std::string out;
  for (std::size_t t = 0; t < scene.centers.size(); ++t) {
    nlohmann::json objs = nlohmann::json::array();
    for (const auto& c : scene.centers[t]) objs.push_back({{"id", c.id}, {"x", c.x}, {"y", c.y}});
    out += nlohmann::json{{"frame", t}, {"objects", std::move(objs)}}.dump();
    out += '\n';
  }
  return out;
}

/// Writes frame_%06d.ppm, mask_%06d.pgm and centers.jsonl into `dir`.
inline void write_scene(const RenderedScene& scene, int n_objects, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t t = 0; t < scene.frames.size(); ++t) {
    save_ppm(scene.frames[t], dir / sequence_name("frame_", static_cast<int>(t), ".ppm"));
    save_pgm(mask_to_gray(scene.masks[t], n_objects), dir / sequence_name("mask_", static_cast<int>(t), ".pgm"));
  }
  detail::write_file(dir / "centers.jsonl", centers_jsonl(scene));
}

}  // namespace entrokeys
