#include <gtest/gtest.h>

#include <filesystem>

#include "entrokeys/discoverer.hpp"
#include "entrokeys/synth.hpp"

using namespace entrokeys;
namespace fs = std::filesystem;

TEST(Render, StaticDiscGivesIdenticalFrames) {
  SceneSpec s;
  s.width = 48;
  s.height = 40;
  s.frames = 5;
  s.noise = 0.05;
  s.objects = {disc(20, 18, 6)};
  const RenderedScene r = render(s);
  ASSERT_EQ(r.frames.size(), 5u);
  for (int t = 1; t < 5; ++t) {
    EXPECT_EQ(r.frames[t], r.frames[0]);
    EXPECT_EQ(r.masks[t].labels, r.masks[0].labels);
  }
  EXPECT_EQ(r.masks[0].at(20, 18), 1);
  EXPECT_EQ(r.masks[0].at(0, 0), 0);
}

TEST(Render, LinearMotion) {
  SceneSpec s;
  s.frames = 5;
  s.objects = {disc(10, 40, 8, 2.0, 0.0)};
  const auto c = object_trajectories(s);
  for (int t = 0; t < 5; ++t) {
    ASSERT_EQ(c[t].size(), 1u);
    EXPECT_EQ(c[t][0].x, 10.0 + 2.0 * t);
    EXPECT_EQ(c[t][0].y, 40.0);
  }
}

TEST(Render, BounceKeepsShapeInside) {
  SceneSpec s;
  s.width = 40;
  s.height = 40;
  s.frames = 60;
  s.objects = {disc(20, 20, 6, 5.0, -3.0)};
  for (const auto& frame : object_trajectories(s)) {
    for (const auto& c : frame) {
      EXPECT_GE(c.x, 6.0);
      EXPECT_LE(c.x, 33.0);
      EXPECT_GE(c.y, 6.0);
      EXPECT_LE(c.y, 33.0);
    }
  }
}

TEST(Render, LifetimeRespected) {
  const SceneSpec s = preset("comeandgo");
  const RenderedScene r = render(s);
  for (int t = 0; t < s.frames; ++t) {
    const auto areas = r.masks[t].areas();
    const bool alive = t >= 10 && t <= 40;
    ASSERT_GE(areas.size(), 3u);
    EXPECT_EQ(areas[2] > 0, alive) << t;
    EXPECT_GT(areas[1], 0);
  }
}

TEST(Render, LaterObjectsOcclude) {
  SceneSpec s;
  s.frames = 1;
  s.objects = {disc(40, 40, 8), disc(44, 40, 8)};
  const RenderedScene r = render(s);
  EXPECT_EQ(r.masks[0].at(42, 40), 2);
  EXPECT_EQ(r.masks[0].at(33, 40), 1);
}

TEST(Render, ThreadCountDoesNotMatter) {
  const SceneSpec s = preset("mixed", 3);
  const RenderedScene a = render(s, 1);
  const RenderedScene b = render(s, 3);
  EXPECT_EQ(a.frames, b.frames);
  for (std::size_t t = 0; t < a.masks.size(); ++t) EXPECT_EQ(a.masks[t].labels, b.masks[t].labels);
}

TEST(Preset, ComeAndGoDefinition) {
  const SceneSpec s = preset("comeandgo");
  EXPECT_EQ(s.frames, 60);
  ASSERT_EQ(s.objects.size(), 2u);
  EXPECT_EQ(s.objects[1].enter, 10);
  EXPECT_EQ(s.objects[1].exit, 40);
  EXPECT_THROW(preset("nope"), ValidationError);
  for (const auto& n : preset_names()) EXPECT_NO_THROW(render(preset(n)));
}

TEST(Preset, Static3HasNoConditionalEntropy) {
  const RenderedScene r = render(preset("static3"));
  const EntropyStack st = compute_entropy_stack(r.frames, HistogramSpec{}, PreprocessOptions{}, 1);
  for (std::size_t t = 1; t < st.conditional.size(); ++t) {
    for (double v : st.conditional[t].values()) ASSERT_EQ(v, 0.0);
  }
}

TEST(Preset, MixedConditionalEntropyNearMovingObjects) {
  const SceneSpec s = preset("mixed");
  const RenderedScene r = render(s);
  const HistogramSpec hs;
  const PreprocessOptions pre;
  const EntropyStack st = compute_entropy_stack(r.frames, hs, pre, 1);
  // Preprocessing reaches blur_radius pixels, the entropy region region_size/2 more.
  const int margin = pre.blur_radius + hs.region_size / 2;
  double total = 0.0;
  for (std::size_t t = 1; t < st.conditional.size(); ++t) {
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        const double v = st.conditional[t](x, y);
        total += v;
        // Sliding-window updates leave ulp-level residue far from any change.
        if (v < 1e-12) continue;
        bool near = false;
        for (std::size_t u : {t - 1, t}) {
          for (const auto& c : r.centers[u]) {
            const auto& o = s.objects[static_cast<std::size_t>(c.id - 1)];
            if (o.vx == 0.0 && o.vy == 0.0) continue;
            const double reach = o.radius + margin + 1;
            if (std::abs(x - c.x) <= reach && std::abs(y - c.y) <= reach) near = true;
          }
        }
        ASSERT_TRUE(near) << "t=" << t << " (" << x << "," << y << ")";
      }
    }
  }
  EXPECT_GT(total, 0.0);
}

TEST(SceneJson, ParsesAndValidates) {
  const auto j = nlohmann::json::parse(R"({"width":32,"height":24,"frames":3,"seed":4,
    "background":{"color":[0.2,0.2,0.2],"noise":0.1},
    "objects":[{"shape":"square","radius":4,"position":[10,10],"velocity":[1,0],"lifetime":[1,2],
                "colors":[[1,0,0],[0,0,1]]}]})");
  const SceneSpec s = scene_from_json(j);
  EXPECT_EQ(s.width, 32);
  EXPECT_EQ(s.objects[0].shape, Shape::kSquare);
  const RenderedScene r = render(s);
  EXPECT_EQ(r.masks[0].max_label(), 0);
  EXPECT_EQ(r.masks[1].at(11, 10), 1);
  EXPECT_THROW(scene_from_json(nlohmann::json::parse(R"({"objects":[{"radius":2,"position":[5,5]}]})")),
               ValidationError);
  EXPECT_THROW(scene_from_json(nlohmann::json::parse(R"({"objects":[{"radius":5}]})")), ValidationError);
}

TEST(WriteScene, FilesOnDisk) {
  const fs::path dir = fs::temp_directory_path() / "entrokeys_test_synth";
  fs::remove_all(dir);
  const SceneSpec s = preset("comeandgo");
  write_scene(render(s), 2, dir);
  int frames = 0;
  int masks = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto n = e.path().filename().string();
    frames += n.starts_with("frame_") ? 1 : 0;
    masks += n.starts_with("mask_") ? 1 : 0;
  }
  EXPECT_EQ(frames, 60);
  EXPECT_EQ(masks, 60);
  EXPECT_TRUE(fs::exists(dir / "centers.jsonl"));
  const auto back = load_masks(dir);
  EXPECT_EQ(back[0].declared, 2);
}
