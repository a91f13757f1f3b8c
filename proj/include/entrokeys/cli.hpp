#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "entrokeys/config.hpp"
#include "entrokeys/diffengine.hpp"
#include "entrokeys/discoverer.hpp"
#include "entrokeys/entropy.hpp"
#include "entrokeys/gradcheck.hpp"
#include "entrokeys/image_io.hpp"
#include "entrokeys/metrics.hpp"
#include "entrokeys/synth.hpp"
#include "entrokeys/trajectory.hpp"

namespace entrokeys::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

inline constexpr double kGradcheckTolerance = 1e-4;

/// Config flags shared by the subcommands that run the pipeline.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::string> assignments;
  std::string weights;
  bool dump = false;
  std::optional<int> threads;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--set", assignments, "Override one key (key=value); repeatable");
    sub->add_option("--weights", weights, "Loss weights, e.g. me=100,s=5 (names: me mce it s o kappa m_d beta)");
    sub->add_flag("--dump-config", dump, "Print the merged config and exit");
    sub->add_option("--threads", threads, "Worker threads (default: ENTROKEYS_THREADS, else all cores)")
        ->check(CLI::PositiveNumber);
  }

  /// Defaults, then config file, then --set, then --weights.
  RunConfig resolve() const {
    RunConfig c;
    c.discovery.threads = threads.value_or(default_thread_count());
    if (!config_path.empty()) apply_config_text(c, detail::read_file(config_path));
    for (const auto& a : assignments) apply_assignment(c, a);
    if (!weights.empty()) apply_weights(c, weights);
    validate(c);
    return c;
  }
};

inline void write_json(std::ostream& out, const nlohmann::json& j) { out << j.dump(2) << '\n'; }

inline int cmd_entropy(const std::filesystem::path& frames_dir, const std::filesystem::path& out_dir, bool conditional,
                       bool preview, const RunConfig& cfg) {
  const auto frames = load_frames(frames_dir);
  const EntropyStack stack = compute_entropy_stack(frames, cfg.discovery.histogram, cfg.discovery.preprocess,
                                                   cfg.discovery.threads);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  for (std::size_t t = 0; t < stack.frames.size(); ++t) {
    const int i = static_cast<int>(t);
    write_emap(stack.frames[t], out_dir / sequence_name("entropy_", i, ".emap"));
    if (preview) save_pgm(entropy_preview(stack.frames[t]), out_dir / sequence_name("entropy_", i, ".pgm"));
    if (conditional && t > 0) {
      write_emap(stack.conditional[t], out_dir / sequence_name("conditional_", i, ".emap"));
      if (preview) save_pgm(entropy_preview(stack.conditional[t]), out_dir / sequence_name("conditional_", i, ".pgm"));
    }
  }
  return kExitOk;
}

inline int cmd_discover(const std::filesystem::path& frames_dir, const std::filesystem::path& out_path,
                        const std::string& overlay_dir, const RunConfig& cfg) {
  const auto frames = load_frames(frames_dir);
  const Trajectory tr = discover(frames, cfg.discovery);
  save_trajectory(tr, out_path);
  if (!overlay_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(overlay_dir, ec);
    if (ec) throw IoError("cannot create " + overlay_dir + ": " + ec.message());
    for (std::size_t t = 0; t < frames.size(); ++t) {
      save_ppm(render_overlay(frames[t], tr.frames[t]),
               std::filesystem::path(overlay_dir) / sequence_name("overlay_", static_cast<int>(t), ".ppm"));
    }
  }
  return kExitOk;
}

inline nlohmann::json cmd_evaluate(const std::filesystem::path& trajectory, const std::filesystem::path& masks_dir,
                                   std::optional<double> a_k) {
  if (a_k && !(*a_k > 0.0)) throw ValidationError("--a-k must be > 0");
  return to_json(evaluate_metrics(load_trajectory(trajectory), load_masks(masks_dir), a_k));
}

inline int cmd_synth(const std::string& preset_or_spec, const std::filesystem::path& out_dir, std::uint64_t seed,
                     int threads) {
  SceneSpec spec;
  const auto& names = preset_names();
  if (std::find(names.begin(), names.end(), preset_or_spec) != names.end()) {
    spec = preset(preset_or_spec, seed);
  } else if (std::filesystem::is_regular_file(preset_or_spec)) {
    try {
      spec = scene_from_json(nlohmann::json::parse(detail::read_file(preset_or_spec)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(ParseErrorKind::kMalformedRecord, preset_or_spec + ": " + e.what());
    }
  } else {
    std::string known;
    for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
    throw ValidationError("'" + preset_or_spec + "' is neither a preset (" + known + ") nor a spec file");
  }
  write_scene(render(spec, threads), static_cast<int>(spec.objects.size()), out_dir);
  return kExitOk;
}

inline GradientReport cmd_gradcheck(std::uint64_t seed, int width, int height, int k, const RunConfig& cfg) {
  const GradcheckCase c = make_gradcheck_case(seed, width, height, k, cfg.discovery.weights, cfg.discovery.heatmap);
  return check_objective(c.objective, c.prev, c.cur);
}

/// Per frame: covered fraction and bound of the masked entropy, of the masked
/// conditional entropy (t >= 1), and of each keypoint's transport (t >= 1),
/// the latter with I(I_t, R) taken as min(H_t, R) per pixel.
inline nlohmann::json diagnose(const Trajectory& tr, const EntropyStack& stack, const RunConfig& cfg) {
  if (tr.frames.size() != stack.frames.size()) {
    throw ValidationError("frame count mismatch: trajectory has " + std::to_string(tr.frames.size()) +
                          " frames, video " + std::to_string(stack.frames.size()));
  }
  const int w = stack.frames.front().width();
  const int h = stack.frames.front().height();
  const long long n = static_cast<long long>(w) * h;
  const HeatmapParams& hp = cfg.discovery.heatmap;
  const double kappa = cfg.discovery.weights.kappa;
  auto heatmaps_of = [&](const TrajectoryFrame& f) {
    std::vector<Heatmap> hs;
    for (const auto& k : f.keypoints) hs.push_back(keypoint_heatmap({k.x, k.y, 0.0}, hp, w, h));
    return hs;
  };
  auto ratio = [](double a, double b) { return b > 0.0 ? nlohmann::json(a / b) : nlohmann::json(nullptr); };
  nlohmann::json frames = nlohmann::json::array();
  std::vector<Heatmap> prev_hs;
  for (std::size_t t = 0; t < tr.frames.size(); ++t) {
    const auto& f = tr.frames[t];
    const EntropyMap& ht = stack.frames[t];
    std::vector<Heatmap> hs = heatmaps_of(f);
    std::vector<double> statuses;
    for (const auto& k : f.keypoints) statuses.push_back(k.status);
    const AggregatedMask m = hs.empty() ? AggregatedMask(w, h) : aggregate_mask(hs, statuses);
    double total = 0.0;
    double covered = 0.0;
    for (std::size_t i = 0; i < ht.size(); ++i) {
      total += ht[i];
      covered += ht[i] * m[i];
    }
    nlohmann::json rec = {{"frame", f.frame},
                          {"me_fraction", ratio(covered, total)},
                          {"fano_me", fano_bound(covered, n)},
                          {"mce_fraction", nullptr},
                          {"fano_mce", nullptr},
                          {"it", nlohmann::json::array()}};
    if (t > 0) {
      if (prev_hs.size() != hs.size()) throw ValidationError("keypoint count changes between frames");
      const EntropyMap& hprev = stack.frames[t - 1];
      const EntropyMap& hc = stack.conditional[t];
      double ctotal = 0.0;
      double ccovered = 0.0;
      for (std::size_t i = 0; i < hc.size(); ++i) {
        ctotal += hc[i];
        ccovered += hc[i] * m[i];
      }
      rec["mce_fraction"] = ratio(ccovered, ctotal);
      rec["fano_mce"] = fano_bound(ccovered, n);
      for (std::size_t k = 0; k < hs.size(); ++k) {
        double mi = 0.0;
        for (std::size_t i = 0; i < ht.size(); ++i) {
          const double a = hs[k][i];
          const double p = prev_hs[k][i];
          const double r = hprev[i] * (1.0 - p) * (1.0 - a) + ht[i] * a + kappa * hc[i] * (1.0 - a);
          mi += std::min(ht[i], r);
        }
        rec["it"].push_back({{"id", f.keypoints[k].id}, {"mi_fraction", ratio(mi, total)}, {"fano", fano_bound(mi, n)}});
      }
    }
    frames.push_back(std::move(rec));
    prev_hs = std::move(hs);
  }
  return {{"frames", std::move(frames)}};
}

inline nlohmann::json cmd_diagnose(const std::filesystem::path& trajectory, const std::filesystem::path& frames_dir,
                                   const RunConfig& cfg) {
  const Trajectory tr = load_trajectory(trajectory);
  const auto frames = load_frames(frames_dir);
  return diagnose(tr, compute_entropy_stack(frames, cfg.discovery.histogram, cfg.discovery.preprocess, cfg.discovery.threads),
                  cfg);
}

/// Entry point of the `entrokeys` tool. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Entropy-driven unsupervised keypoint discovery"};
  app.require_subcommand(1);

  ConfigFlags entropy_flags;
  std::string e_frames;
  std::string e_out;
  bool e_conditional = false;
  bool e_preview = false;
  auto* entropy = app.add_subcommand("entropy", "Per-frame spatial entropy maps (EMAP)");
  entropy->add_option("frames_dir", e_frames, "Directory of frame_NNNNNN.ppm")->required();
  entropy->add_option("out_dir", e_out, "Output directory")->required();
  entropy->add_flag("--conditional", e_conditional, "Also write conditional maps for each consecutive pair");
  entropy->add_flag("--preview", e_preview, "Also write 8-bit PGM previews");
  entropy_flags.attach(entropy);

  ConfigFlags discover_flags;
  std::string d_frames;
  std::string d_out;
  std::string d_overlay;
  auto* disc = app.add_subcommand("discover", "Discover and track keypoints, write trajectory JSONL");
  disc->add_option("frames_dir", d_frames, "Directory of frame_NNNNNN.ppm")->required();
  disc->add_option("out", d_out, "Output trajectory (.jsonl)")->required();
  disc->add_option("--overlay", d_overlay, "Directory for annotated overlay PPMs");
  discover_flags.attach(disc);

  std::string v_traj;
  std::string v_masks;
  std::optional<double> v_ak;
  std::string v_out;
  auto* eval = app.add_subcommand("evaluate", "DOP, TOP, UAK and RAK of a trajectory against object masks");
  eval->add_option("trajectory", v_traj, "Trajectory JSONL")->required();
  eval->add_option("masks_dir", v_masks, "Directory of mask_NNNNNN.pgm")->required();
  eval->add_option("--a-k", v_ak, "Area threshold for RAK (default: mean object area)");
  eval->add_option("--out", v_out, "Also write the report to this file");

  std::string s_what;
  std::string s_out;
  std::uint64_t s_seed = 0;
  std::optional<int> s_threads;
  auto* synth = app.add_subcommand("synth", "Render a synthetic scene: frames, masks, centers");
  synth->add_option("preset_or_spec", s_what, "Preset name or JSON scene spec file")->required();
  synth->add_option("out_dir", s_out, "Output directory")->required();
  synth->add_option("--seed", s_seed, "Background noise seed");
  synth->add_option("--threads", s_threads, "Worker threads")->check(CLI::PositiveNumber);

  ConfigFlags grad_flags;
  std::uint64_t g_seed = 0;
  int g_width = 64;
  int g_height = 64;
  int g_k = 5;
  auto* grad = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradient on a random frame pair");
  grad->add_option("--seed", g_seed, "Case seed");
  grad->add_option("--width", g_width, "Frame width")->check(CLI::Range(16, 4096));
  grad->add_option("--height", g_height, "Frame height")->check(CLI::Range(16, 4096));
  grad->add_option("-k,--keypoints", g_k, "Keypoint count")->check(CLI::Range(1, 1000));
  grad_flags.attach(grad);

  ConfigFlags diag_flags;
  std::string x_traj;
  std::string x_frames;
  auto* diag = app.add_subcommand("diagnose", "Per-frame covered entropy fractions and error-probability bounds");
  diag->add_option("trajectory", x_traj, "Trajectory JSONL")->required();
  diag->add_option("frames_dir", x_frames, "Directory of frame_NNNNNN.ppm")->required();
  diag_flags.attach(diag);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  auto dump_or = [&](const ConfigFlags& flags, auto&& body) -> int {
    const RunConfig cfg = flags.resolve();
    if (flags.dump) {
      out << dump_config(cfg);
      return kExitOk;
    }
    return body(cfg);
  };

  try {
    if (*entropy) {
      return dump_or(entropy_flags, [&](const RunConfig& c) {
        return cmd_entropy(e_frames, e_out, e_conditional, e_preview, c);
      });
    }
    if (*disc) {
      return dump_or(discover_flags, [&](const RunConfig& c) { return cmd_discover(d_frames, d_out, d_overlay, c); });
    }
    if (*eval) {
      const nlohmann::json report = cmd_evaluate(v_traj, v_masks, v_ak);
      if (!v_out.empty()) detail::write_file(v_out, report.dump(2) + "\n");
      write_json(out, report);
      return kExitOk;
    }
    if (*synth) return cmd_synth(s_what, s_out, s_seed, s_threads.value_or(default_thread_count()));
    if (*grad) {
      return dump_or(grad_flags, [&](const RunConfig& c) {
        const GradientReport r = cmd_gradcheck(g_seed, g_width, g_height, g_k, c);
        write_json(out, to_json(r, kGradcheckTolerance));
        if (!r.passed(kGradcheckTolerance)) {
          err << "gradcheck: max relative error " << r.max_relative_error << " exceeds " << kGradcheckTolerance << "\n";
          return kExitValidation;
        }
        return kExitOk;
      });
    }
    if (*diag) {
      return dump_or(diag_flags, [&](const RunConfig& c) {
        write_json(out, cmd_diagnose(x_traj, x_frames, c));
        return kExitOk;
      });
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitValidation;
}

}  // namespace entrokeys::cli
