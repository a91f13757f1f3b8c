#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "entrokeys/discoverer.hpp"
#include "entrokeys/error.hpp"

namespace entrokeys {

/// Every tunable of a run. Merge order: defaults, then config file, then
/// command-line overrides.
struct RunConfig {
  DiscoveryConfig discovery;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ValidationError(std::string(key) + ": expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

template <class Int>
Int parse_integer(std::string_view key, std::string_view text) {
  Int v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw ValidationError(std::string(key) + ": expected an integer, got '" + std::string(text) + "'");
  }
  return v;
}

struct ConfigKey {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

inline ConfigKey real_key(std::string name, double DiscoveryConfig::*member) {
  return {name, [member](const RunConfig& c) { return format_double(c.discovery.*member); },
          [member, name](RunConfig& c, std::string_view v) { c.discovery.*member = parse_double(name, v); }};
}

inline ConfigKey weight_key(std::string name, double LossWeights::*member) {
  return {name, [member](const RunConfig& c) { return format_double(c.discovery.weights.*member); },
          [member, name](RunConfig& c, std::string_view v) { c.discovery.weights.*member = parse_double(name, v); }};
}

inline ConfigKey heatmap_key(std::string name, double HeatmapParams::*member) {
  return {name, [member](const RunConfig& c) { return format_double(c.discovery.heatmap.*member); },
          [member, name](RunConfig& c, std::string_view v) { c.discovery.heatmap.*member = parse_double(name, v); }};
}

inline ConfigKey int_key(std::string name, int DiscoveryConfig::*member) {
  return {name, [member](const RunConfig& c) { return std::to_string(c.discovery.*member); },
          [member, name](RunConfig& c, std::string_view v) { c.discovery.*member = parse_integer<int>(name, v); }};
}

}  // namespace detail

/// All accepted keys, in dump order.
inline const std::vector<detail::ConfigKey>& config_keys() {
  using namespace detail;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back(weight_key("lambda_me", &LossWeights::lambda_me));
    k.push_back(weight_key("lambda_mce", &LossWeights::lambda_mce));
    k.push_back(weight_key("lambda_it", &LossWeights::lambda_it));
    k.push_back(weight_key("lambda_s", &LossWeights::lambda_s));
    k.push_back(weight_key("lambda_o", &LossWeights::lambda_o));
    k.push_back(weight_key("kappa", &LossWeights::kappa));
    k.push_back(weight_key("m_d", &LossWeights::m_d));
    k.push_back(weight_key("beta", &LossWeights::beta));
    k.push_back({"overlap_form", [](const RunConfig& c) { return std::string(to_string(c.discovery.overlap_form)); },
                 [](RunConfig& c, std::string_view v) { c.discovery.overlap_form = parse_overlap_form(v); }});
    k.push_back({"movement_units",
                 [](const RunConfig& c) { return std::string(to_string(c.discovery.movement_units)); },
                 [](RunConfig& c, std::string_view v) { c.discovery.movement_units = parse_movement_units(v); }});
    k.push_back(heatmap_key("sigma_g", &HeatmapParams::sigma));
    k.push_back(heatmap_key("tau", &HeatmapParams::tau));
    k.push_back(heatmap_key("eta", &HeatmapParams::eta));
    k.push_back({"region_size", [](const RunConfig& c) { return std::to_string(c.discovery.histogram.region_size); },
                 [](RunConfig& c, std::string_view v) {
                   c.discovery.histogram.region_size = parse_integer<int>("region_size", v);
                 }});
    k.push_back({"bandwidth", [](const RunConfig& c) { return format_double(c.discovery.histogram.bandwidth); },
                 [](RunConfig& c, std::string_view v) { c.discovery.histogram.bandwidth = parse_double("bandwidth", v); }});
    k.push_back({"blur_radius", [](const RunConfig& c) { return std::to_string(c.discovery.preprocess.blur_radius); },
                 [](RunConfig& c, std::string_view v) {
                   c.discovery.preprocess.blur_radius = parse_integer<int>("blur_radius", v);
                 }});
    k.push_back(int_key("num_keypoints", &DiscoveryConfig::num_keypoints));
    k.push_back(int_key("iterations", &DiscoveryConfig::iterations));
    k.push_back(real_key("learning_rate", &DiscoveryConfig::learning_rate));
    k.push_back(real_key("momentum", &DiscoveryConfig::momentum));
    k.push_back(real_key("clip", &DiscoveryConfig::clip));
    k.push_back({"init", [](const RunConfig& c) { return std::string(to_string(c.discovery.init)); },
                 [](RunConfig& c, std::string_view v) { c.discovery.init = parse_init_strategy(v); }});
    k.push_back({"seed", [](const RunConfig& c) { return std::to_string(c.discovery.seed); },
                 [](RunConfig& c, std::string_view v) { c.discovery.seed = parse_integer<std::uint64_t>("seed", v); }});
    k.push_back(real_key("status_threshold", &DiscoveryConfig::status_threshold));
    k.push_back(real_key("initial_logit", &DiscoveryConfig::initial_logit));
    k.push_back(real_key("logit_bound", &DiscoveryConfig::logit_bound));
    k.push_back(real_key("respawn_threshold", &DiscoveryConfig::respawn_threshold));
    return k;
  }();
  return keys;
}

inline void validate(const RunConfig& c) {
  c.discovery.validate();
  if (c.discovery.preprocess.blur_radius < 1) throw ValidationError("blur_radius must be >= 1");
}

/// Sets one key; unknown keys are rejected.
inline void set_config_value(RunConfig& c, std::string_view key, std::string_view value) {
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      k.set(c, detail::trim(value));
      return;
    }
  }
  throw ValidationError("unknown config key '" + std::string(key) + "'");
}

/// Applies "key=value".
inline void apply_assignment(RunConfig& c, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ValidationError("expected key=value, got '" + std::string(assignment) + "'");
  }
  set_config_value(c, detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

/// One "key = value" per line; '#' starts a comment.
inline void apply_config_text(RunConfig& c, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    try {
      apply_assignment(c, line);
    } catch (const ValidationError& e) {
      throw ValidationError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline std::string dump_config(const RunConfig& c) {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + " = " + k.get(c) + "\n";
  return out;
}

/// "--weights me=0,s=5": short (me, mce, it, s, o) or full weight names.
/// Negative values are rejected; zero disables a term.
inline void apply_weights(RunConfig& c, std::string_view spec) {
  static const std::map<std::string, std::string, std::less<>> aliases{
      {"me", "lambda_me"}, {"mce", "lambda_mce"}, {"it", "lambda_it"},   {"s", "lambda_s"},
      {"o", "lambda_o"},   {"kappa", "kappa"},    {"m_d", "m_d"},        {"beta", "beta"},
      {"lambda_me", "lambda_me"}, {"lambda_mce", "lambda_mce"}, {"lambda_it", "lambda_it"},
      {"lambda_s", "lambda_s"},   {"lambda_o", "lambda_o"}};
  std::size_t start = 0;
  while (start <= spec.size()) {
    const auto comma = spec.find(',', start);
    const std::string item = detail::trim(spec.substr(start, comma == std::string_view::npos ? spec.npos : comma - start));
    if (!item.empty()) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ValidationError("--weights: expected name=value, got '" + item + "'");
      const std::string name = detail::trim(std::string_view(item).substr(0, eq));
      const auto it = aliases.find(name);
      if (it == aliases.end()) throw ValidationError("--weights: unknown weight '" + name + "'");
      const double v = detail::parse_double(name, detail::trim(std::string_view(item).substr(eq + 1)));
      if (v < 0.0) throw ValidationError("--weights: " + name + " must be >= 0");
      set_config_value(c, it->second, detail::format_double(v));
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
}

}  // namespace entrokeys
