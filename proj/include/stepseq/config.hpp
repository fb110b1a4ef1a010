#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "stepseq/sequencer.hpp"
#include "stepseq/simulator.hpp"

namespace stepseq {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Settings for the sensitivity surface sweep and its finite-difference
/// cross-check.
struct SensitivitySettings {
  int samples = 1000;
  double sigma = 0.005;
  double fd_delta = 1e-5;
};

/// Everything a tool invocation needs: model and cost parameters, the stance
/// snapshot that planning starts from, horizon length, sweep settings, and
/// the closed-loop scenario.
struct Config {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  SequencerParams sequencer;
  StanceContext context{Vec2(-0.12, -0.10), 0.229, Vec2(-0.12, -0.07), Side::pos};
  double horizon = 3.0;
  SensitivitySettings sensitivity;
  Scenario scenario;
};

namespace detail {

using json = nlohmann::json;

inline void check_keys(const json& obj, const std::string& path,
                       const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError("config: " + path + " must be an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw ConfigError("config: unknown key \"" + path + key + "\"");
}

inline double get_num(const json& obj, const std::string& path, const char* key,
                      double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number())
    throw ConfigError("config: " + path + key + " must be a number");
  return obj[key].get<double>();
}

inline Vec2 get_vec2(const json& obj, const std::string& path, const char* key,
                     const Vec2& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj[key];
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError("config: " + path + key + " must be an array of two numbers");
  return Vec2(v[0].get<double>(), v[1].get<double>());
}

inline Side get_side(const json& obj, const std::string& path, const char* key,
                     Side fallback) {
  if (!obj.contains(key)) return fallback;
  const std::string s = obj[key].is_string() ? obj[key].get<std::string>() : "";
  if (s == "pos") return Side::pos;
  if (s == "neg") return Side::neg;
  throw ConfigError("config: " + path + key + " must be \"pos\" or \"neg\"");
}

inline LateralBounds parse_lateral(const json& obj, const std::string& path,
                                   const LateralBounds& fallback) {
  check_keys(obj, path, {"min", "nom", "max"});
  LateralBounds b = fallback;
  b.min = get_num(obj, path, "min", b.min);
  b.nom = get_num(obj, path, "nom", b.nom);
  b.max = get_num(obj, path, "max", b.max);
  return b;
}

inline void parse_sequencer(const json& obj, SequencerParams& p) {
  const std::string path = "sequencer.";
  check_keys(obj, path,
             {"alpha1", "alpha2", "alpha3", "z_c", "gravity", "l_nom", "l_min", "l_max",
              "w_neg", "w_pos", "T_nom", "T_min", "T_max"});
  p.alpha1 = get_num(obj, path, "alpha1", p.alpha1);
  p.alpha2 = get_num(obj, path, "alpha2", p.alpha2);
  p.alpha3 = get_num(obj, path, "alpha3", p.alpha3);
  p.z_c = get_num(obj, path, "z_c", p.z_c);
  p.gravity = get_num(obj, path, "gravity", p.gravity);
  p.l_nom = get_num(obj, path, "l_nom", p.l_nom);
  p.l_min = get_num(obj, path, "l_min", p.l_min);
  p.l_max = get_num(obj, path, "l_max", p.l_max);
  if (obj.contains("w_neg")) p.w_neg = parse_lateral(obj["w_neg"], path + "w_neg.", p.w_neg);
  if (obj.contains("w_pos")) p.w_pos = parse_lateral(obj["w_pos"], path + "w_pos.", p.w_pos);
  p.T_nom = get_num(obj, path, "T_nom", p.T_nom);
  p.T_min = get_num(obj, path, "T_min", p.T_min);
  p.T_max = get_num(obj, path, "T_max", p.T_max);
}

inline void parse_context(const json& obj, StanceContext& c) {
  const std::string path = "context.";
  check_keys(obj, path, {"p0", "t", "zeta_hat", "side_next"});
  c.p0 = get_vec2(obj, path, "p0", c.p0);
  c.t = get_num(obj, path, "t", c.t);
  c.zeta_hat = get_vec2(obj, path, "zeta_hat", c.zeta_hat);
  c.side_next = get_side(obj, path, "side_next", c.side_next);
}

inline void parse_scenario(const json& obj, Scenario& s, const SequencerParams& seq,
                           double omega0) {
  const std::string path = "scenario.";
  check_keys(obj, path,
             {"duration", "control_dt", "start", "commands", "pushes", "slips",
              "noise_sigma", "mass", "swing_apex", "steady_start"});
  s.duration = get_num(obj, path, "duration", s.duration);
  s.control_dt = get_num(obj, path, "control_dt", s.control_dt);
  s.noise_sigma = get_num(obj, path, "noise_sigma", s.noise_sigma);
  s.mass = get_num(obj, path, "mass", s.mass);
  s.swing_apex = get_num(obj, path, "swing_apex", s.swing_apex);
  s.steady_start = get_num(obj, path, "steady_start", s.steady_start);

  if (obj.contains("start")) {
    const json& st = obj["start"];
    const std::string sp = path + "start.";
    check_keys(st, sp, {"p0", "zeta", "com", "side_next"});
    s.start.p0 = get_vec2(st, sp, "p0", s.start.p0);
    s.start.zeta = get_vec2(st, sp, "zeta", s.start.zeta);
    s.start.com = get_vec2(st, sp, "com", st.contains("zeta") ? s.start.zeta : s.start.com);
    s.start.side_next = get_side(st, sp, "side_next", s.start.side_next);
  }

  if (obj.contains("commands")) {
    if (!obj["commands"].is_array())
      throw ConfigError("config: scenario.commands must be an array");
    s.commands.clear();
    CommandPhase prev;
    prev.l_nom = seq.l_nom;
    prev.w_nom = seq.w_pos.nom;
    prev.T_nom = seq.T_nom;
    for (const json& c : obj["commands"]) {
      const std::string cp = path + "commands[].";
      check_keys(c, cp, {"t", "l_nom", "w_nom", "T_nom"});
      CommandPhase phase = prev;
      phase.t = get_num(c, cp, "t", 0.0);
      phase.l_nom = get_num(c, cp, "l_nom", prev.l_nom);
      phase.w_nom = get_num(c, cp, "w_nom", prev.w_nom);
      phase.T_nom = get_num(c, cp, "T_nom", prev.T_nom);
      s.commands.push_back(phase);
      prev = phase;
    }
  }

  if (obj.contains("pushes")) {
    if (!obj["pushes"].is_array())
      throw ConfigError("config: scenario.pushes must be an array");
    s.pushes.clear();
    for (const json& p : obj["pushes"]) {
      const std::string pp = path + "pushes[].";
      check_keys(p, pp, {"t", "dzeta", "impulse"});
      if (p.contains("dzeta") == p.contains("impulse"))
        throw ConfigError(
            "config: each push needs exactly one of \"dzeta\" or \"impulse\"");
      PushEvent ev;
      ev.t = get_num(p, pp, "t", 0.0);
      if (p.contains("dzeta"))
        ev.delta_zeta = get_vec2(p, pp, "dzeta", Vec2::Zero());
      else
        ev.delta_zeta = get_vec2(p, pp, "impulse", Vec2::Zero()) / (s.mass * omega0);
      s.pushes.push_back(ev);
    }
  }

  if (obj.contains("slips")) {
    if (!obj["slips"].is_array())
      throw ConfigError("config: scenario.slips must be an array");
    s.slips.clear();
    for (const json& sl : obj["slips"]) {
      const std::string sp = path + "slips[].";
      check_keys(sl, sp, {"step", "offset"});
      SlipEvent ev;
      ev.step_index = static_cast<int>(get_num(sl, sp, "step", 0.0));
      ev.offset = get_vec2(sl, sp, "offset", Vec2::Zero());
      s.slips.push_back(ev);
    }
  }
}

}  // namespace detail

/// Parse a configuration document. Unknown keys anywhere in the tree are
/// rejected with the offending path; missing keys fall back to the defaults
/// in Config. Basic range errors surface as ConfigError.
inline Config load_config(const nlohmann::json& doc) {
  using detail::check_keys;
  Config cfg;
  check_keys(doc, "",
             {"seed", "out_dir", "sequencer", "context", "horizon", "sensitivity",
              "scenario"});

  if (doc.contains("seed")) {
    const nlohmann::json& s = doc["seed"];
    const bool ok = s.is_number_unsigned() ||
                    (s.is_number_integer() && s.get<std::int64_t>() >= 0);
    if (!ok) throw ConfigError("config: seed must be a nonnegative integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  if (doc.contains("out_dir")) {
    if (!doc["out_dir"].is_string()) throw ConfigError("config: out_dir must be a string");
    cfg.out_dir = doc["out_dir"].get<std::string>();
  }
  if (doc.contains("sequencer")) detail::parse_sequencer(doc["sequencer"], cfg.sequencer);
  if (doc.contains("context")) detail::parse_context(doc["context"], cfg.context);
  cfg.horizon = detail::get_num(doc, "", "horizon", cfg.horizon);
  if (cfg.horizon < 0) throw ConfigError("config: horizon must be nonnegative");

  if (doc.contains("sensitivity")) {
    const nlohmann::json& s = doc["sensitivity"];
    check_keys(s, "sensitivity.", {"samples", "sigma", "fd_delta"});
    cfg.sensitivity.samples =
        static_cast<int>(detail::get_num(s, "sensitivity.", "samples",
                                         cfg.sensitivity.samples));
    cfg.sensitivity.sigma = detail::get_num(s, "sensitivity.", "sigma",
                                            cfg.sensitivity.sigma);
    cfg.sensitivity.fd_delta = detail::get_num(s, "sensitivity.", "fd_delta",
                                               cfg.sensitivity.fd_delta);
    if (cfg.sensitivity.samples < 0)
      throw ConfigError("config: sensitivity.samples must be nonnegative");
    if (cfg.sensitivity.sigma < 0)
      throw ConfigError("config: sensitivity.sigma must be nonnegative");
    if (!(cfg.sensitivity.fd_delta > 0))
      throw ConfigError("config: sensitivity.fd_delta must be positive");
  }

  try {
    cfg.sequencer.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (doc.contains("scenario"))
    detail::parse_scenario(doc["scenario"], cfg.scenario, cfg.sequencer,
                           cfg.sequencer.omega0());
  cfg.scenario.seed = cfg.seed;
  try {
    cfg.scenario.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline Config load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return load_config(doc);
}

}  // namespace stepseq
