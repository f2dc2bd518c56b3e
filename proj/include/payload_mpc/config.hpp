/*
 Copyright 2025 The payload-mpc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "payload_mpc/io.hpp"

namespace payload_mpc {

/// Complete run description as read from a sectioned key-value file.
/// Plant parameters default to the model parameters unless a [plant] key
/// overrides them (parameter-mismatch studies).
struct RepoConfig {
  SystemParams model;
  SystemParams plant;
  SensorConfig sensor;
  NoiseConfig noise;
  ControllerConfig controller;
  PlannerConfig planner;
  SolverSettings solver;

  // [scenario]
  std::string reference = "square:2";  // `square:<dt>[x<laps>]` or a CSV path
  double duration = 0.0;               // 0 = until last waypoint + tail
  double control_rate = 100.0;
  double planner_rate = 1.0;
  double integrator_rate = 1000.0;
  double settle_time = 5.0;            // waypoint times are shifted by this
  bool jitter_dt = false;
  bool truth_feedback = false;

  std::string base_dir;  // directory of the config file, for relative paths
};

namespace cfgdetail {

inline std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline double to_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (trim(v.substr(pos)).empty()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
}

inline int to_int(const std::string& v, const std::string& key) {
  const double d = to_double(v, key);
  const int i = static_cast<int>(std::lround(d));
  if (std::abs(d - i) > 1e-12)
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  return i;
}

inline bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

inline std::vector<double> to_vec(const std::string& v, size_t n, const std::string& key) {
  std::istringstream is(v);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) out.push_back(to_double(tok, key));
  if (out.size() != n)
    throw ConfigError("key '" + key + "': expected " + std::to_string(n) + " values, got " +
                      std::to_string(out.size()));
  return out;
}

template <typename Derived>
void assign_vec(Eigen::MatrixBase<Derived>& dst, const std::string& v, const std::string& key) {
  const auto vals = to_vec(v, static_cast<size_t>(dst.size()), key);
  for (Eigen::Index i = 0; i < dst.size(); ++i) dst(i) = vals[static_cast<size_t>(i)];
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename Derived>
std::string vec_str(const Eigen::MatrixBase<Derived>& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += fmt17(v(i));
  }
  return s;
}

inline void apply_params(SystemParams& p, const std::string& key, const std::string& value,
                         const std::string& full) {
  if (key == "uav_mass") p.uav_mass = to_double(value, full);
  else if (key == "payload_mass") p.payload_mass = to_double(value, full);
  else if (key == "cable_length") p.cable_length = to_double(value, full);
  else if (key == "uav_drag") p.uav_drag = to_double(value, full);
  else if (key == "payload_drag") p.payload_drag = to_double(value, full);
  else if (key == "gravity") p.gravity = to_double(value, full);
  else if (key == "fcu_gain") assign_vec(p.fcu_gain, value, full);
  else if (key == "fcu_tau") assign_vec(p.fcu_tau, value, full);
  else throw ConfigError("unknown key '" + full + "'");
}

}  // namespace cfgdetail

/// Parses the sectioned key-value format: `[section]` headers, `key = value`
/// lines, `#`/`;` comments.  Unknown sections or keys are rejected by name;
/// missing keys keep their defaults.  [plant] inherits from [model].
inline RepoConfig parse_config(const std::string& text) {
  using cfgdetail::to_bool;
  using cfgdetail::to_double;
  using cfgdetail::to_int;

  // Gather raw entries first: [plant] inherits whatever [model] ends up with,
  // regardless of section order in the file.
  std::vector<std::pair<std::string, std::string>> entries;  // "section.key" -> value
  std::string section;
  std::istringstream is(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = cfgdetail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = cfgdetail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = cfgdetail::trim(line.substr(0, eq));
    const std::string value = cfgdetail::trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": key '" + key +
                        "' outside any section");
    entries.emplace_back(section + "." + key, value);
  }

  RepoConfig cfg;
  for (const auto& [full, value] : entries)
    if (full.rfind("model.", 0) == 0)
      cfgdetail::apply_params(cfg.model, full.substr(6), value, full);
  cfg.plant = cfg.model;

  for (const auto& [full, value] : entries) {
    const size_t dot = full.find('.');
    const std::string sec = full.substr(0, dot);
    const std::string key = full.substr(dot + 1);
    if (sec == "model") continue;  // applied above
    if (sec == "plant") {
      cfgdetail::apply_params(cfg.plant, key, value, full);
    } else if (sec == "sensor") {
      if (key == "pos_noise_std") cfgdetail::assign_vec(cfg.sensor.pos_noise_std, value, full);
      else if (key == "att_noise_std") cfgdetail::assign_vec(cfg.sensor.att_noise_std, value, full);
      else if (key == "measurement_rate") cfg.sensor.measurement_rate = to_double(value, full);
      else if (key == "seed") cfg.sensor.seed = static_cast<std::uint64_t>(to_int(value, full));
      else throw ConfigError("unknown key '" + full + "'");
    } else if (sec == "estimator") {
      if (key == "process_noise") {
        Eigen::VectorXd d(kStateDim);
        cfgdetail::assign_vec(d, value, full);
        cfg.noise.process = d.asDiagonal();
      } else if (key == "measurement_noise") {
        Eigen::VectorXd d(kMeasDim);
        cfgdetail::assign_vec(d, value, full);
        cfg.noise.measurement = d.asDiagonal();
      } else {
        throw ConfigError("unknown key '" + full + "'");
      }
    } else if (sec == "controller") {
      if (key == "horizon") cfg.controller.horizon = to_int(value, full);
      else if (key == "dt") cfg.controller.dt = to_double(value, full);
      else if (key == "payload_weights") cfgdetail::assign_vec(cfg.controller.payload_weights, value, full);
      else if (key == "input_weights") cfgdetail::assign_vec(cfg.controller.input_weights, value, full);
      else if (key == "rate_weights") cfgdetail::assign_vec(cfg.controller.rate_weights, value, full);
      else if (key == "slack_weight") cfg.controller.slack_weight = to_double(value, full);
      else if (key == "velocity_bound") cfg.controller.velocity_bound = to_double(value, full);
      else if (key == "tilt_bound") cfg.controller.tilt_bound = to_double(value, full);
      else throw ConfigError("unknown key '" + full + "'");
    } else if (sec == "planner") {
      if (key == "horizon") cfg.planner.horizon = to_int(value, full);
      else if (key == "sigma") cfg.planner.sigma = to_double(value, full);
      else if (key == "rate_weights") cfgdetail::assign_vec(cfg.planner.rate_weights, value, full);
      else if (key == "tilt_bound") cfg.planner.tilt_bound = to_double(value, full);
      else if (key == "t_plan") cfg.planner.t_plan = to_double(value, full);
      else if (key == "ol_tail") cfg.planner.ol_tail = to_double(value, full);
      else throw ConfigError("unknown key '" + full + "'");
    } else if (sec == "solver") {
      if (key == "tolerance") cfg.solver.tolerance = to_double(value, full);
      else if (key == "max_iterations") cfg.solver.max_iterations = to_int(value, full);
      else if (key == "rho") cfg.solver.rho = to_double(value, full);
      else if (key == "alpha") cfg.solver.alpha = to_double(value, full);
      else if (key == "adaptive_rho") cfg.solver.adaptive_rho = to_bool(value, full);
      else if (key == "polish") cfg.solver.polish = to_bool(value, full);
      else if (key == "condense") cfg.solver.condense = to_bool(value, full);
      else if (key == "condense_block") cfg.solver.condense_block = to_int(value, full);
      else throw ConfigError("unknown key '" + full + "'");
    } else if (sec == "scenario") {
      if (key == "reference") cfg.reference = value;
      else if (key == "duration") cfg.duration = to_double(value, full);
      else if (key == "control_rate") cfg.control_rate = to_double(value, full);
      else if (key == "planner_rate") cfg.planner_rate = to_double(value, full);
      else if (key == "integrator_rate") cfg.integrator_rate = to_double(value, full);
      else if (key == "settle_time") cfg.settle_time = to_double(value, full);
      else if (key == "jitter_dt") cfg.jitter_dt = to_bool(value, full);
      else if (key == "truth_feedback") cfg.truth_feedback = to_bool(value, full);
      else throw ConfigError("unknown key '" + full + "'");
    } else {
      throw ConfigError("unknown key '" + full + "'");
    }
  }
  return cfg;
}

inline RepoConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  RepoConfig cfg = parse_config(ss.str());
  const size_t slash = path.find_last_of('/');
  cfg.base_dir = slash == std::string::npos ? std::string(".") : path.substr(0, slash);
  return cfg;
}

/// Normalized serialization: fixed section/key order, full-precision floats.
/// parse(dump(cfg)) reproduces cfg, and dump is idempotent on the result.
inline std::string dump_config(const RepoConfig& cfg) {
  using cfgdetail::fmt17;
  using cfgdetail::vec_str;
  std::ostringstream os;
  auto params = [&](const char* name, const SystemParams& p) {
    os << '[' << name << "]\n"
       << "uav_mass = " << fmt17(p.uav_mass) << '\n'
       << "payload_mass = " << fmt17(p.payload_mass) << '\n'
       << "cable_length = " << fmt17(p.cable_length) << '\n'
       << "uav_drag = " << fmt17(p.uav_drag) << '\n'
       << "payload_drag = " << fmt17(p.payload_drag) << '\n'
       << "gravity = " << fmt17(p.gravity) << '\n'
       << "fcu_gain = " << vec_str(p.fcu_gain) << '\n'
       << "fcu_tau = " << vec_str(p.fcu_tau) << '\n';
  };
  params("model", cfg.model);
  params("plant", cfg.plant);
  os << "[sensor]\n"
     << "pos_noise_std = " << vec_str(cfg.sensor.pos_noise_std) << '\n'
     << "att_noise_std = " << vec_str(cfg.sensor.att_noise_std) << '\n'
     << "measurement_rate = " << fmt17(cfg.sensor.measurement_rate) << '\n'
     << "seed = " << cfg.sensor.seed << '\n';
  os << "[estimator]\n"
     << "process_noise = " << vec_str(cfg.noise.process.diagonal()) << '\n'
     << "measurement_noise = " << vec_str(cfg.noise.measurement.diagonal()) << '\n';
  os << "[controller]\n"
     << "horizon = " << cfg.controller.horizon << '\n'
     << "dt = " << fmt17(cfg.controller.dt) << '\n'
     << "payload_weights = " << vec_str(cfg.controller.payload_weights) << '\n'
     << "input_weights = " << vec_str(cfg.controller.input_weights) << '\n'
     << "rate_weights = " << vec_str(cfg.controller.rate_weights) << '\n'
     << "slack_weight = " << fmt17(cfg.controller.slack_weight) << '\n'
     << "velocity_bound = " << fmt17(cfg.controller.velocity_bound) << '\n'
     << "tilt_bound = " << fmt17(cfg.controller.tilt_bound) << '\n';
  os << "[planner]\n"
     << "horizon = " << cfg.planner.horizon << '\n'
     << "sigma = " << fmt17(cfg.planner.sigma) << '\n'
     << "rate_weights = " << vec_str(cfg.planner.rate_weights) << '\n'
     << "tilt_bound = " << fmt17(cfg.planner.tilt_bound) << '\n'
     << "t_plan = " << fmt17(cfg.planner.t_plan) << '\n'
     << "ol_tail = " << fmt17(cfg.planner.ol_tail) << '\n';
  os << "[solver]\n"
     << "tolerance = " << fmt17(cfg.solver.tolerance) << '\n'
     << "max_iterations = " << cfg.solver.max_iterations << '\n'
     << "rho = " << fmt17(cfg.solver.rho) << '\n'
     << "alpha = " << fmt17(cfg.solver.alpha) << '\n'
     << "adaptive_rho = " << (cfg.solver.adaptive_rho ? "true" : "false") << '\n'
     << "polish = " << (cfg.solver.polish ? "true" : "false") << '\n'
     << "condense = " << (cfg.solver.condense ? "true" : "false") << '\n'
     << "condense_block = " << cfg.solver.condense_block << '\n';
  os << "[scenario]\n"
     << "reference = " << cfg.reference << '\n'
     << "duration = " << fmt17(cfg.duration) << '\n'
     << "control_rate = " << fmt17(cfg.control_rate) << '\n'
     << "planner_rate = " << fmt17(cfg.planner_rate) << '\n'
     << "integrator_rate = " << fmt17(cfg.integrator_rate) << '\n'
     << "settle_time = " << fmt17(cfg.settle_time) << '\n'
     << "jitter_dt = " << (cfg.jitter_dt ? "true" : "false") << '\n'
     << "truth_feedback = " << (cfg.truth_feedback ? "true" : "false") << '\n';
  return os.str();
}

/// Resolves the reference spec: either `square:<dt>[x<laps>]` or a waypoint
/// CSV path (relative paths resolve against the config file's directory).
inline SparseReference resolve_reference(const RepoConfig& cfg) {
  const std::string& spec = cfg.reference;
  if (spec.rfind("square:", 0) == 0) {
    std::string rest = spec.substr(7);
    int laps = 1;
    const size_t x = rest.find('x');
    if (x != std::string::npos) {
      laps = cfgdetail::to_int(rest.substr(x + 1), "scenario.reference laps");
      rest = rest.substr(0, x);
    }
    return square_trajectory(cfgdetail::to_double(rest, "scenario.reference dt"), 5.0, laps);
  }
  std::string path = spec;
  if (!path.empty() && path.front() != '/' && !cfg.base_dir.empty())
    path = cfg.base_dir + "/" + path;
  return read_reference_csv(path);
}

/// Assembles the runnable scenario: resolves the reference, applies the
/// settle-time shift, and copies all component configurations.
inline ScenarioConfig build_scenario(const RepoConfig& cfg) {
  ScenarioConfig sc;
  sc.true_params = cfg.plant;
  sc.nominal_params = cfg.model;
  sc.sensor = cfg.sensor;
  sc.noise = cfg.noise;
  sc.controller = cfg.controller;
  sc.planner = cfg.planner;
  sc.solver = cfg.solver;
  sc.reference = resolve_reference(cfg).shifted(cfg.settle_time);
  sc.duration = cfg.duration;
  sc.control_rate = cfg.control_rate;
  sc.planner_rate = cfg.planner_rate;
  sc.integrator_rate = cfg.integrator_rate;
  sc.jitter_dt = cfg.jitter_dt;
  sc.truth_feedback = cfg.truth_feedback;
  return sc;
}

}  // namespace payload_mpc
