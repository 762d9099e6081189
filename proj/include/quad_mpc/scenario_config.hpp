#pragma once

// Flat INI-style scenario files. Lines are `section.key = value`, or
// `key = value` under a `[section]` header. `#` and `;` start comments.
// Unset keys keep their built-in defaults, so an empty file runs a trot.

#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "quad_mpc/common.hpp"
#include "quad_mpc/sim_harness.hpp"

namespace quad_mpc {

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

// Locale-independent number parsing.
inline double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc() || ptr != end || t.empty())
    throw ConfigError("'" + key + "': expected a number, got '" + text + "'");
  return v;
}

inline int parse_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  int v = 0;
  const auto* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc() || ptr != end || t.empty())
    throw ConfigError("'" + key + "': expected an integer, got '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("'" + key + "': expected a boolean, got '" + text + "'");
}

// "a" broadcasts to all three axes; "a, b, c" sets them individually.
inline Vec3 parse_vec3(const std::string& key, const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() == 1) return Vec3::Constant(parse_double(key, parts[0]));
  if (parts.size() == 3)
    return Vec3(parse_double(key, parts[0]), parse_double(key, parts[1]), parse_double(key, parts[2]));
  throw ConfigError("'" + key + "': expected 1 or 3 comma-separated numbers");
}

}  // namespace detail

/// Output directory is not part of the simulation itself.
struct ScenarioFile {
  ScenarioConfig config;
  std::string output_dir;
};

/// Apply one `section.key = value` assignment.
inline void apply_setting(ScenarioFile& file, const std::string& key_in, const std::string& value) {
  using namespace detail;
  const std::string key = trim(key_in);
  ScenarioConfig& c = file.config;
  auto num = [&] { return parse_double(key, value); };

  if (key == "scenario.name") c.name = trim(value);
  else if (key == "robot.mass") c.robot.mass = num();
  else if (key == "robot.inertia") c.robot.inertia_body = parse_vec3(key, value).asDiagonal();
  else if (key == "robot.gravity") c.robot.gravity = num();
  else if (key == "robot.mu") c.robot.mu = num();
  else if (key == "robot.body_length") c.robot.body_length = num();
  else if (key == "robot.body_width") c.robot.body_width = num();
  else if (key == "robot.body_height") c.robot.body_height = num();
  else if (key == "robot.link_length") c.robot.link_length = num();
  else if (key == "robot.nominal_height") c.robot.nominal_height = num();
  else if (key == "gait.name") {
    gait_table(trim(value));  // throws UnknownGait with the valid names
    c.gait = trim(value);
  }
  else if (key == "gait.settle_time") c.settle_time = num();
  else if (key == "command.v_x") c.command.v_d.x() = num();
  else if (key == "command.v_y") c.command.v_d.y() = num();
  else if (key == "command.accel") c.command.a_d = num();
  else if (key == "command.psi_d") c.command.psi_d = num();
  else if (key == "command.omega_psi_d") c.command.omega_psi_d = num();
  else if (key == "command.z0") c.command.z0 = num();
  else if (key == "weights.q_p") c.weights.q_p = parse_vec3(key, value);
  else if (key == "weights.q_v") c.weights.q_v = parse_vec3(key, value);
  else if (key == "weights.q_theta") c.weights.q_theta = parse_vec3(key, value);
  else if (key == "weights.q_omega") c.weights.q_omega = parse_vec3(key, value);
  else if (key == "weights.k_u") c.weights.k_u = parse_vec3(key, value);
  else if (key == "mpc.horizon") c.horizon = parse_int(key, value);
  else if (key == "mpc.dt") c.dt_mpc = num();
  else if (key == "mpc.fz_min") c.fz_min = num();
  else if (key == "mpc.fz_max") c.fz_max = num();
  else if (key == "mpc.warm_start") c.warm_start = parse_bool(key, value);
  else if (key == "sim.dt") c.dt_sim = num();
  else if (key == "sim.duration") c.duration = num();
  else if (key == "swing.apex_height") c.apex_height = num();
  else if (key == "output.dir") file.output_dir = trim(value);
  else if (key.rfind("disturbance.", 0) == 0) {
    // disturbance.<index>.<field>
    const auto parts = split(key, '.');
    if (parts.size() != 3) throw ConfigError("'" + key + "': expected disturbance.<index>.<field>");
    const int index = parse_int(key, parts[1]);
    if (index < 0 || index > 64) throw ConfigError("'" + key + "': disturbance index out of range");
    if (static_cast<int>(c.disturbances.size()) <= index) c.disturbances.resize(index + 1);
    DisturbanceSpec& d = c.disturbances[index];
    const std::string& field = parts[2];
    if (field == "onset") d.onset = num();
    else if (field == "window") d.window = num();
    else if (field == "peak") d.peak = parse_vec3(key, value);
    else if (field == "peak_y") d.peak = Vec3(0.0, num(), 0.0);
    else if (field == "peak_is_control_point") d.peak_is_control_point = parse_bool(key, value);
    else throw ConfigError("unknown key '" + key + "'");
  }
  else throw ConfigError("unknown key '" + key + "'");

  // Keep the height reference tied to the robot unless set explicitly.
  if (key == "robot.nominal_height") c.command.z0 = c.robot.nominal_height;
}

/// Apply a `key=value` override as given on the command line.
inline void apply_override(ScenarioFile& file, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "': expected key=value");
  apply_setting(file, assignment.substr(0, eq), assignment.substr(eq + 1));
}

inline ScenarioFile parse_scenario(std::istream& in, const std::string& source = "<config>") {
  ScenarioFile file;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    try {
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("unterminated section header");
        section = detail::trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("expected key = value");
      std::string key = detail::trim(line.substr(0, eq));
      if (!section.empty()) key = section + "." + key;
      apply_setting(file, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const UnknownGait& e) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return file;
}

inline ScenarioFile parse_scenario_string(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

inline ScenarioFile load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  return parse_scenario(in, path);
}

}  // namespace quad_mpc
