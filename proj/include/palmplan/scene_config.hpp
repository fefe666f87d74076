#pragma once

// Key-value scene files with [section] headers. Sections named
// "perturbation" may repeat; every other section and key appears once.
//
//   [task]
//   mode = sequence
//   start = 0.3 -0.2 0.07 0.38 0.60 0.60 0.38   # x y z qw qx qy qz
//
// '#' and ';' start comments.

#include "palmplan/contact_controller.hpp"
#include "palmplan/planner.hpp"

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace palmplan {

struct ConfigSection {
  std::string name;
  std::map<std::string, std::string> values;
  int line = 0;

  bool has(const std::string& key) const { return values.count(key) > 0; }
};

struct ConfigDocument {
  std::vector<ConfigSection> sections;

  const ConfigSection* find(const std::string& name) const {
    for (const auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }
  std::vector<const ConfigSection*> all(const std::string& name) const {
    std::vector<const ConfigSection*> out;
    for (const auto& s : sections)
      if (s.name == name) out.push_back(&s);
    return out;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline Error config_error(int line, const std::string& what) {
  return Error(ErrorCode::ConfigError, "line " + std::to_string(line) + ": " + what);
}

}  // namespace detail

inline ConfigDocument parse_config(std::istream& in, const std::set<std::string>& repeatable = {"perturbation"}) {
  ConfigDocument doc;
  doc.sections.push_back({"", {}, 0});
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find_first_of("#;");
    const std::string s = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw detail::config_error(line, "unterminated section header");
      const std::string name = detail::trim(s.substr(1, s.size() - 2));
      if (name.empty()) throw detail::config_error(line, "empty section name");
      if (!repeatable.count(name) && doc.find(name)) throw detail::config_error(line, "duplicate section [" + name + "]");
      doc.sections.push_back({name, {}, line});
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw detail::config_error(line, "expected key = value");
    const std::string key = detail::trim(s.substr(0, eq));
    if (key.empty()) throw detail::config_error(line, "empty key");
    auto& values = doc.sections.back().values;
    if (values.count(key)) throw detail::config_error(line, "duplicate key '" + key + "'");
    values[key] = detail::trim(s.substr(eq + 1));
  }
  return doc;
}

inline ConfigDocument load_config(const std::string& path,
                                  const std::set<std::string>& repeatable = {"perturbation"}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path);
  return parse_config(in, repeatable);
}

/// Typed reads with the section name in error messages.
class SectionReader {
 public:
  SectionReader(const ConfigSection* s, std::string name) : s_(s), name_(std::move(name)) {}

  bool present() const { return s_ != nullptr; }
  bool has(const std::string& key) const { return s_ && s_->has(key); }

  std::vector<double> numbers(const std::string& key) const {
    std::istringstream in(raw(key));
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || !std::isfinite(v)) fail(key, "'" + tok + "' is not a finite number");
      out.push_back(v);
    }
    return out;
  }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto v = numbers(key);
    if (v.size() != 1) fail(key, "expected one number");
    return v[0];
  }

  Vec3 vec3(const std::string& key, const Vec3& fallback) const {
    if (!has(key)) return fallback;
    const auto v = numbers(key);
    if (v.size() != 3) fail(key, "expected three numbers");
    return Vec3(v[0], v[1], v[2]);
  }

  /// Seven numbers: position then quaternion w x y z.
  Pose3 pose(const std::string& key) const {
    if (!has(key)) fail(key, "missing");
    const auto v = numbers(key);
    if (v.size() != 7) fail(key, "expected x y z qw qx qy qz");
    const Eigen::Quaterniond q(v[3], v[4], v[5], v[6]);
    if (q.norm() < 1e-9) fail(key, "zero quaternion");
    return Pose3(Vec3(v[0], v[1], v[2]), q.normalized());
  }

  std::string text(const std::string& key, const std::string& fallback) const { return has(key) ? raw(key) : fallback; }

  std::vector<std::string> words(const std::string& key) const {
    std::istringstream in(raw(key));
    std::vector<std::string> out;
    for (std::string w; in >> w;) {
      if (w.back() == ',') w.pop_back();
      if (!w.empty()) out.push_back(w);
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw Error(ErrorCode::ConfigError, "[" + name_ + "] " + key + ": " + what);
  }

  /// Rejects keys outside `known`.
  void only(const std::set<std::string>& known) const {
    if (!s_) return;
    for (const auto& [k, v] : s_->values)
      if (!known.count(k)) fail(k, "unknown key");
  }

 private:
  const std::string& raw(const std::string& key) const {
    if (!has(key)) fail(key, "missing");
    return s_->values.at(key);
  }

  const ConfigSection* s_;
  std::string name_;
};

/// Constant wrench on the object's center of mass over [start, start + duration).
struct Perturbation {
  double start = 0.0;
  double duration = 0.0;
  Wrench wrench;

  bool active(double t) const { return t >= start - 1e-12 && t < start + duration - 1e-12; }
};

enum class TaskMode { Sequence, Pull, Grasp, Push, Pivot };

inline const char* to_string(TaskMode m) {
  switch (m) {
    case TaskMode::Sequence: return "sequence";
    case TaskMode::Pull: return "pull";
    case TaskMode::Grasp: return "grasp";
    case TaskMode::Push: return "push";
    case TaskMode::Pivot: return "pivot";
  }
  return "?";
}

struct SimSettings {
  double noise_pos = 3e-4;          // m
  double noise_ang = 0.005;         // rad
  double replan_threshold = 1e-3;   // d_TS to the active plan
  int replan_window = 5;            // ticks the deviation must persist; the replan starts from their mean
  double slip_threshold = 1e-6;     // m of relative tangential travel per tick
  double linear_damping = 100.0;    // N s/m, viscous slip
  double angular_damping = 2.0;     // N m s/rad
  double footprint_radius = 0.08;   // m, tactile sensing disc around each palm contact
  double settle_time = 1.0;         // s simulated after the last plan sample
  int max_failures = 10;            // consecutive controller failures tolerated
};

struct SceneConfig {
  ObjectModel model;
  PlannerConfig planner;
  ControllerSettings controller;
  SimSettings sim;
  TaskMode mode = TaskMode::Sequence;
  Pose3 start;
  Pose3 goal;
  std::optional<double> duration;  // total simulated time; default is plan end plus settle time
  std::vector<Perturbation> perturbations;
  std::uint64_t seed = 1;
};

inline TaskMode task_mode_from_string(const std::string& s) {
  for (TaskMode m : {TaskMode::Sequence, TaskMode::Pull, TaskMode::Grasp, TaskMode::Push, TaskMode::Pivot})
    if (s == to_string(m)) return m;
  throw Error(ErrorCode::ConfigError, "unknown task mode '" + s + "'");
}

/// Object geometry from an optional [object] section.
inline ObjectModel read_object(const ConfigDocument& doc) {
  const ObjectModel defaults;
  const SectionReader obj(doc.find("object"), "object");
  obj.only({"extents", "mass"});
  const Vec3 ext = obj.vec3("extents", defaults.extents());
  const double mass = obj.number("mass", defaults.mass());
  if (!(ext.minCoeff() > 0.0)) obj.fail("extents", "must be positive");
  if (!(mass > 0.0)) obj.fail("mass", "must be positive");
  return ObjectModel(ext, mass);
}

/// Friction overrides from an optional [friction] section.
inline void read_friction(const ConfigDocument& doc, FormationParams& fp) {
  const SectionReader fr(doc.find("friction"), "friction");
  fr.only({"palm", "table", "palm_patch_radius", "palm_ls", "table_ls"});
  fp.mu_palm = fr.number("palm", fp.mu_palm);
  fp.mu_table = fr.number("table", fp.mu_table);
  fp.palm_patch = PatchModel(fr.number("palm_patch_radius", fp.palm_patch.characteristic_radius),
                             fr.number("palm_ls", fp.palm_patch.ls_coefficient));
  fp.ls_coefficient = fr.number("table_ls", fp.ls_coefficient);
  if (!(fp.mu_palm > 0.0)) fr.fail("palm", "must be positive");
  if (!(fp.mu_table > 0.0)) fr.fail("table", "must be positive");
}

/// Controller overrides from an optional [controller] section.
inline void read_controller(const ConfigDocument& doc, ControllerSettings& cc) {
  const SectionReader ct(doc.find("controller"), "controller");
  ct.only({"beta_slip", "beta_stick", "pos_bound", "rot_bound", "force_bound"});
  cc.beta_slip = ct.number("beta_slip", cc.beta_slip);
  cc.beta_stick = ct.number("beta_stick", cc.beta_stick);
  cc.pos_bound = ct.number("pos_bound", cc.pos_bound);
  cc.rot_bound = ct.number("rot_bound", cc.rot_bound);
  cc.force_bound = ct.number("force_bound", cc.force_bound);
  if (cc.beta_slip < 0.0 || cc.beta_stick < 0.0 || cc.pos_bound < 0.0 || cc.rot_bound < 0.0 || cc.force_bound < 0.0)
    throw Error(ErrorCode::ConfigError, "[controller] weights and bounds must be non-negative");
}

/// Rejects sections outside `known`; the unnamed leading section must be empty.
inline void check_sections(const ConfigDocument& doc, const std::set<std::string>& known) {
  for (const auto& s : doc.sections) {
    if (s.name.empty()) {
      if (!s.values.empty()) throw Error(ErrorCode::ConfigError, "keys before the first section");
      continue;
    }
    if (!known.count(s.name)) throw detail::config_error(s.line, "unknown section [" + s.name + "]");
  }
}

inline SceneConfig scene_from_document(const ConfigDocument& doc) {
  check_sections(doc, {"object", "friction", "task", "planner", "controller", "sim", "perturbation"});
  SceneConfig sc;

  sc.model = read_object(doc);
  read_friction(doc, sc.planner.formation);

  const SectionReader task(doc.find("task"), "task");
  if (!task.present()) throw Error(ErrorCode::ConfigError, "missing [task] section");
  task.only({"mode", "start", "goal", "primitives", "duration"});
  sc.mode = task_mode_from_string(task.text("mode", "sequence"));
  sc.start = task.pose("start");
  sc.goal = task.has("goal") ? task.pose("goal") : sc.start;
  if (task.has("primitives")) {
    sc.planner.enabled.clear();
    for (const auto& w : task.words("primitives")) {
      try {
        sc.planner.enabled.insert(primitive_from_string(w));
      } catch (const Error&) {
        task.fail("primitives", "unknown primitive '" + w + "'");
      }
    }
  }
  if (task.has("duration")) {
    sc.duration = task.number("duration", 0.0);
    if (!(*sc.duration > 0.0)) task.fail("duration", "must be positive");
  }

  const SectionReader pl(doc.find("planner"), "planner");
  pl.only({"linear_speed", "angular_speed", "rate", "pull_force", "squeeze_margin", "cost_pivot", "cost_push",
           "cost_pull", "cost_grasp", "cost_per_meter", "cost_palm_switch"});
  auto& pc = sc.planner;
  pc.linear_speed = pl.number("linear_speed", pc.linear_speed);
  pc.angular_speed = pl.number("angular_speed", pc.angular_speed);
  pc.rate = pl.number("rate", pc.rate);
  pc.pull_force = pl.number("pull_force", pc.pull_force);
  pc.squeeze_margin = pl.number("squeeze_margin", pc.squeeze_margin);
  pc.cost_pivot = pl.number("cost_pivot", pc.cost_pivot);
  pc.cost_push = pl.number("cost_push", pc.cost_push);
  pc.cost_pull = pl.number("cost_pull", pc.cost_pull);
  pc.cost_grasp = pl.number("cost_grasp", pc.cost_grasp);
  pc.cost_per_meter = pl.number("cost_per_meter", pc.cost_per_meter);
  pc.cost_palm_switch = pl.number("cost_palm_switch", pc.cost_palm_switch);
  for (double v : {pc.linear_speed, pc.angular_speed, pc.rate, pc.cost_pivot, pc.cost_push, pc.cost_pull,
                   pc.cost_grasp})
    if (!(v > 0.0)) throw Error(ErrorCode::ConfigError, "[planner] speeds, rate and costs must be positive");

  read_controller(doc, sc.controller);

  const SectionReader sim(doc.find("sim"), "sim");
  sim.only({"seed", "noise_pos", "noise_ang", "replan_threshold", "replan_window", "linear_damping", "angular_damping",
            "footprint_radius", "settle_time"});
  auto& ss = sc.sim;
  const double seed = sim.number("seed", 1.0);
  if (seed < 0.0 || seed != std::floor(seed) || seed > 9.007199254740992e15) sim.fail("seed", "must be a non-negative integer");
  sc.seed = static_cast<std::uint64_t>(seed);
  ss.noise_pos = sim.number("noise_pos", ss.noise_pos);
  ss.noise_ang = sim.number("noise_ang", ss.noise_ang);
  ss.replan_threshold = sim.number("replan_threshold", ss.replan_threshold);
  const double window = sim.number("replan_window", ss.replan_window);
  if (window < 1.0 || window != std::floor(window) || window > 1000.0) sim.fail("replan_window", "must be an integer in [1, 1000]");
  ss.replan_window = static_cast<int>(window);
  ss.linear_damping = sim.number("linear_damping", ss.linear_damping);
  ss.angular_damping = sim.number("angular_damping", ss.angular_damping);
  ss.footprint_radius = sim.number("footprint_radius", ss.footprint_radius);
  ss.settle_time = sim.number("settle_time", ss.settle_time);
  if (ss.noise_pos < 0.0 || ss.noise_ang < 0.0) throw Error(ErrorCode::ConfigError, "[sim] noise must be non-negative");
  if (!(ss.linear_damping > 0.0 && ss.angular_damping > 0.0 && ss.replan_threshold > 0.0))
    throw Error(ErrorCode::ConfigError, "[sim] damping and replan threshold must be positive");

  for (const auto* s : doc.all("perturbation")) {
    const SectionReader pr(s, "perturbation");
    pr.only({"start", "duration", "force", "torque"});
    Perturbation p;
    p.start = pr.number("start", 0.0);
    p.duration = pr.number("duration", 0.0);
    if (!(p.duration > 0.0)) pr.fail("duration", "must be positive");
    if (p.start < 0.0) pr.fail("start", "must be non-negative");
    p.wrench = Wrench(pr.vec3("force", Vec3::Zero()), pr.vec3("torque", Vec3::Zero()));
    sc.perturbations.push_back(p);
  }
  return sc;
}

inline SceneConfig load_scene(const std::string& path) { return scene_from_document(load_config(path)); }

inline SceneConfig parse_scene(const std::string& text) {
  std::istringstream in(text);
  return scene_from_document(parse_config(in));
}

}  // namespace palmplan
