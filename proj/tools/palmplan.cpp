// Command-line front end: plan, simulate, single controller step, single
// pose estimate.

#include "palmplan/sim.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace palmplan;

namespace {

enum Exit { kOk = 0, kInternal = 1, kConfig = 2, kPlanner = 3, kSimulation = 4 };

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument: return kConfig;
    case ErrorCode::Unreachable:
    case ErrorCode::OutOfWorkspace:
    case ErrorCode::PivotInfeasible:
    case ErrorCode::NoFeasibleSide: return kPlanner;
    default: return kSimulation;
  }
}

std::string pose_text(const Pose3& p) {
  const auto& q = p.orientation();
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.10g %.10g %.10g %.10g %.10g %.10g %.10g", p.position().x(), p.position().y(),
                p.position().z(), q.w(), q.x(), q.y(), q.z());
  return buf;
}

std::string vec_text(const Eigen::VectorXd& v) {
  std::string s;
  char buf[64];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.10g", i ? " " : "", std::abs(v(i)) < 1e-12 ? 0.0 : v(i));
    s += buf;
  }
  return s;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path);
  return out;
}

int integer(const SectionReader& r, const std::string& key, int lo, int hi) {
  const double v = r.number(key, 0.0);
  if (v != std::floor(v) || v < lo || v > hi)
    r.fail(key, "expected an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(v);
}

// ---------------------------------------------------------------------------

int run_plan(const std::string& scene_path, const std::string& out_path) {
  const SceneConfig sc = load_scene(scene_path);
  std::vector<PrimitivePlan> plans;
  std::optional<TaskPlan> task;
  if (sc.mode == TaskMode::Sequence) {
    task = plan_task(sc.start, sc.goal, sc.model, sc.planner);
    plans = task->plans;
  } else {
    plans = build_plans(sc);
  }
  auto out = open_out(out_path);
  write_plan_log(out, plans, task ? &*task : nullptr);
  double total = 0.0;
  std::cout << "primitives:";
  for (const auto& p : plans) {
    std::cout << ' ' << to_string(p.primitive);
    total += p.duration;
  }
  std::cout << "\nduration: " << total << " s\n";
  return kOk;
}

int run_simulate(const std::string& scene_path, std::optional<std::uint64_t> seed, const std::string& out_path,
                 bool open_loop) {
  SceneConfig sc = load_scene(scene_path);
  if (seed) sc.seed = *seed;
  const RunResult r = run_closed_loop(sc, open_loop);
  auto out = open_out(out_path);
  write_csv(out, r.ticks);
  const TickRecord& last = r.ticks.back();
  double worst = 0.0;
  for (const auto& k : r.ticks) worst = std::max(worst, k.err_pos);
  std::cout << "seed: " << sc.seed << "\n"
            << "mode: " << (open_loop ? "open-loop" : "closed-loop") << "\n"
            << "ticks: " << r.ticks.size() << "\n"
            << "replans: " << r.replans << " (failed " << r.replan_failures << ")\n"
            << "controller_steps: " << r.controller_runs << "\n"
            << "final_error: " << last.err_pos << " m, " << last.err_ang << " rad\n"
            << "max_position_error: " << worst << " m\n";
  return kOk;
}

// A controller state file: the formation, object and palm poses, and the
// external load on the object.
struct ControlState {
  ContactFormation formation;
  StackedPose q;
  ControllerSettings controller;
};

ControlState load_control_state(const std::string& path) {
  const ConfigDocument doc = load_config(path);
  check_sections(doc, {"object", "friction", "controller", "planner", "state", "load"});
  const ObjectModel m = read_object(doc);
  PlannerConfig pc;
  read_friction(doc, pc.formation);
  ControlState st;
  read_controller(doc, st.controller);
  const SectionReader pl(doc.find("planner"), "planner");
  pl.only({"pull_force", "squeeze_margin"});
  pc.pull_force = pl.number("pull_force", pc.pull_force);
  pc.squeeze_margin = pl.number("squeeze_margin", pc.squeeze_margin);

  const SectionReader s(doc.find("state"), "state");
  if (!s.present()) throw Error(ErrorCode::ConfigError, "missing [state] section");
  s.only({"primitive", "object", "left", "right", "edge", "pushed_face", "normal_force"});
  Primitive prim;
  try {
    prim = primitive_from_string(s.text("primitive", ""));
  } catch (const Error&) {
    s.fail("primitive", "expected pull, grasp, push or pivot");
  }
  const Pose3 object = s.pose("object");
  std::optional<double> normal;
  if (s.has("normal_force")) normal = s.number("normal_force", 0.0);
  switch (prim) {
    case Primitive::Pull:
      st.formation = pull_formation(m, resting_face(m, object), pc.formation, normal ? *normal : pc.pull_force);
      break;
    case Primitive::Grasp:
      st.formation = grasp_formation(m, resting_face(m, object), pc.formation,
                                     normal ? *normal : grasp_squeeze(m, object, pc));
      break;
    case Primitive::Push:
      if (!s.has("pushed_face")) s.fail("pushed_face", "missing");
      st.formation = push_formation(m, resting_face(m, object), integer(s, "pushed_face", 0, 5), pc.formation);
      break;
    case Primitive::Pivot:
      if (!s.has("edge")) s.fail("edge", "missing");
      st.formation = pivot_formation(m, integer(s, "edge", 0, 11), pc.formation);
      break;
  }
  st.q = attach_palms(st.formation, object, pc.left_home);
  if (st.formation.palm_contact_count() < 2) st.q.right = pc.right_home;
  if (s.has("left")) st.q.left = s.pose("left");
  if (s.has("right")) st.q.right = s.pose("right");

  const SectionReader ld(doc.find("load"), "load");
  ld.only({"force", "torque"});
  st.formation.disturbance = Wrench(ld.vec3("force", Vec3::Zero()), ld.vec3("torque", Vec3::Zero()));
  return st;
}

std::array<int, 2> parse_slip(const std::string& text) {
  std::array<int, 2> bits{0, 0};
  std::size_t n = 0;
  std::istringstream in(text);
  for (std::string tok; std::getline(in, tok, ',');) {
    if (n >= 2 || (tok != "0" && tok != "1")) throw Error(ErrorCode::ConfigError, "--slip expects two bits like 1,0");
    bits[n++] = tok == "1";
  }
  if (n != 2) throw Error(ErrorCode::ConfigError, "--slip expects two bits like 1,0");
  return bits;
}

int run_control_step(const std::string& state_path, const std::string& slip_text) {
  const auto bits = parse_slip(slip_text);
  const ControlState st = load_control_state(state_path);
  auto lin = solve_equilibrium(st.formation, st.q);
  if (!lin.feasible) {
    ContactFormation free = st.formation;
    for (auto& c : free.contacts) c.normal_force.reset();
    lin = solve_equilibrium(free, st.q);
  }
  if (!lin.feasible) throw Error(ErrorCode::NoConsistentMode, "no equilibrium to linearize about");
  SlipSignal signal;
  for (const auto& c : st.formation.contacts) signal.bits.push_back(is_palm(c.role) ? bits[palm_index(c.role)] : 0);
  const ControlAdjustment adj = control_step(st.formation, st.q, lin.wrenches, signal, st.controller);
  std::cout << "applied: " << (adj.applied ? "yes" : "no") << "\n";
  if (!adj.diagnostic.empty()) std::cout << "diagnostic: " << adj.diagnostic << "\n";
  for (int i = 0; i < 2; ++i) {
    std::cout << (i ? "right" : "left") << "_delta_position: " << vec_text(adj.delta_position[i]) << "\n";
    std::cout << (i ? "right" : "left") << "_delta_rotation: " << vec_text(adj.delta_rotation[i]) << "\n";
  }
  for (std::size_t i = 0; i < adj.wrenches.size(); ++i) {
    std::cout << "contact " << i << " wrench: " << vec_text(adj.wrenches[i].vector());
    if (i < adj.achieved_alphas.size()) std::cout << " margin: " << adj.achieved_alphas[i];
    std::cout << "\n";
  }
  return kOk;
}

int run_estimate(const std::string& features_path, const std::string& prior_path) {
  const ConfigDocument doc = load_config(features_path, {"feature"});
  check_sections(doc, {"object", "estimate", "feature"});
  const ObjectModel m = read_object(doc);
  const SectionReader es(doc.find("estimate"), "estimate");
  if (!es.present()) throw Error(ErrorCode::ConfigError, "missing [estimate] section");
  es.only({"primitive", "left", "right"});
  Primitive prim;
  try {
    prim = primitive_from_string(es.text("primitive", ""));
  } catch (const Error&) {
    es.fail("primitive", "expected pull, grasp, push or pivot");
  }
  const Pose3 left = es.pose("left");
  const Pose3 right = es.has("right") ? es.pose("right") : left;

  std::vector<TactileFeature> features;
  for (const auto* sec : doc.all("feature")) {
    const SectionReader fr(sec, "feature");
    fr.only({"palm", "kind", "point", "direction", "target"});
    TactileFeature f;
    const std::string palm = fr.text("palm", "left"), kind = fr.text("kind", "");
    if (palm != "left" && palm != "right") fr.fail("palm", "expected left or right");
    if (kind != "point" && kind != "line") fr.fail("kind", "expected point or line");
    f.palm = palm == "left" ? PalmSide::Left : PalmSide::Right;
    f.kind = kind == "point" ? FeatureKind::Point : FeatureKind::Line;
    if (!fr.has("point")) fr.fail("point", "missing");
    f.point = fr.vec3("point", Vec3::Zero());
    if (f.kind == FeatureKind::Line) {
      if (!fr.has("direction")) fr.fail("direction", "missing");
      f.direction = fr.vec3("direction", Vec3::UnitX());
    }
    if (!fr.has("target")) fr.fail("target", "missing");
    f.target_id = integer(fr, "target", 0, f.kind == FeatureKind::Point ? 7 : 11);
    features.push_back(f);
  }

  const ConfigDocument pdoc = load_config(prior_path);
  check_sections(pdoc, {"prior"});
  const SectionReader pr(pdoc.find("prior"), "prior");
  if (!pr.present()) throw Error(ErrorCode::ConfigError, "missing [prior] section");
  pr.only({"pose"});
  const Pose3 prior = pr.pose("pose");

  const PoseEstimate e = estimate(prior, features, {left, right}, m, prim);
  std::cout << "pose: " << pose_text(e.pose) << "\n"
            << "prior_distance: " << e.residual << "\n"
            << "placement_residual: " << e.placement_residual << "\n"
            << "iterations: " << e.iterations << "\n";
  for (std::size_t i = 0; i < e.feature_residuals.size(); ++i)
    std::cout << "feature " << i << " residual: " << e.feature_residuals[i] << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planning, control and estimation for dual-palm manipulation"};
  app.require_subcommand(1);

  std::string scene, out, state, slip, features, prior;
  std::optional<std::uint64_t> seed;
  bool open_loop = false;

  auto* plan = app.add_subcommand("plan", "Plan a scene and write the plan log");
  plan->add_option("--scene", scene, "Scene config")->required();
  plan->add_option("--out", out, "Plan log path")->required();

  auto* sim = app.add_subcommand("simulate", "Run a scene and write the per-tick CSV log");
  sim->add_option("--scene", scene, "Scene config")->required();
  sim->add_option("--seed", seed, "Noise seed (overrides the scene)");
  sim->add_option("--out", out, "CSV path")->required();
  sim->add_flag("--open-loop", open_loop, "Disable estimation, replanning and control");

  auto* ctl = app.add_subcommand("control-step", "One contact-controller step");
  ctl->add_option("--state", state, "State config")->required();
  ctl->add_option("--slip", slip, "Palm slip bits, left,right")->required();

  auto* est = app.add_subcommand("estimate", "One pose estimate from tactile features");
  est->add_option("--features", features, "Feature config")->required();
  est->add_option("--prior", prior, "Prior pose config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*plan) return run_plan(scene, out);
    if (*sim) return run_simulate(scene, seed, out, open_loop);
    if (*ctl) return run_control_step(state, slip);
    if (*est) return run_estimate(features, prior);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}
