#pragma once

// Primitive sequencing over stable placements plus per-primitive trajectory
// planners (pull, grasp, pivot, push) and replanning from a new object pose.

#include "palmplan/dubins.hpp"
#include "palmplan/graph.hpp"
#include "palmplan/mechanics.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace palmplan {

struct Workspace {
  double x_min = 0.05, x_max = 0.8;
  double y_min = -0.45, y_max = 0.45;
  // Central region where pivots are allowed.
  double pivot_x_min = 0.325, pivot_x_max = 0.475;
  double pivot_y_min = -0.1, pivot_y_max = 0.1;

  bool contains(double x, double y) const { return x >= x_min && x <= x_max && y >= y_min && y <= y_max; }
  bool in_pivot_region(double x, double y) const {
    return x >= pivot_x_min - 1e-9 && x <= pivot_x_max + 1e-9 && y >= pivot_y_min - 1e-9 && y <= pivot_y_max + 1e-9;
  }
  Vec2 pivot_center() const { return Vec2(0.5 * (pivot_x_min + pivot_x_max), 0.5 * (pivot_y_min + pivot_y_max)); }
};

struct PlannerConfig {
  Workspace workspace;
  FormationParams formation;
  std::set<Primitive> enabled = {Primitive::Grasp, Primitive::Push, Primitive::Pivot, Primitive::Pull};
  double cost_pivot = 1.0;
  double cost_push = 0.5;
  double cost_pull = 0.4;
  double cost_grasp = 1.5;
  double cost_per_meter = 0.1;
  double cost_palm_switch = 0.2;  // changing between top and side palm configurations
  double linear_speed = 0.05;     // m/s
  double angular_speed = 0.3;     // rad/s
  double rate = 100.0;            // samples per second
  double pull_force = 5.0;        // N, top palm setpoint
  double squeeze_margin = 0.2;    // grasp setpoint above the minimum squeeze
  bool check_pivot_equilibrium = true;
  Pose3 left_home = Pose3(Vec3(0.4, 0.35, 0.4), Eigen::Quaterniond::Identity());
  Pose3 right_home = Pose3(Vec3(0.4, -0.35, 0.4), Eigen::Quaterniond::Identity());

  double dt() const { return 1.0 / rate; }
  /// Minimum pushing turning radius from the palm patch limit-surface aspect ratio.
  double push_radius() const { return formation.palm_patch.ls_coefficient * formation.palm_patch.characteristic_radius; }
};

// ---------------------------------------------------------------------------
// Placement graph

struct GraphEdge {
  int src = 0;
  int dst = 0;
  Primitive primitive = Primitive::Pull;
  double cost = 0.0;  // base cost; in-plane edges add a length term at search time
};

struct ManipulationGraph {
  ObjectModel model;
  PlannerConfig config;
  std::vector<int> nodes;  // stable faces
  std::vector<GraphEdge> edges;

  bool has_node(int face) const { return std::find(nodes.begin(), nodes.end(), face) != nodes.end(); }
};

inline ManipulationGraph build_graph(const ObjectModel& model, const PlannerConfig& cfg = {}) {
  ManipulationGraph g;
  g.model = model;
  g.config = cfg;
  g.nodes = model.stable_placements();
  if (g.nodes.empty()) throw Error(ErrorCode::InvalidArgument, "object has no stable placement");
  auto enabled = [&](Primitive p) { return cfg.enabled.count(p) > 0; };
  for (int f : g.nodes) {
    if (enabled(Primitive::Grasp)) g.edges.push_back({f, f, Primitive::Grasp, cfg.cost_grasp});
    if (enabled(Primitive::Push)) g.edges.push_back({f, f, Primitive::Push, cfg.cost_push});
    if (enabled(Primitive::Pivot))
      for (int h : g.nodes)
        if (ObjectModel::adjacent(f, h) && model.shared_edge(f, h) >= 0)
          g.edges.push_back({f, h, Primitive::Pivot, cfg.cost_pivot});
    if (enabled(Primitive::Pull)) g.edges.push_back({f, f, Primitive::Pull, cfg.cost_pull});
  }
  return g;
}

// ---------------------------------------------------------------------------
// Push geometry

/// Heading offset of the pushing direction for palm-on-face `side` while the
/// object rests on `face`: the object moves along -normal(side).
inline double push_heading_offset(const ObjectModel& m, int face, int side) {
  const Vec3 d = m.rest_rotation(face) * (-m.faces().at(side).normal);
  return std::atan2(d.y(), d.x());
}

inline std::vector<int> lateral_faces(int face) {
  std::vector<int> out;
  for (int s = 0; s < 6; ++s)
    if (ObjectModel::adjacent(face, s)) out.push_back(s);
  return out;
}

struct PushChoice {
  int side = -1;
  double heading_offset = 0.0;
  DubinsPath path;
};

/// Dubins path for each lateral side; the shortest one whose samples stay on
/// the table wins, ties broken by side index.
inline std::optional<PushChoice> best_push(const ObjectModel& m, int face, const PlanarPose& a, const PlanarPose& b,
                                           const PlannerConfig& cfg, bool check_workspace = true) {
  std::optional<PushChoice> best;
  for (int side : lateral_faces(face)) {
    const double off = push_heading_offset(m, face, side);
    const DubinsPath p = shortest_dubins({a.x, a.y, wrap_angle(a.yaw + off)}, {b.x, b.y, wrap_angle(b.yaw + off)},
                                         cfg.push_radius());
    if (check_workspace) {
      bool inside = true;
      const int n = std::max(1, static_cast<int>(std::ceil(p.length() / 0.005)));
      for (int k = 0; k <= n && inside; ++k) {
        const auto s = p.sample(p.length() * k / n);
        inside = cfg.workspace.contains(s.x, s.y);
      }
      if (!inside) continue;
    }
    if (!best || p.length() < best->path.length() - 1e-12) best = PushChoice{side, off, p};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Sequence search

struct SequenceStep {
  Primitive primitive = Primitive::Pull;
  int src = 0;
  int dst = 0;
  PlanarPose from;  // nominal planar poses used for costing
  PlanarPose to;
  double cost = 0.0;
};

inline bool same_planar(const PlanarPose& a, const PlanarPose& b, double tol = 1e-9) {
  return std::abs(a.x - b.x) <= tol && std::abs(a.y - b.y) <= tol && std::abs(wrap_angle(a.yaw - b.yaw)) <= tol;
}

namespace detail {

enum class Site { Start, Region, Goal };
enum class PalmClass { Top, Side };

inline PalmClass palm_class(Primitive p) { return p == Primitive::Pull ? PalmClass::Top : PalmClass::Side; }

}  // namespace detail

/// Minimum-cost primitive sequence. The search runs over (face, site, palm
/// configuration) where the site is the start pose, the pivot region or the
/// goal pose; pivots are only allowed inside the pivot region.
inline std::vector<SequenceStep> search_sequence(const ManipulationGraph& g, const Placement& start,
                                                 const Placement& goal) {
  using detail::PalmClass;
  using detail::Site;
  if (!g.has_node(start.face) || !g.has_node(goal.face))
    throw Error(ErrorCode::InvalidArgument, "start or goal face is not a stable placement");
  if (start.face == goal.face && same_planar(start.pose, goal.pose)) return {};
  const PlannerConfig& cfg = g.config;
  const Vec2 center = cfg.workspace.pivot_center();

  auto site_pose = [&](int face, Site s) -> std::optional<PlanarPose> {
    if (s == Site::Start) return face == start.face ? std::optional(start.pose) : std::nullopt;
    if (s == Site::Goal) return face == goal.face ? std::optional(goal.pose) : std::nullopt;
    const double yaw = face == goal.face ? goal.pose.yaw : face == start.face ? start.pose.yaw : 0.0;
    return PlanarPose{center.x(), center.y(), yaw};
  };
  auto node = [](int face, Site s, PalmClass c) { return (face * 3 + static_cast<int>(s)) * 2 + static_cast<int>(c); };
  const int sink = 6 * 3 * 2;

  std::vector<WeightedEdge> edges;
  std::vector<SequenceStep> steps;  // parallel to edges; sink edges carry a dummy step
  // Graph edges in (primitive order, destination face) order for deterministic ties.
  std::vector<GraphEdge> ordered = g.edges;
  std::stable_sort(ordered.begin(), ordered.end(), [](const GraphEdge& a, const GraphEdge& b) {
    return std::pair(static_cast<int>(a.primitive), a.dst) < std::pair(static_cast<int>(b.primitive), b.dst);
  });
  for (const auto& ge : ordered) {
    for (int from_site = 0; from_site < 3; ++from_site) {
      const auto a = site_pose(ge.src, static_cast<Site>(from_site));
      if (!a) continue;
      for (int cls = 0; cls < 2; ++cls) {
        const double switch_cost =
            static_cast<int>(detail::palm_class(ge.primitive)) == cls ? 0.0 : cfg.cost_palm_switch;
        const int to_class = static_cast<int>(detail::palm_class(ge.primitive));
        if (ge.primitive == Primitive::Pivot) {
          if (!cfg.workspace.in_pivot_region(a->x, a->y)) continue;
          const auto b = site_pose(ge.dst, Site::Region);
          edges.push_back({node(ge.src, static_cast<Site>(from_site), static_cast<PalmClass>(cls)),
                           node(ge.dst, Site::Region, static_cast<PalmClass>(to_class)), ge.cost + switch_cost});
          steps.push_back({ge.primitive, ge.src, ge.dst, *a, *b, ge.cost + switch_cost});
          continue;
        }
        for (int to_site = 0; to_site < 3; ++to_site) {
          if (to_site == from_site) continue;
          const auto b = site_pose(ge.dst, static_cast<Site>(to_site));
          if (!b || same_planar(*a, *b)) continue;
          if (!cfg.workspace.contains(a->x, a->y) || !cfg.workspace.contains(b->x, b->y)) continue;
          double cost = ge.cost;
          if (ge.primitive == Primitive::Pull) {
            cost += cfg.cost_per_meter * std::hypot(b->x - a->x, b->y - a->y);
          } else if (ge.primitive == Primitive::Push) {
            const auto choice = best_push(g.model, ge.src, *a, *b, cfg);
            if (!choice) continue;
            cost += cfg.cost_per_meter * choice->path.length();
          }
          edges.push_back({node(ge.src, static_cast<Site>(from_site), static_cast<PalmClass>(cls)),
                           node(ge.dst, static_cast<Site>(to_site), static_cast<PalmClass>(to_class)),
                           cost + switch_cost});
          steps.push_back({ge.primitive, ge.src, ge.dst, *a, *b, cost + switch_cost});
        }
      }
    }
  }
  for (int cls = 0; cls < 2; ++cls) {
    edges.push_back({node(goal.face, Site::Goal, static_cast<PalmClass>(cls)), sink, 0.0});
    steps.push_back({});
  }
  // Palms start above the object, i.e. in the top configuration.
  const auto path = dijkstra(sink + 1, edges, node(start.face, Site::Start, PalmClass::Top), sink);
  if (!path.found) throw Error(ErrorCode::Unreachable, "no primitive sequence reaches the goal placement");
  std::vector<SequenceStep> out;
  for (int ei : path.edges)
    if (edges[ei].to != sink) out.push_back(steps[ei]);
  return out;
}

// ---------------------------------------------------------------------------
// Trajectories

struct PrimitivePlan {
  Primitive primitive = Primitive::Pull;
  int face = 5;  // resting face at the start
  double start_time = 0.0;
  double duration = 0.0;
  std::vector<double> times;
  std::vector<Pose3> object, left, right;
  ContactFormation formation;
  Pose3 goal;
  int pivot_edge = -1;
  double pivot_angle = 0.0;  // final tip angle from pivot_base
  Pose3 pivot_base;          // resting pose the tip angle is measured from
  std::optional<PushChoice> push;

  std::size_t size() const { return times.size(); }

  /// Index of the last sample at or before t.
  std::size_t index_at(double t) const {
    const auto it = std::upper_bound(times.begin(), times.end(), t + 1e-12);
    return it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin() - 1);
  }

  StackedPose stacked(std::size_t k) const { return StackedPose{object.at(k), left.at(k), right.at(k)}; }
};

namespace detail {

inline std::vector<double> sample_times(double duration, double dt) {
  std::vector<double> out;
  const int n = duration <= 0.0 ? 0 : static_cast<int>(std::ceil(duration / dt - 1e-9));
  for (int k = 0; k <= n; ++k) out.push_back(std::min(k * dt, duration));
  return out;
}

inline Pose3 interpolate(const Pose3& a, const Pose3& b, double s) {
  return Pose3((1.0 - s) * a.position() + s * b.position(), a.orientation().slerp(s, b.orientation()));
}

inline void check_in_workspace(const Workspace& ws, const Pose3& p) {
  if (!ws.contains(p.position().x(), p.position().y()))
    throw Error(ErrorCode::OutOfWorkspace, "pose outside the table workspace");
}

inline void attach_all(PrimitivePlan& plan, const PlannerConfig& cfg) {
  plan.left.clear();
  plan.right.clear();
  for (const auto& obj : plan.object) {
    StackedPose q = attach_palms(plan.formation, obj, cfg.left_home);
    if (plan.formation.palm_contact_count() < 2) q.right = cfg.right_home;
    plan.left.push_back(q.left);
    plan.right.push_back(q.right);
  }
}

/// Rigidly attached palms and straight-line, shortest-arc object motion.
inline PrimitivePlan plan_rigid(Primitive prim, const Pose3& start, const Pose3& goal, ContactFormation formation,
                                const PlannerConfig& cfg, double t0, std::optional<double> duration) {
  PrimitivePlan plan;
  plan.primitive = prim;
  plan.face = resting_face(formation.model, start);
  plan.start_time = t0;
  plan.goal = goal;
  plan.formation = std::move(formation);
  const double dist = (goal.position() - start.position()).norm();
  const double ang = rotation_angle(start.orientation(), goal.orientation());
  plan.duration = duration ? *duration : std::max(dist / cfg.linear_speed, ang / cfg.angular_speed);
  if (dist < 1e-12 && ang < 1e-12) plan.duration = 0.0;
  for (double t : sample_times(plan.duration, cfg.dt())) {
    plan.times.push_back(t0 + t);
    plan.object.push_back(plan.duration > 0.0 ? interpolate(start, goal, t / plan.duration) : start);
  }
  plan.object.back() = plan.duration > 0.0 ? goal : start;
  attach_all(plan, cfg);
  return plan;
}

}  // namespace detail

inline PrimitivePlan plan_pull(const Pose3& start, const Pose3& goal, const ObjectModel& model,
                               const PlannerConfig& cfg = {}, double t0 = 0.0,
                               std::optional<double> duration = std::nullopt) {
  const int face = resting_face(model, start);
  if (resting_face(model, goal) != face) throw Error(ErrorCode::InvalidArgument, "pull keeps the resting face");
  detail::check_in_workspace(cfg.workspace, start);
  detail::check_in_workspace(cfg.workspace, goal);
  return detail::plan_rigid(Primitive::Pull, start, goal, pull_formation(model, face, cfg.formation, cfg.pull_force),
                            cfg, t0, duration);
}

/// Squeeze used by a grasp: the minimum feasible palm force plus a margin.
inline double grasp_squeeze(const ObjectModel& model, const Pose3& object, const PlannerConfig& cfg) {
  const int face = resting_face(model, object);
  const auto f = grasp_formation(model, face, cfg.formation);
  const auto fmin = minimum_palm_force(f, attach_palms(f, object, cfg.left_home));
  if (!fmin) throw Error(ErrorCode::PivotInfeasible, "no squeeze force holds the object");
  return *fmin * (1.0 + cfg.squeeze_margin);
}

inline PrimitivePlan plan_grasp(const Pose3& start, const Pose3& goal, const ObjectModel& model,
                                const PlannerConfig& cfg = {}, double t0 = 0.0,
                                std::optional<double> duration = std::nullopt) {
  const int face = resting_face(model, start);
  if (resting_face(model, goal) != face) throw Error(ErrorCode::InvalidArgument, "grasp keeps the object orientation class");
  detail::check_in_workspace(cfg.workspace, start);
  detail::check_in_workspace(cfg.workspace, goal);
  const double squeeze = grasp_squeeze(model, start, cfg);
  return detail::plan_rigid(Primitive::Grasp, start, goal, grasp_formation(model, face, cfg.formation, squeeze), cfg,
                            t0, duration);
}

namespace detail {

inline double pose_gap(const Pose3& a, const Pose3& b) {
  return std::max((a.position() - b.position()).norm(), rotation_angle(a.orientation(), b.orientation()));
}

}  // namespace detail

/// Pivot samples between two tip angles of a resting base pose.
inline PrimitivePlan plan_pivot_between(const Pose3& base, int edge, double from, double to, const ObjectModel& model,
                                        const PlannerConfig& cfg = {}, double t0 = 0.0) {
  const int face = resting_face(model, base);
  PrimitivePlan plan;
  plan.primitive = Primitive::Pivot;
  plan.face = face;
  plan.start_time = t0;
  plan.pivot_edge = edge;
  plan.pivot_angle = to;
  plan.pivot_base = base;
  plan.formation = pivot_formation(model, edge, cfg.formation);
  plan.goal = tip_about_edge(model, base, face, edge, to);
  plan.duration = std::abs(to - from) / cfg.angular_speed;
  for (double t : detail::sample_times(plan.duration, cfg.dt())) {
    const double s = plan.duration > 0.0 ? t / plan.duration : 1.0;
    plan.times.push_back(t0 + t);
    plan.object.push_back(tip_about_edge(model, base, face, edge, from + s * (to - from)));
  }
  detail::attach_all(plan, cfg);
  if (cfg.check_pivot_equilibrium) {
    for (std::size_t k = 0; k < plan.size(); ++k) {
      const auto sol = solve_equilibrium(plan.formation, plan.stacked(k));
      if (!sol.feasible)
        throw Error(ErrorCode::PivotInfeasible, "no sticking equilibrium at sample " + std::to_string(k));
    }
  }
  return plan;
}

/// Tip about `edge` (an edge of the resting face) from `start` to `goal`.
/// Every sample is checked for a sticking equilibrium.
inline PrimitivePlan plan_pivot(const Pose3& start, const Pose3& goal, int edge, const ObjectModel& model,
                                const PlannerConfig& cfg = {}, double t0 = 0.0) {
  const int face = resting_face(model, start);
  if (!is_resting(model, start, face, 1e-6)) throw Error(ErrorCode::InvalidArgument, "pivot must start from rest");
  const Edge& e = model.edges().at(edge);
  if (e.face_a != face && e.face_b != face) throw Error(ErrorCode::InvalidArgument, "pivot edge is not on the table");
  if (!cfg.workspace.in_pivot_region(start.position().x(), start.position().y()))
    throw Error(ErrorCode::OutOfWorkspace, "pivot start outside the pivot region");
  const double angle = rotation_angle(start.orientation(), goal.orientation());
  if (detail::pose_gap(tip_about_edge(model, start, face, edge, angle), goal) > 1e-6)
    throw Error(ErrorCode::InvalidArgument, "goal is not reachable by tipping about the edge");
  return plan_pivot_between(start, edge, 0.0, angle, model, cfg, t0);
}

/// Single-push plan along the shortest Dubins path over the four lateral sides.
inline PrimitivePlan plan_push(const PlanarPose& start, const PlanarPose& goal, int face, const ObjectModel& model,
                               const PlannerConfig& cfg = {}, double t0 = 0.0) {
  if (!cfg.workspace.contains(start.x, start.y) || !cfg.workspace.contains(goal.x, goal.y))
    throw Error(ErrorCode::OutOfWorkspace, "push start or goal outside the table workspace");
  const auto choice = best_push(model, face, start, goal, cfg);
  if (!choice) throw Error(ErrorCode::NoFeasibleSide, "every pushing side leaves the workspace");
  PrimitivePlan plan;
  plan.primitive = Primitive::Push;
  plan.face = face;
  plan.start_time = t0;
  plan.push = choice;
  plan.formation = push_formation(model, face, choice->side, cfg.formation);
  plan.goal = pose_from_placement(model, Placement{face, goal});
  const double length = same_planar(start, goal) ? 0.0 : choice->path.length();
  plan.duration = length / cfg.linear_speed;
  for (double t : detail::sample_times(plan.duration, cfg.dt())) {
    const PlanarPose car = choice->path.sample(cfg.linear_speed * t);
    plan.times.push_back(t0 + t);
    plan.object.push_back(
        pose_from_placement(model, Placement{face, {car.x, car.y, wrap_angle(car.yaw - choice->heading_offset)}}));
  }
  plan.object.back() = length > 0.0 ? plan.goal : pose_from_placement(model, Placement{face, start});
  detail::attach_all(plan, cfg);
  return plan;
}

inline PrimitivePlan plan_push(const Pose3& start, const Pose3& goal, const ObjectModel& model,
                               const PlannerConfig& cfg = {}, double t0 = 0.0) {
  const Placement a = placement_from_pose(model, start), b = placement_from_pose(model, goal);
  if (a.face != b.face) throw Error(ErrorCode::InvalidArgument, "push keeps the resting face");
  return plan_push(a.pose, b.pose, a.face, model, cfg, t0);
}

// ---------------------------------------------------------------------------
// Replanning

/// Re-plans the rest of `plan` from a new object pose toward the original goal.
/// Throws on a pose that left the plan's placement; callers keep the old plan.
inline PrimitivePlan replan(const PrimitivePlan& plan, const Pose3& new_pose, double t_now,
                            const PlannerConfig& cfg = {}) {
  const ObjectModel& model = plan.formation.model;
  const int face = resting_face(model, new_pose);
  switch (plan.primitive) {
    case Primitive::Pull:
    case Primitive::Push: {
      if (face != plan.face || !is_resting(model, new_pose, face, 1e-3))
        throw Error(ErrorCode::InvalidArgument, "object left the placement face");
      // Estimates carry a small placement residual; plan from the exact rest pose.
      const Pose3 rest = pose_from_placement(model, placement_from_pose(model, new_pose));
      if (plan.primitive == Primitive::Pull) {
        detail::check_in_workspace(cfg.workspace, rest);
        auto p = detail::plan_rigid(Primitive::Pull, rest, plan.goal, plan.formation, cfg, t_now, std::nullopt);
        p.face = plan.face;
        return p;
      }
      return plan_push(placement_from_pose(model, rest).pose, placement_from_pose(model, plan.goal).pose,
                       plan.face, model, cfg, t_now);
    }
    case Primitive::Grasp: {
      if (face != plan.face) throw Error(ErrorCode::InvalidArgument, "object left the grasp orientation");
      auto p = detail::plan_rigid(Primitive::Grasp, new_pose, plan.goal, plan.formation, cfg, t_now, std::nullopt);
      p.face = plan.face;
      return p;
    }
    case Primitive::Pivot: {
      const Pose3& base = plan.pivot_base;
      const double angle = rotation_angle(base.orientation(), new_pose.orientation());
      if (detail::pose_gap(tip_about_edge(model, base, plan.face, plan.pivot_edge, angle), new_pose) > 1e-3)
        throw Error(ErrorCode::InvalidArgument, "object left the pivot motion");
      // The remaining angles were already checked when the plan was made.
      PlannerConfig fast = cfg;
      fast.check_pivot_equilibrium = false;
      auto p = plan_pivot_between(base, plan.pivot_edge, angle, plan.pivot_angle, model, fast, t_now);
      return p;
    }
  }
  return plan;
}

struct ReplanOutcome {
  PrimitivePlan plan;
  bool replanned = false;
  std::string error;
};

inline ReplanOutcome try_replan(const PrimitivePlan& plan, const Pose3& new_pose, double t_now,
                                const PlannerConfig& cfg = {}) {
  try {
    return {replan(plan, new_pose, t_now, cfg), true, {}};
  } catch (const Error& e) {
    return {plan, false, e.what()};
  }
}

// ---------------------------------------------------------------------------
// Whole task

struct TaskPlan {
  Placement start, goal;
  std::vector<SequenceStep> steps;
  std::vector<PrimitivePlan> plans;
};

/// Searches the primitive sequence between two object poses and builds the
/// trajectory of every primitive. The start pose is snapped to its nearest
/// stable placement.
inline TaskPlan plan_task(const Pose3& start, const Pose3& goal, const ObjectModel& model,
                          const PlannerConfig& cfg = {}) {
  TaskPlan task;
  task.start = placement_from_pose(model, start);
  task.goal = placement_from_pose(model, goal);
  const ManipulationGraph g = build_graph(model, cfg);
  task.steps = search_sequence(g, task.start, task.goal);
  Pose3 current = pose_from_placement(model, task.start);
  double t = 0.0;
  for (const auto& step : task.steps) {
    PrimitivePlan p;
    const Pose3 target = pose_from_placement(model, Placement{step.dst, step.to});
    switch (step.primitive) {
      case Primitive::Pull: p = plan_pull(current, target, model, cfg, t); break;
      case Primitive::Grasp: p = plan_grasp(current, target, model, cfg, t); break;
      case Primitive::Push:
        p = plan_push(placement_from_pose(model, current).pose, step.to, step.src, model, cfg, t);
        break;
      case Primitive::Pivot: {
        const int edge = model.shared_edge(step.src, step.dst);
        p = plan_pivot(current, tip_about_edge(model, current, step.src, edge, kPi / 2), edge, model, cfg, t);
        break;
      }
    }
    current = p.object.back();
    t = p.times.back();
    task.plans.push_back(std::move(p));
  }
  return task;
}

}  // namespace palmplan
