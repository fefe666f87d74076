#pragma once

// Deterministic quasi-static world and the closed-loop orchestrator that runs
// estimation, replanning and contact control against it.

#include "palmplan/contact_controller.hpp"
#include "palmplan/planner.hpp"
#include "palmplan/pose_estimator.hpp"
#include "palmplan/scene_config.hpp"

#include <array>
#include <cstdio>
#include <ostream>
#include <random>

namespace palmplan {

enum class StepMode { AllStick, Slip };

inline const char* to_string(StepMode m) { return m == StepMode::AllStick ? "all-stick" : "slip"; }

struct WorldState {
  Pose3 object;
  Pose3 left, right;
  ContactFormation formation;
  std::vector<Wrench> wrenches;  // per formation contact, contact frames
  double time = 0.0;
  // Palm pose in the object frame while the palm touches the object.
  std::array<std::optional<Pose3>, 2> grip;
  // Last palm command; the next command moves each touching palm by the
  // body-frame increment between the two.
  std::array<Pose3, 2> command;
  StepMode mode = StepMode::AllStick;
  bool solved = false;  // wrenches hold a sticking equilibrium of the current loads

  StackedPose stacked() const { return StackedPose{object, left, right}; }
  Pose3& palm(int i) { return i == 0 ? left : right; }
  const Pose3& palm(int i) const { return i == 0 ? left : right; }
};

inline int palm_index(ContactRole r) { return r == ContactRole::PalmRight ? 1 : 0; }

/// Places the palms of `formation` at their nominal grips on `object`;
/// palms outside the formation go to the given poses.
inline WorldState make_world(const ContactFormation& formation, const Pose3& object, const Pose3& left,
                             const Pose3& right, double time = 0.0) {
  WorldState s;
  s.object = object;
  s.left = left;
  s.right = right;
  s.formation = formation;
  s.time = time;
  for (const auto& c : formation.contacts)
    if (is_palm(c.role)) s.grip[palm_index(c.role)] = object.inverse() * s.palm(palm_index(c.role));
  s.command = {left, right};
  s.wrenches.assign(formation.contacts.size(), Wrench());
  return s;
}

namespace detail {

inline bool same_pose(const Pose3& a, const Pose3& b) {
  return a.position() == b.position() && a.orientation().coeffs() == b.orientation().coeffs();
}

inline bool same_loads(const ContactFormation& a, const ContactFormation& b) {
  if (a.disturbance.vector() != b.disturbance.vector() || a.contacts.size() != b.contacts.size()) return false;
  for (std::size_t i = 0; i < a.contacts.size(); ++i)
    if (a.contacts[i].normal_force != b.contacts[i].normal_force) return false;
  return true;
}

/// Contact closure residual of the object pose with the palms held fixed:
/// normal gaps for every contact, tilt for flat contacts, both end heights
/// for a table edge. Zero when every contact is closed.
inline VecX closure_residual(const ContactFormation& f, const StackedPose& q) {
  const ObjectModel& m = f.model;
  std::vector<double> r;
  for (const auto& fc : f.contacts) {
    if (is_palm(fc.role)) {
      const Pose3& palm = q.palm(fc.role);
      const Vec3 n = palm.rotate(Vec3::UnitZ());
      if (fc.kind == ContactKind::Patch) {
        const Face& face = m.faces().at(fc.face);
        const Vec3 fn = q.object.rotate(face.normal);
        r.push_back((palm.position() - q.object.transform_point(face.center)).dot(fn));
        r.push_back(fn.dot(palm.rotate(Vec3::UnitX())));
        r.push_back(fn.dot(palm.rotate(Vec3::UnitY())));
      } else {
        r.push_back((q.object.transform_point(m.corners().at(fc.corner)) - palm.position()).dot(n));
      }
    } else if (fc.kind == ContactKind::Patch) {
      const Face& face = m.faces().at(fc.face);
      const Vec3 fn = q.object.rotate(face.normal);
      r.push_back(q.object.transform_point(face.center).z());
      r.push_back(fn.x());
      r.push_back(fn.y());
    } else {
      const Edge& e = m.edges().at(fc.edge);
      r.push_back(q.object.transform_point(m.corners().at(e.corner_a)).z());
      r.push_back(q.object.transform_point(m.corners().at(e.corner_b)).z());
    }
  }
  return Eigen::Map<VecX>(r.data(), static_cast<Eigen::Index>(r.size()));
}

/// Jacobian of the closure residual with respect to an object twist
/// (center-of-mass velocity, world angular velocity), by central differences.
inline MatX closure_jacobian(const ContactFormation& f, const StackedPose& q) {
  const double h = 1e-7;
  const VecX r0 = closure_residual(f, q);
  MatX a(r0.size(), 6);
  for (int k = 0; k < 6; ++k) {
    Vec6 d = Vec6::Zero();
    d(k) = h;
    StackedPose plus = q, minus = q;
    plus.object = q.object.perturbed(d.head<3>(), d.tail<3>());
    minus.object = q.object.perturbed(-d.head<3>(), -d.tail<3>());
    a.col(k) = (closure_residual(f, plus) - closure_residual(f, minus)) / (2.0 * h);
  }
  return a;
}

/// Rows spanning the object twists a slip may not have: those opening or
/// misaligning a contact, and rolling about a corner held by a point palm
/// (which would tip neighbouring corners through the palm).
inline MatX contact_preserving_rows(const ContactFormation& f, const StackedPose& q) {
  const MatX jac = closure_jacobian(f, q);
  std::vector<Vec6> extra;
  for (const auto& fc : f.contacts) {
    if (!is_palm(fc.role) || fc.kind != ContactKind::Point) continue;
    for (int k = 0; k < 2; ++k) {
      Vec6 row = Vec6::Zero();
      row.tail<3>() = q.palm(fc.role).rotate(Vec3::Unit(k));
      extra.push_back(row);
    }
  }
  MatX a(jac.rows() + static_cast<Eigen::Index>(extra.size()), 6);
  a.topRows(jac.rows()) = jac;
  for (std::size_t i = 0; i < extra.size(); ++i) a.row(jac.rows() + static_cast<Eigen::Index>(i)) = extra[i].transpose();
  return a;
}

/// Gauss-Newton pull-back of the object onto its closed contacts after a
/// first-order slip update.
inline Pose3 restore_contacts(const ContactFormation& f, StackedPose q) {
  for (int it = 0; it < 5; ++it) {
    const VecX r = closure_residual(f, q);
    if (r.size() == 0 || r.lpNorm<Eigen::Infinity>() < 1e-12) break;
    const Eigen::CompleteOrthogonalDecomposition<MatX> cod(closure_jacobian(f, q));
    const Vec6 d = -cod.solve(r);
    q.object = q.object.perturbed(d.head<3>(), d.tail<3>());
  }
  return q.object;
}

/// Lowest object corner height above the table plane.
inline double lowest_corner(const ObjectModel& m, const Pose3& object) {
  double z = std::numeric_limits<double>::infinity();
  for (const auto& c : m.corners()) z = std::min(z, object.transform_point(c).z());
  return z;
}

/// Wrench on the object that no set of in-cone contact wrenches can cancel:
/// the minimum-norm slack s with sum G^T w + w_ext + s = 0.
struct SlackBalance {
  std::vector<Wrench> wrenches;
  Vec6 slack = Vec6::Zero();
};

inline std::optional<SlackBalance> slack_balance(const ContactFormation& f, const StackedPose& q) {
  const WrenchLayout layout(f);
  const Eigen::Index s0 = layout.total;
  qp::QpProblem p(layout.total + 6);
  p.lower = VecX::Constant(p.num_vars(), -std::numeric_limits<double>::infinity());
  layout.add_contact_constraints(p, f);
  const Eigen::Index first = p.A.rows();
  add_balance_rows(p, f, q, layout);
  for (int r = 0; r < 6; ++r) p.A(first + r, s0 + r) = 1.0;
  p.Q.diagonal().array() += 1e-9;
  p.Q.bottomRightCorner(6, 6).diagonal().setConstant(1.0);
  const auto sol = qp::solve(p);
  if (sol.status != qp::Status::Optimal) return std::nullopt;
  SlackBalance out;
  out.wrenches = layout.wrenches(sol.x);
  out.slack = sol.x.segment<6>(s0);
  return out;
}

}  // namespace detail

struct StepSettings {
  double linear_damping = 100.0;
  double angular_damping = 2.0;
};

/// One quasi-static tick. Touching palms move by the commanded body-frame
/// increment and carry the object through their grips. When no sticking
/// equilibrium exists the object slips with a viscous velocity along the
/// unbalanced wrench, restricted to motions that keep every contact closed.
inline WorldState step(const WorldState& s, const std::pair<Pose3, Pose3>& palm_command,
                       const std::optional<Wrench>& perturbation, double dt, const StepSettings& cfg = {}) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "time step must be positive");
  WorldState n = s;
  n.time = s.time + dt;
  const std::array<Pose3, 2> cmd = {palm_command.first, palm_command.second};
  int driver = -1;
  for (int i = 0; i < 2; ++i) {
    if (s.grip[i]) {
      if (!detail::same_pose(s.command[i], cmd[i])) n.palm(i) = s.palm(i) * (s.command[i].inverse() * cmd[i]);
      if (driver < 0) driver = i;
    } else {
      n.palm(i) = cmd[i];
    }
  }
  n.command = cmd;
  if (driver >= 0 && !detail::same_pose(s.command[driver], cmd[driver]))
    n.object = n.palm(driver) * s.grip[driver]->inverse();
  // A second touching palm keeps its grip.
  for (int i = 0; i < 2; ++i)
    if (s.grip[i] && i != driver) n.palm(i) = n.object * *s.grip[i];
  // A grip that drifted during an earlier slip can carry the object off its
  // environment contacts; settle it back and let the grips absorb the change.
  if (driver >= 0 && detail::closure_residual(n.formation, n.stacked()).lpNorm<Eigen::Infinity>() > 1e-10) {
    n.object = detail::restore_contacts(n.formation, n.stacked());
    for (int i = 0; i < 2; ++i)
      if (s.grip[i]) n.grip[i] = n.object.inverse() * n.palm(i);
  }

  n.formation.disturbance = perturbation ? *perturbation : Wrench();
  // Nothing moved and the loads are unchanged: the sticking solution still holds.
  if (s.solved && s.mode == StepMode::AllStick && driver >= 0 && detail::same_pose(s.command[0], cmd[0]) &&
      detail::same_pose(s.command[1], cmd[1]) && detail::same_loads(s.formation, n.formation))
    return n;
  n.solved = false;
  StackedPose q = n.stacked();
  EquilibriumSolution eq;
  try {
    eq = solve_equilibrium(n.formation, q);
  } catch (const Error& e) {
    throw Error(ErrorCode::NoConsistentMode, std::string("contact geometry broke: ") + e.what());
  }
  if (eq.feasible) {
    n.mode = StepMode::AllStick;
    n.wrenches = eq.wrenches;
    n.solved = true;
    return n;
  }

  const auto slack = detail::slack_balance(n.formation, q);
  if (!slack) throw Error(ErrorCode::NoConsistentMode, "no contact mode balances the object");
  Vec6 twist;
  twist << -slack->slack.head<3>() / cfg.linear_damping, -slack->slack.tail<3>() / cfg.angular_damping;
  const MatX a = detail::contact_preserving_rows(n.formation, q);
  if (a.rows() > 0) {
    // Orthogonal projection onto the null space of the closure rows.
    const Eigen::CompleteOrthogonalDecomposition<MatX> cod(a);
    twist -= cod.pseudoInverse() * (a * twist);
  }
  n.wrenches = slack->wrenches;
  // Imbalance along closed contact directions (for example opposing palms
  // with slightly different force setpoints) moves nothing.
  if (dt * twist.norm() < 1e-9) {
    n.mode = StepMode::AllStick;
    n.solved = true;
    return n;
  }
  n.object = n.object.perturbed(dt * twist.head<3>(), dt * twist.tail<3>());
  n.object = detail::restore_contacts(n.formation, n.stacked());
  if (detail::lowest_corner(n.formation.model, n.object) < -kGapTol)
    throw Error(ErrorCode::NoConsistentMode, "object pushed into the table; no contact mode covers this load");
  for (int i = 0; i < 2; ++i)
    if (s.grip[i]) n.grip[i] = n.object.inverse() * n.palm(i);
  n.mode = StepMode::Slip;
  return n;
}

/// Binary slip per formation contact from the relative tangential travel of
/// each palm contact point over the tick. Environment contacts carry no
/// sensor and always read 0.
inline SlipSignal synth_slip(const WorldState& prev, const WorldState& next, double threshold = 1e-6) {
  SlipSignal out;
  out.time = next.time;
  for (const auto& fc : next.formation.contacts) {
    int bit = 0;
    if (is_palm(fc.role)) {
      const int i = palm_index(fc.role);
      const Contact c = world_contact(next.formation, fc, next.stacked());
      // Contact point in the object frame before and after.
      const Vec3 before = prev.object.inverse().transform_point(prev.palm(i).position());
      const Vec3 after = next.object.inverse().transform_point(next.palm(i).position());
      Vec3 d = next.object.rotate(after - before);
      const Vec3 normal = c.frame.rotate(Vec3::UnitX());
      d -= d.dot(normal) * normal;
      bit = d.norm() > threshold ? 1 : 0;
    }
    out.bits.push_back(bit);
  }
  return out;
}

struct FeatureNoise {
  double pos = 0.0;  // m
  double ang = 0.0;  // rad
};

namespace detail {

inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace detail

/// Corner points and edge lines of the touched geometry inside each palm's
/// sensing disc, in palm frames. Noise is drawn from `rng` in a fixed order.
template <class Rng>
std::vector<TactileFeature> synth_features(const WorldState& s, const ObjectModel& m, double footprint_radius,
                                           const FeatureNoise& noise, Rng& rng) {
  std::vector<TactileFeature> out;
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto jitter = [&](TactileFeature f) {
    if (noise.pos > 0.0) f.point += noise.pos * Vec3(gauss(rng), gauss(rng), gauss(rng));
    if (f.kind == FeatureKind::Line && noise.ang > 0.0) {
      const Vec3 w = noise.ang * Vec3(gauss(rng), gauss(rng), gauss(rng));
      f.direction = (exp_so3(w) * f.direction).normalized();
    }
    return f;
  };
  for (const auto& fc : s.formation.contacts) {
    if (!is_palm(fc.role)) continue;
    const int i = palm_index(fc.role);
    const Pose3& palm = s.palm(i);
    const PalmSide side = i == 0 ? PalmSide::Left : PalmSide::Right;
    if (fc.kind == ContactKind::Point) {
      out.push_back(jitter(corner_feature(m, s.object, palm, side, fc.corner)));
      continue;
    }
    const Vec3 center = palm.position();
    for (int c : m.face_corners(fc.face))
      if ((s.object.transform_point(m.corners()[c]) - center).norm() <= footprint_radius)
        out.push_back(jitter(corner_feature(m, s.object, palm, side, c)));
    for (int e : m.face_edges(fc.face)) {
      const Edge& edge = m.edges()[e];
      const double d = detail::point_segment_distance(center, s.object.transform_point(m.corners()[edge.corner_a]),
                                                      s.object.transform_point(m.corners()[edge.corner_b]));
      if (d <= footprint_radius) out.push_back(jitter(edge_feature(m, s.object, palm, side, e)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closed loop

struct TickRecord {
  double time = 0.0;
  Pose3 nominal, truth, estimate;
  std::array<int, 2> slip{0, 0};        // per palm
  std::array<double, 2> alpha{0.0, 0.0};  // per palm, surrogate margin of the applied wrench
  Pose3 command_left, command_right;
  double err_pos = 0.0;
  double err_ang = 0.0;
  StepMode mode = StepMode::AllStick;
  int plan_index = 0;
  bool replanned = false;
};

struct RunResult {
  std::vector<PrimitivePlan> plans;  // nominal plans, before any replanning
  std::vector<TickRecord> ticks;
  int replans = 0;
  int replan_failures = 0;
  int controller_runs = 0;
};

namespace detail {

inline Pose3 rest_snap(const ObjectModel& m, const Pose3& p) { return pose_from_placement(m, placement_from_pose(m, p)); }

inline std::optional<Wrench> active_perturbation(const std::vector<Perturbation>& ps, double t) {
  std::optional<Wrench> out;
  for (const auto& p : ps) {
    if (!p.active(t)) continue;
    out = Wrench(Vec6((out ? out->vector() : Vec6::Zero()) + p.wrench.vector()));
  }
  return out;
}

/// Index of the plan running at time t: the last one that has started.
inline std::size_t plan_at(const std::vector<PrimitivePlan>& plans, double t) {
  std::size_t k = 0;
  while (k + 1 < plans.size() && t > plans[k + 1].start_time + 1e-9) ++k;
  return k;
}

/// Chordal mean of poses: averaged positions and sign-aligned quaternions.
inline Pose3 mean_pose(const std::vector<Pose3>& poses) {
  Vec3 p = Vec3::Zero();
  Eigen::Vector4d q = Eigen::Vector4d::Zero();
  const Eigen::Vector4d ref = poses.front().orientation().coeffs();
  for (const auto& x : poses) {
    p += x.position();
    const Eigen::Vector4d c = x.orientation().coeffs();
    q += c.dot(ref) < 0.0 ? Eigen::Vector4d(-c) : c;
  }
  return Pose3(p / static_cast<double>(poses.size()), Eigen::Quaterniond(q.normalized()));
}

inline double palm_alpha(const WorldState& s, int palm) {
  for (std::size_t i = 0; i < s.formation.contacts.size(); ++i) {
    const auto& fc = s.formation.contacts[i];
    if (!is_palm(fc.role) || palm_index(fc.role) != palm || i >= s.wrenches.size()) continue;
    const Wrench& w = s.wrenches[i];
    return std::max(0.0, w.normal() - w.tangential().norm() / fc.mu);
  }
  return 0.0;
}

/// Moves the world onto a new plan's formation. Touching palms are placed at
/// the plan's grips on the true object and the command stream restarts at
/// the plan's current sample.
inline void adopt_plan(WorldState& w, const PrimitivePlan& p, std::size_t k) {
  w.formation = p.formation;
  w.grip = {std::nullopt, std::nullopt};
  for (const auto& c : p.formation.contacts)
    if (is_palm(c.role)) {
      const int i = palm_index(c.role);
      w.grip[i] = p.object[k].inverse() * (i == 0 ? p.left[k] : p.right[k]);
    }
  w.command = {p.left[k], p.right[k]};
  for (int i = 0; i < 2; ++i) w.palm(i) = w.grip[i] ? w.object * *w.grip[i] : w.command[i];
  w.wrenches.assign(p.formation.contacts.size(), Wrench());
  w.solved = false;
}

}  // namespace detail

/// Nominal plans for a scene. Resting start and goal poses are snapped to
/// their nearest stable placement.
inline std::vector<PrimitivePlan> build_plans(const SceneConfig& sc) {
  const ObjectModel& m = sc.model;
  const PlannerConfig& cfg = sc.planner;
  auto need = [&](Primitive p) {
    if (!cfg.enabled.count(p)) throw Error(ErrorCode::Unreachable, std::string(to_string(p)) + " is disabled");
  };
  std::vector<PrimitivePlan> plans;
  switch (sc.mode) {
    case TaskMode::Sequence: plans = plan_task(sc.start, sc.goal, m, cfg).plans; break;
    case TaskMode::Pull:
      need(Primitive::Pull);
      plans.push_back(plan_pull(detail::rest_snap(m, sc.start), detail::rest_snap(m, sc.goal), m, cfg));
      break;
    case TaskMode::Push:
      need(Primitive::Push);
      plans.push_back(plan_push(detail::rest_snap(m, sc.start), detail::rest_snap(m, sc.goal), m, cfg));
      break;
    case TaskMode::Grasp:
      need(Primitive::Grasp);
      plans.push_back(plan_grasp(sc.start, sc.goal, m, cfg));
      break;
    case TaskMode::Pivot: {
      need(Primitive::Pivot);
      const Pose3 a = detail::rest_snap(m, sc.start);
      const int f = resting_face(m, a), g = resting_face(m, sc.goal);
      if (!ObjectModel::adjacent(f, g)) throw Error(ErrorCode::Unreachable, "pivot goal is not an adjacent face");
      const int edge = m.shared_edge(f, g);
      plans.push_back(plan_pivot(a, tip_about_edge(m, a, f, edge, kPi / 2), edge, m, cfg));
      break;
    }
  }
  if (plans.empty()) plans.push_back(plan_pull(detail::rest_snap(m, sc.start), detail::rest_snap(m, sc.start), m, cfg));
  return plans;
}

/// Runs the scene tick by tick: world step, slip and tactile synthesis, pose
/// estimate, replan on deviation, contact control on slip. With `open_loop`
/// the estimator, replanner and controller are off and palms follow the
/// nominal plans.
inline RunResult run_closed_loop(const SceneConfig& sc, bool open_loop = false) {
  RunResult out;
  out.plans = build_plans(sc);
  const auto& plans = out.plans;
  const double dt = sc.planner.dt();
  const double end = sc.duration ? *sc.duration : plans.back().times.back() + sc.sim.settle_time;
  const long ticks = std::lround(end / dt);
  const StepSettings step_cfg{sc.sim.linear_damping, sc.sim.angular_damping};
  const PoseEstimator estimator(sc.model, EstimatorSettings{1.0, 0.1, 1e6, 1e10, 50, 1e-10, 5e-2});
  const FeatureNoise noise{sc.sim.noise_pos, sc.sim.noise_ang};
  std::mt19937_64 rng(sc.seed);

  std::size_t plan_index = 0;
  PrimitivePlan active = plans[0];
  WorldState world = make_world(active.formation, active.object[0], active.left[0], active.right[0]);
  Pose3 estimate = active.object[0];
  std::vector<Pose3> deviating;
  int failures = 0;

  auto record = [&](const WorldState& w, double t, const std::array<int, 2>& slip, bool replanned) {
    TickRecord r;
    r.time = t;
    const std::size_t pi = detail::plan_at(plans, t);
    r.nominal = plans[pi].object[plans[pi].index_at(t)];
    r.truth = w.object;
    r.estimate = open_loop ? r.nominal : estimate;
    r.slip = slip;
    for (int i = 0; i < 2; ++i) r.alpha[i] = detail::palm_alpha(w, i);
    r.command_left = w.command[0];
    r.command_right = w.command[1];
    r.err_pos = (r.truth.position() - r.nominal.position()).norm();
    r.err_ang = rotation_angle(r.truth.orientation(), r.nominal.orientation());
    r.mode = w.mode;
    r.plan_index = static_cast<int>(plan_index);
    r.replanned = replanned;
    out.ticks.push_back(r);
  };
  record(world, 0.0, {0, 0}, false);

  std::size_t last_j = 0;
  for (long k = 1; k <= ticks; ++k) {
    const double t = k * dt;
    const std::size_t next_index = detail::plan_at(plans, t);
    // A plan hands over only after its final sample has been commanded.
    const bool finished = last_j + 1 >= active.times.size();
    if (next_index != plan_index && finished) {
      plan_index = next_index;
      active = plans[plan_index];
      // Register at the sample the world currently sits on.
      detail::adopt_plan(world, active, active.index_at(t - dt));
      deviating.clear();
    }
    const std::size_t j = next_index != plan_index ? active.times.size() - 1 : active.index_at(t);
    last_j = j;
    const auto perturbation = detail::active_perturbation(sc.perturbations, t - dt);
    WorldState next = step(world, {active.left[j], active.right[j]}, perturbation, dt, step_cfg);
    const SlipSignal slip = synth_slip(world, next, sc.sim.slip_threshold);
    std::array<int, 2> palm_slip{0, 0};
    for (std::size_t i = 0; i < slip.bits.size(); ++i)
      if (slip.bits[i] && is_palm(next.formation.contacts[i].role))
        palm_slip[palm_index(next.formation.contacts[i].role)] = 1;

    bool replanned = false;
    if (!open_loop) {
      const auto features = synth_features(next, sc.model, sc.sim.footprint_radius, noise, rng);
      try {
        estimate = estimator.estimate(estimate, features, {next.left, next.right}, active.primitive).pose;
      } catch (const Error&) {
        // Keep the previous estimate.
      }
      // Replan once the deviation persists for a whole window of ticks.
      if (d_ts(estimate, active.object[active.index_at(t)]) > sc.sim.replan_threshold) {
        deviating.push_back(estimate);
      } else {
        deviating.clear();
      }
      if (static_cast<int>(deviating.size()) >= sc.sim.replan_window) {
        const ReplanOutcome r = try_replan(active, detail::mean_pose(deviating), t, sc.planner);
        deviating.clear();
        if (r.replanned) {
          active = r.plan;
          next.command = {active.left[0], active.right[0]};
          next.solved = false;
          ++out.replans;
          replanned = true;
        } else {
          ++out.replan_failures;
        }
      }
      if (palm_slip[0] || palm_slip[1]) {
        ++out.controller_runs;
        bool applied = false;
        // The disturbance is not measured: control against the nominal loads,
        // linearized at the current force setpoints when they balance them.
        ContactFormation nominal = next.formation;
        nominal.disturbance = Wrench();
        const StackedPose q = next.stacked();
        auto lin = solve_equilibrium(nominal, q);
        if (!lin.feasible) {
          ContactFormation free = nominal;
          for (auto& c : free.contacts) c.normal_force.reset();
          lin = solve_equilibrium(free, q);
        }
        if (lin.feasible) {
          try {
            const ControlAdjustment adj = control_step(nominal, q, lin.wrenches, slip, sc.controller);
            if (adj.applied) {
              applied = true;
              for (std::size_t i = 0; i < next.formation.contacts.size(); ++i)
                if (is_palm(next.formation.contacts[i].role))
                  next.formation.contacts[i].normal_force = adj.wrenches[i].normal();
              next.solved = false;
            }
          } catch (const Error&) {
            // Linearization rejected the point; counts as a failed tick.
          }
        }
        failures = applied ? 0 : failures + 1;
        if (failures > sc.sim.max_failures)
          throw Error(ErrorCode::NoConsistentMode,
                      "contact controller failed for " + std::to_string(failures) + " consecutive ticks at t=" +
                          std::to_string(t));
      } else {
        failures = 0;
      }
    }
    world = std::move(next);
    record(world, t, palm_slip, replanned);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Logs

namespace detail {

inline void put_pose(std::string& line, const Pose3& p) {
  const auto& q = p.orientation();
  char buf[256];
  std::snprintf(buf, sizeof buf, ",%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", p.position().x(), p.position().y(),
                p.position().z(), q.w(), q.x(), q.y(), q.z());
  line += buf;
}

}  // namespace detail

inline std::string csv_header() {
  std::string h = "time_s";
  for (const char* prefix : {"nom_", "true_", "est_"})
    for (const char* c : {"x", "y", "z", "qw", "qx", "qy", "qz"}) h += std::string(",") + prefix + c;
  h += ",slip_0,slip_1,alpha_0,alpha_1,err_pos_m,err_ang_rad";
  return h;
}

inline void write_csv(std::ostream& os, const std::vector<TickRecord>& ticks) {
  os << csv_header() << '\n';
  for (const auto& r : ticks) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.6f", r.time);
    std::string line = buf;
    detail::put_pose(line, r.nominal);
    detail::put_pose(line, r.truth);
    detail::put_pose(line, r.estimate);
    std::snprintf(buf, sizeof buf, ",%d,%d,%.10g,%.10g,%.10g,%.10g", r.slip[0], r.slip[1], r.alpha[0], r.alpha[1],
                  r.err_pos, r.err_ang);
    os << line << buf << '\n';
  }
}

/// Text plan log: a header, one line per primitive, then every sample.
inline void write_plan_log(std::ostream& os, const std::vector<PrimitivePlan>& plans, const TaskPlan* task = nullptr) {
  auto pose = [](const Pose3& p) {
    std::string s;
    detail::put_pose(s, p);
    for (auto& ch : s)
      if (ch == ',') ch = ' ';
    return s;
  };
  os << "# palmplan plan log\n";
  os << "# pose: x y z qw qx qy qz\n";
  if (task) {
    os << "start_placement " << task->start.face << ' ' << task->start.pose.x << ' ' << task->start.pose.y << ' '
       << task->start.pose.yaw << '\n';
    os << "goal_placement " << task->goal.face << ' ' << task->goal.pose.x << ' ' << task->goal.pose.y << ' '
       << task->goal.pose.yaw << '\n';
  }
  os << "primitives " << plans.size() << '\n';
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto& p = plans[i];
    os << "primitive " << i << ' ' << to_string(p.primitive) << " face " << p.face << " start " << p.start_time
       << " duration " << p.duration << " samples " << p.size();
    if (task && i < task->steps.size()) os << " cost " << task->steps[i].cost << " to_face " << task->steps[i].dst;
    if (p.primitive == Primitive::Pivot) os << " edge " << p.pivot_edge << " angle " << p.pivot_angle;
    if (p.push) os << " side " << p.push->side << " word " << to_string(p.push->path.word) << " length " << p.push->path.length();
    os << '\n';
  }
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto& p = plans[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "sample %zu %.6f", i, p.times[k]);
      os << buf << " object" << pose(p.object[k]) << " left" << pose(p.left[k]) << " right" << pose(p.right[k])
         << '\n';
    }
  }
}

}  // namespace palmplan
