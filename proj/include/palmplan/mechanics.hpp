#pragma once

// Quasi-static mechanics of the four palm contact formations: contact frames,
// force balance, friction feasibility and stability margins.

#include "palmplan/core_types.hpp"
#include "palmplan/object_model.hpp"
#include "palmplan/qp.hpp"

#include <optional>
#include <string>
#include <vector>

namespace palmplan {

/// Enumeration order doubles as the planner tie-break order.
enum class Primitive { Grasp, Push, Pivot, Pull };

inline const char* to_string(Primitive p) {
  switch (p) {
    case Primitive::Grasp: return "grasp";
    case Primitive::Push: return "push";
    case Primitive::Pivot: return "pivot";
    case Primitive::Pull: return "pull";
  }
  return "?";
}

inline Primitive primitive_from_string(const std::string& s) {
  if (s == "grasp") return Primitive::Grasp;
  if (s == "push") return Primitive::Push;
  if (s == "pivot") return Primitive::Pivot;
  if (s == "pull") return Primitive::Pull;
  throw Error(ErrorCode::ConfigError, "unknown primitive '" + s + "'");
}

enum class ContactRole { PalmLeft, PalmRight, Environment };

inline bool is_palm(ContactRole r) { return r != ContactRole::Environment; }

/// One contact of a formation, described by the geometry it binds to. World
/// frames are derived from the stacked configuration.
struct FormationContact {
  ContactRole role = ContactRole::Environment;
  ContactKind kind = ContactKind::Point;
  double mu = 0.5;
  std::optional<PatchModel> patch;
  int face = -1;    // palm or table patch: the object face touched
  int corner = -1;  // palm point contact: the object corner touched
  int edge = -1;    // table point contact: the object edge resting on the table
  std::optional<double> normal_force;  // commanded normal force (palms)
};

/// Object pose followed by the left and right palm poses.
struct StackedPose {
  Pose3 object;
  Pose3 left;
  Pose3 right;

  const Pose3& palm(ContactRole r) const { return r == ContactRole::PalmRight ? right : left; }
  Pose3& palm(ContactRole r) { return r == ContactRole::PalmRight ? right : left; }
};

struct ContactFormation {
  Primitive primitive = Primitive::Pull;
  std::vector<FormationContact> contacts;
  ObjectModel model;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  Wrench disturbance;  // extra wrench at the center of mass, world frame
  double max_normal_force = 25.0;
  int cone_facets = 8;

  /// External wrench about the center of mass: gravity plus disturbance. The
  /// contact wrenches balance it: sum_i G_i^T w_i + w_ext = 0.
  Wrench external_wrench() const {
    return Wrench(model.mass() * gravity + disturbance.force(), disturbance.torque());
  }

  std::size_t palm_contact_count() const {
    std::size_t n = 0;
    for (const auto& c : contacts) n += is_palm(c.role) ? 1 : 0;
    return n;
  }

  void validate() const {
    if (contacts.empty()) throw Error(ErrorCode::InvalidArgument, "formation needs at least one contact");
    std::size_t palms = 0, env = 0;
    for (const auto& c : contacts) {
      (is_palm(c.role) ? palms : env)++;
      if (c.kind == ContactKind::Patch && (!c.patch || c.face < 0))
        throw Error(ErrorCode::InvalidArgument, "patch contact needs a patch model and a face");
      if (c.kind == ContactKind::Point && c.corner < 0 && c.edge < 0)
        throw Error(ErrorCode::InvalidArgument, "point contact needs a corner or edge");
    }
    const auto need = [&](std::size_t p, std::size_t e) {
      if (palms != p || env != e)
        throw Error(ErrorCode::InvalidArgument, std::string("bad contact set for ") + to_string(primitive));
    };
    switch (primitive) {
      case Primitive::Grasp: need(2, 0); break;
      case Primitive::Pivot: need(2, 1); break;
      case Primitive::Push:
      case Primitive::Pull: need(1, 1); break;
    }
  }
};

// ---------------------------------------------------------------------------
// Frames

/// Contact axes (normal, t1, t2) expressed in a frame whose z axis is the
/// inward normal: columns z, x, y.
inline Mat3 normal_first_axes() {
  Mat3 p;
  p << Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY();
  return p;
}

/// World-frame contact for a formation contact at configuration q.
inline Contact world_contact(const ContactFormation& f, const FormationContact& fc, const StackedPose& q) {
  const ObjectModel& m = f.model;
  Vec3 origin;
  Mat3 axes;
  if (is_palm(fc.role)) {
    const Pose3& palm = q.palm(fc.role);
    axes = palm.rotation() * normal_first_axes();
    origin = fc.kind == ContactKind::Patch ? palm.position() : q.object.transform_point(m.corners().at(fc.corner));
  } else {
    axes = normal_first_axes();
    origin = fc.kind == ContactKind::Patch ? q.object.transform_point(m.faces().at(fc.face).center)
                                           : q.object.transform_point(m.edges().at(fc.edge).point);
  }
  return Contact(Pose3(origin, axes), fc.kind, fc.mu, fc.patch);
}

inline std::vector<Contact> world_contacts(const ContactFormation& f, const StackedPose& q) {
  std::vector<Contact> out;
  out.reserve(f.contacts.size());
  for (const auto& c : f.contacts) out.push_back(world_contact(f, c, q));
  return out;
}

/// Wrenches are summed about the center of mass in world axes.
inline Pose3 wrench_reference(const StackedPose& q) {
  return Pose3(q.object.position(), Eigen::Quaterniond::Identity());
}

inline Vec6 net_contact_wrench(const ContactFormation& f, const StackedPose& q, const std::vector<Wrench>& w) {
  const Pose3 ref = wrench_reference(q);
  Vec6 sum = Vec6::Zero();
  for (std::size_t i = 0; i < f.contacts.size(); ++i)
    sum += grasp_matrix(world_contact(f, f.contacts[i], q), ref).transpose() * w[i].vector();
  return sum;
}

inline double equilibrium_residual(const ContactFormation& f, const StackedPose& q, const std::vector<Wrench>& w) {
  return (net_contact_wrench(f, q, w) + f.external_wrench().vector()).norm();
}

// ---------------------------------------------------------------------------
// Margins

inline double stability_margin_exact(const Contact& contact, const Wrench& w) {
  if (!cone_contains(contact, w)) throw Error(ErrorCode::NotInCone, "force outside the friction cone");
  const double mu = contact.mu;
  return std::max(0.0, (mu * w.normal() - w.tangential().norm()) / std::sqrt(1.0 + mu * mu));
}

/// Signed distance to the cone boundary; negative outside. For diagnostics.
inline double signed_margin(const Contact& contact, const Wrench& w) {
  const double mu = contact.mu;
  return (mu * w.normal() - w.tangential().norm()) / std::sqrt(1.0 + mu * mu);
}

inline double surrogate_margin(const Contact& contact, const Wrench& w) {
  if (!cone_contains(contact, w)) throw Error(ErrorCode::NotInCone, "force outside the friction cone");
  return std::max(0.0, w.normal() - w.tangential().norm() / contact.mu);
}

// ---------------------------------------------------------------------------
// Kinematics

inline constexpr double kGapTol = 1e-6;
inline constexpr double kAlignTol = 1e-3;

struct KinematicViolation {
  enum class Kind { Gap, Alignment, Penetration };
  std::size_t contact = 0;
  Kind kind = Kind::Gap;
  double value = 0.0;
};

inline std::vector<KinematicViolation> check_formation_kinematics(const ContactFormation& f, const StackedPose& q) {
  std::vector<KinematicViolation> out;
  const ObjectModel& m = f.model;
  std::vector<Vec3> corners;
  for (const auto& c : m.corners()) corners.push_back(q.object.transform_point(c));
  for (std::size_t i = 0; i < f.contacts.size(); ++i) {
    const auto& fc = f.contacts[i];
    if (is_palm(fc.role)) {
      const Pose3& palm = q.palm(fc.role);
      const Vec3 n = palm.rotate(Vec3::UnitZ());  // palm normal, pointing into the object
      if (fc.kind == ContactKind::Patch) {
        const Face& face = m.faces().at(fc.face);
        const Vec3 fn = q.object.rotate(face.normal);
        const double gap = (palm.position() - q.object.transform_point(face.center)).dot(fn);
        if (std::abs(gap) > kGapTol) out.push_back({i, KinematicViolation::Kind::Gap, gap});
        const double ang = angle_between(n, -fn);
        if (ang > kAlignTol) out.push_back({i, KinematicViolation::Kind::Alignment, ang});
      } else {
        const double gap = (corners.at(fc.corner) - palm.position()).dot(n);
        if (std::abs(gap) > kGapTol) out.push_back({i, KinematicViolation::Kind::Gap, gap});
        double worst = 0.0;
        for (const auto& c : corners) worst = std::min(worst, (c - palm.position()).dot(n));
        if (worst < -kGapTol) out.push_back({i, KinematicViolation::Kind::Penetration, worst});
      }
    } else {
      if (fc.kind == ContactKind::Patch) {
        const Face& face = m.faces().at(fc.face);
        const double gap = q.object.transform_point(face.center).z();
        if (std::abs(gap) > kGapTol) out.push_back({i, KinematicViolation::Kind::Gap, gap});
        const Vec3 fn = q.object.rotate(face.normal);
        const double ang = angle_between(fn, -Vec3::UnitZ());
        if (ang > kAlignTol) out.push_back({i, KinematicViolation::Kind::Alignment, ang});
      } else {
        const Edge& e = m.edges().at(fc.edge);
        const double za = corners.at(e.corner_a).z(), zb = corners.at(e.corner_b).z();
        const double gap = std::abs(za) > std::abs(zb) ? za : zb;
        if (std::abs(gap) > kGapTol) out.push_back({i, KinematicViolation::Kind::Gap, gap});
      }
      double lowest = 0.0;
      for (const auto& c : corners) lowest = std::min(lowest, c.z());
      if (lowest < -kGapTol) out.push_back({i, KinematicViolation::Kind::Penetration, lowest});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear parametrization of admissible contact wrenches.
//
// Each contact wrench is w = B v with v = [generator weights, alpha, free
// tangential torques]. Generators span an inscribed polyhedral approximation
// of the friction cone (point) or limit-surface cone (patch); alpha adds pure
// normal force, so alpha is a lower bound on the surrogate margin.

struct WrenchBasis {
  MatX B;                 // 6 x n
  Eigen::Index generators = 0;
  Eigen::Index alpha = 0;       // column index of alpha
  Eigen::Index free_torque = -1;  // first of two free torque columns, patches only

  Eigen::Index size() const { return B.cols(); }
};

inline WrenchBasis wrench_basis(const FormationContact& fc, int facets) {
  std::vector<Vec6> gens;
  if (fc.kind == ContactKind::Point) {
    for (const auto& d : polyhedral_cone(fc.mu, facets).edge_directions) {
      Vec6 g = Vec6::Zero();
      g.head<3>() = d;
      gens.push_back(g);
    }
  } else {
    // Points on the unit sphere of (f_t1, f_t2, tau_n / rho), scaled by mu.
    const double rho = fc.patch->torque_radius();
    auto add = [&](double lat, double lon) {
      Vec6 g = Vec6::Zero();
      g(0) = 1.0;
      g(1) = fc.mu * std::cos(lat) * std::cos(lon);
      g(2) = fc.mu * std::cos(lat) * std::sin(lon);
      g(3) = fc.mu * rho * std::sin(lat);
      gens.push_back(g / g.head<3>().norm());
    };
    for (int j = 0; j < facets; ++j) add(0.0, 2.0 * kPi * j / facets);
    for (double lat : {kPi / 4.0, -kPi / 4.0})
      for (int j = 0; j < facets; ++j) add(lat, 2.0 * kPi * (j + 0.5) / facets);
    add(kPi / 2.0, 0.0);
    add(-kPi / 2.0, 0.0);
  }
  WrenchBasis wb;
  wb.generators = static_cast<Eigen::Index>(gens.size());
  const Eigen::Index extra = fc.kind == ContactKind::Patch ? 3 : 1;
  wb.B = MatX::Zero(6, wb.generators + extra);
  for (Eigen::Index j = 0; j < wb.generators; ++j) wb.B.col(j) = gens[j];
  wb.alpha = wb.generators;
  wb.B(0, wb.alpha) = 1.0;
  if (fc.kind == ContactKind::Patch) {
    wb.free_torque = wb.alpha + 1;
    wb.B(4, wb.free_torque) = 1.0;
    wb.B(5, wb.free_torque + 1) = 1.0;
  }
  return wb;
}

/// Variable layout for a set of contact wrench bases inside a larger QP.
struct WrenchLayout {
  std::vector<WrenchBasis> bases;
  std::vector<Eigen::Index> offsets;
  Eigen::Index total = 0;

  WrenchLayout(const ContactFormation& f, Eigen::Index start = 0) {
    total = start;
    for (const auto& c : f.contacts) {
      bases.push_back(wrench_basis(c, f.cone_facets));
      offsets.push_back(total);
      total += bases.back().size();
    }
  }

  /// Appends per-contact sign, pressure-center, force-cap and setpoint rows.
  void add_contact_constraints(qp::QpProblem& p, const ContactFormation& f) const {
    const auto n = p.num_vars();
    if (p.lower.size() == 0) p.lower = VecX::Constant(n, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < bases.size(); ++i) {
      const auto& wb = bases[i];
      const auto off = offsets[i];
      p.lower.segment(off, wb.alpha + 1).setZero();  // generators and alpha
      VecX fn_row = VecX::Zero(n);
      fn_row.segment(off, wb.size()) = wb.B.row(0).transpose();
      const auto& fc = f.contacts[i];
      if (fc.kind == ContactKind::Patch) {
        const double r = fc.patch->characteristic_radius;
        for (int k = 0; k < 2; ++k) {
          VecX row = -r * fn_row;
          row(off + wb.free_torque + k) = 1.0;
          p.add_inequality(row, 0.0);
          row(off + wb.free_torque + k) = -1.0;
          p.add_inequality(row, 0.0);
        }
      }
      if (fc.normal_force) {
        p.add_equality(fn_row, *fc.normal_force);
      } else {
        p.add_inequality(fn_row, f.max_normal_force);
      }
    }
  }

  std::vector<Wrench> wrenches(const VecX& x) const {
    std::vector<Wrench> out;
    for (std::size_t i = 0; i < bases.size(); ++i)
      out.emplace_back(Vec6(bases[i].B * x.segment(offsets[i], bases[i].size())));
    return out;
  }
};

// ---------------------------------------------------------------------------
// Equilibrium

struct EquilibriumSolution {
  std::vector<Wrench> wrenches;  // contact frames
  bool feasible = false;
  std::vector<double> margin_per_contact;  // exact phi, signed when infeasible
  double residual = 0.0;
  qp::Status status = qp::Status::MaxIterations;
};

namespace detail {

/// Minimum-norm correction of the free wrench components so the force
/// balance holds to machine precision.
inline void polish_balance(const ContactFormation& f, const StackedPose& q, std::vector<Wrench>& w) {
  const Pose3 ref = wrench_reference(q);
  std::vector<Mat6> gt;
  std::vector<std::vector<int>> free;
  for (const auto& fc : f.contacts) {
    gt.push_back(grasp_matrix(world_contact(f, fc, q), ref).transpose());
    std::vector<int> comps;
    const bool fixed_zero = fc.normal_force && *fc.normal_force <= 0.0;
    if (!fixed_zero) {
      if (!fc.normal_force) comps.push_back(0);
      comps.push_back(1);
      comps.push_back(2);
      if (fc.kind == ContactKind::Patch) comps.insert(comps.end(), {3, 4, 5});
    }
    free.push_back(comps);
  }
  Eigen::Index cols = 0;
  for (const auto& c : free) cols += static_cast<Eigen::Index>(c.size());
  if (cols == 0) return;
  for (int iter = 0; iter < 3; ++iter) {
    const Vec6 r = net_contact_wrench(f, q, w) + f.external_wrench().vector();
    if (r.norm() == 0.0) return;
    MatX J(6, cols);
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < free.size(); ++i)
      for (int c : free[i]) J.col(k++) = gt[i].col(c);
    const VecX d = Eigen::CompleteOrthogonalDecomposition<MatX>(J).solve(-r);
    k = 0;
    for (std::size_t i = 0; i < free.size(); ++i) {
      Vec6 v = w[i].vector();
      for (int c : free[i]) v(c) += d(k++);
      w[i] = Wrench(v);
    }
  }
}

/// Equality rows sum_i G_i^T B_i v_i = -w_ext for a layout.
inline void add_balance_rows(qp::QpProblem& p, const ContactFormation& f, const StackedPose& q,
                             const WrenchLayout& layout) {
  const Pose3 ref = wrench_reference(q);
  const Vec6 rhs = -f.external_wrench().vector();
  MatX rows = MatX::Zero(6, p.num_vars());
  for (std::size_t i = 0; i < f.contacts.size(); ++i) {
    const Mat6 gt = grasp_matrix(world_contact(f, f.contacts[i], q), ref).transpose();
    rows.block(0, layout.offsets[i], 6, layout.bases[i].size()) = gt * layout.bases[i].B;
  }
  for (int r = 0; r < 6; ++r) p.add_equality(rows.row(r).transpose(), rhs(r));
}

}  // namespace detail

/// Finds contact wrenches balancing the external wrench. Among all feasible
/// solutions it maximizes the smallest surrogate margin, then picks the one
/// with minimum wrench norm.
inline EquilibriumSolution solve_equilibrium(const ContactFormation& f, const StackedPose& q) {
  f.validate();
  const auto violations = check_formation_kinematics(f, q);
  if (!violations.empty())
    throw Error(ErrorCode::KinematicViolation,
                "contact " + std::to_string(violations.front().contact) + " off by " +
                    std::to_string(violations.front().value));

  EquilibriumSolution out;
  const WrenchLayout layout(f);
  const Eigen::Index t_index = layout.total;
  const Eigen::Index n = layout.total + 1;

  auto base_problem = [&]() {
    qp::QpProblem p(n);
    layout.add_contact_constraints(p, f);
    detail::add_balance_rows(p, f, q, layout);
    return p;
  };

  // Stage 1: maximize the smallest alpha.
  qp::QpProblem lp = base_problem();
  lp.c(t_index) = -1.0;
  lp.lower(t_index) = 0.0;
  for (std::size_t i = 0; i < f.contacts.size(); ++i) {
    VecX row = VecX::Zero(n);
    row(t_index) = 1.0;
    row(layout.offsets[i] + layout.bases[i].alpha) = -1.0;
    lp.add_inequality(row, 0.0);
  }
  const auto s1 = qp::solve(lp);
  out.status = s1.status;
  if (s1.status != qp::Status::Optimal) return out;
  const double t_star = std::max(0.0, s1.x(t_index));

  // Stage 2: minimum-norm wrenches keeping that margin.
  qp::QpProblem p = base_problem();
  p.lower(t_index) = 0.0;
  p.upper = VecX::Constant(n, std::numeric_limits<double>::infinity());
  p.upper(t_index) = 0.0;
  for (std::size_t i = 0; i < f.contacts.size(); ++i) {
    const auto& wb = layout.bases[i];
    const auto off = layout.offsets[i];
    p.Q.block(off, off, wb.size(), wb.size()) += wb.B.transpose() * wb.B;
    p.lower(off + wb.alpha) = std::max(0.0, t_star - 1e-7 * (1.0 + t_star));
  }
  p.Q.diagonal().array() += 1e-9;
  const auto s2 = qp::solve(p);
  out.status = s2.status;
  if (s2.status != qp::Status::Optimal) return out;

  out.wrenches = layout.wrenches(s2.x);
  detail::polish_balance(f, q, out.wrenches);
  out.residual = equilibrium_residual(f, q, out.wrenches);
  const double scale = std::max(1.0, f.external_wrench().vector().norm());
  out.feasible = out.residual <= 1e-9 * scale;
  for (std::size_t i = 0; i < f.contacts.size(); ++i) {
    const Contact c = world_contact(f, f.contacts[i], q);
    out.feasible = out.feasible && cone_contains(c, out.wrenches[i]);
    out.margin_per_contact.push_back(signed_margin(c, out.wrenches[i]));
  }
  return out;
}

/// Smallest commanded palm normal force that still admits equilibrium, with
/// both palms sharing the same force. Returns nullopt when infeasible.
inline std::optional<double> minimum_palm_force(ContactFormation f, const StackedPose& q) {
  for (auto& c : f.contacts) c.normal_force.reset();
  const WrenchLayout layout(f);
  const Eigen::Index s_index = layout.total;
  qp::QpProblem p(layout.total + 1);
  layout.add_contact_constraints(p, f);
  detail::add_balance_rows(p, f, q, layout);
  p.c(s_index) = 1.0;
  for (std::size_t i = 0; i < f.contacts.size(); ++i) {
    if (!is_palm(f.contacts[i].role)) continue;
    VecX row = VecX::Zero(p.num_vars());
    row.segment(layout.offsets[i], layout.bases[i].size()) = layout.bases[i].B.row(0).transpose();
    row(s_index) = -1.0;
    p.add_inequality(row, 0.0);
  }
  const auto s = qp::solve(p);
  if (s.status != qp::Status::Optimal) return std::nullopt;
  return s.x(s_index);
}

// ---------------------------------------------------------------------------
// Formation builders

struct FormationParams {
  double mu_palm = 0.8;
  double mu_table = 0.5;
  PatchModel palm_patch = PatchModel(0.04, 0.6);
  double ls_coefficient = 0.6;  // table patches
  double max_normal_force = 25.0;
  int cone_facets = 8;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
};

inline PatchModel table_patch(const ObjectModel& m, int face, double c) {
  const Face& f = m.faces().at(face);
  return PatchModel(std::min(f.half_u, f.half_v), c);
}

inline ContactFormation empty_formation(Primitive p, const ObjectModel& m, const FormationParams& params) {
  ContactFormation f;
  f.primitive = p;
  f.model = m;
  f.gravity = params.gravity;
  f.max_normal_force = params.max_normal_force;
  f.cone_facets = params.cone_facets;
  return f;
}

inline FormationContact palm_patch_contact(ContactRole role, int face, const FormationParams& params,
                                           std::optional<double> force = std::nullopt) {
  FormationContact c;
  c.role = role;
  c.kind = ContactKind::Patch;
  c.mu = params.mu_palm;
  c.patch = params.palm_patch;
  c.face = face;
  c.normal_force = force;
  return c;
}

inline FormationContact table_patch_contact(const ObjectModel& m, int face, const FormationParams& params) {
  FormationContact c;
  c.role = ContactRole::Environment;
  c.kind = ContactKind::Patch;
  c.mu = params.mu_table;
  c.patch = table_patch(m, face, params.ls_coefficient);
  c.face = face;
  return c;
}

/// Pull: left palm presses on the top face; the bottom face slides on the table.
inline ContactFormation pull_formation(const ObjectModel& m, int resting_face, const FormationParams& params,
                                       double palm_force) {
  ContactFormation f = empty_formation(Primitive::Pull, m, params);
  f.contacts.push_back(palm_patch_contact(ContactRole::PalmLeft, ObjectModel::opposite_face(resting_face), params, palm_force));
  f.contacts.push_back(table_patch_contact(m, resting_face, params));
  return f;
}

/// Push: left palm on a lateral face; the bottom face slides on the table.
inline ContactFormation push_formation(const ObjectModel& m, int resting_face, int pushed_face,
                                       const FormationParams& params) {
  if (!ObjectModel::adjacent(resting_face, pushed_face))
    throw Error(ErrorCode::InvalidArgument, "pushed face must be lateral");
  ContactFormation f = empty_formation(Primitive::Push, m, params);
  f.contacts.push_back(palm_patch_contact(ContactRole::PalmLeft, pushed_face, params));
  f.contacts.push_back(table_patch_contact(m, resting_face, params));
  return f;
}

/// Lateral face pair a grasp squeezes: the pair with the smaller separation.
inline std::pair<int, int> grasp_faces(const ObjectModel& m, int resting_face) {
  const int rest_axis = resting_face / 2;
  int best_axis = -1;
  for (int axis = 0; axis < 3; ++axis) {
    if (axis == rest_axis) continue;
    if (best_axis < 0 || m.extents()(axis) < m.extents()(best_axis)) best_axis = axis;
  }
  return {2 * best_axis + 1, 2 * best_axis};  // left on the negative face
}

inline ContactFormation grasp_formation(const ObjectModel& m, int resting_face, const FormationParams& params,
                                        std::optional<double> squeeze = std::nullopt) {
  ContactFormation f = empty_formation(Primitive::Grasp, m, params);
  const auto [lf, rf] = grasp_faces(m, resting_face);
  f.contacts.push_back(palm_patch_contact(ContactRole::PalmLeft, lf, params, squeeze));
  f.contacts.push_back(palm_patch_contact(ContactRole::PalmRight, rf, params, squeeze));
  return f;
}

/// Corners held by the palms while pivoting about `edge`: on each side face
/// perpendicular to the edge, the corner diagonally opposite the edge.
inline std::pair<int, int> pivot_corners(const ObjectModel& m, int edge) {
  const Edge& e = m.edges().at(edge);
  const Vec3 d = e.direction;
  const Vec3 far = -(e.point - e.point.dot(d) * d);
  int left = -1, right = -1;
  for (int c = 0; c < 8; ++c) {
    const Vec3& p = m.corners()[c];
    if ((p - p.dot(d) * d - far).norm() > 1e-12) continue;
    (p.dot(d) < 0.0 ? left : right) = c;
  }
  return {left, right};
}

inline ContactFormation pivot_formation(const ObjectModel& m, int edge, const FormationParams& params) {
  ContactFormation f = empty_formation(Primitive::Pivot, m, params);
  const auto [cl, cr] = pivot_corners(m, edge);
  for (auto [role, corner] : {std::pair{ContactRole::PalmLeft, cl}, std::pair{ContactRole::PalmRight, cr}}) {
    FormationContact c;
    c.role = role;
    c.kind = ContactKind::Point;
    c.mu = params.mu_palm;
    c.corner = corner;
    f.contacts.push_back(c);
  }
  FormationContact t;
  t.role = ContactRole::Environment;
  t.kind = ContactKind::Point;
  t.mu = params.mu_table;
  t.edge = edge;
  f.contacts.push_back(t);
  return f;
}

/// Palm pose in the object frame for palm contact `index`: origin at the
/// contact (face center or corner), z along the inward normal. For patches x
/// follows the component of `up` orthogonal to z; for corner points it follows
/// the direction from the pivot edge to the corner.
inline Pose3 palm_offset(const ContactFormation& f, std::size_t index, const Vec3& up) {
  const ObjectModel& m = f.model;
  const FormationContact& fc = f.contacts.at(index);
  Vec3 origin, z, up_ref;
  if (fc.kind == ContactKind::Patch) {
    const Face& face = m.faces().at(fc.face);
    origin = face.center;
    z = -face.normal;
  } else {
    // Pivot palms cover the end faces perpendicular to the pivot edge.
    origin = m.corners().at(fc.corner);
    Vec3 axis = Vec3::UnitX();
    Vec3 anchor = Vec3::Zero();
    for (const auto& c : f.contacts)
      if (c.role == ContactRole::Environment && c.edge >= 0) {
        axis = m.edges().at(c.edge).direction;
        anchor = m.edges().at(c.edge).point;
      }
    z = origin.dot(axis) < 0.0 ? axis : Vec3(-axis);
    // Object-fixed x so the palm turns with the object while it tips.
    up_ref = origin - anchor;
  }
  const Vec3& u = fc.kind == ContactKind::Patch ? up : up_ref;
  Vec3 x = u - u.dot(z) * z;
  if (x.norm() < 1e-9) x = z.unitOrthogonal();
  x.normalize();
  Mat3 r;
  r << x, z.cross(x), z;
  return Pose3(origin, r);
}

/// Stacked configuration with each palm attached at its contact. Palms without
/// a contact stay at `park`.
inline StackedPose attach_palms(const ContactFormation& f, const Pose3& object, const Pose3& park) {
  StackedPose q{object, park, park};
  const Vec3 up_obj = object.rotation().transpose() * Vec3::UnitZ();
  for (std::size_t i = 0; i < f.contacts.size(); ++i) {
    if (!is_palm(f.contacts[i].role)) continue;
    q.palm(f.contacts[i].role) = object * palm_offset(f, i, up_obj);
  }
  return q;
}

}  // namespace palmplan
