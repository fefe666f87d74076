#pragma once

// Linearized contact-state controller. Given binary slip signals it picks small
// palm pose changes and contact wrench changes that maximize the slip-weighted
// surrogate margins while keeping the linearized force balance.

#include "palmplan/mechanics.hpp"

#include <array>
#include <vector>

namespace palmplan {

struct SlipSignal {
  std::vector<int> bits;  // one per formation contact
  double time = 0.0;
};

struct ControllerSettings {
  double beta_slip = 9.0;
  double beta_stick = 1.0;
  double pos_bound = 0.002;   // m, per axis
  double rot_bound = 0.02;    // rad, per axis
  double force_bound = 2.0;   // N or N m, per wrench component
  double regularization = 1e-6;
  double linearization_tol = 1e-6;
};

inline std::vector<double> slip_weights(const SlipSignal& s, const ControllerSettings& cfg = {}) {
  if (!(cfg.beta_slip > 0.0 && cfg.beta_stick > 0.0))
    throw Error(ErrorCode::InvalidArgument, "slip weights must be positive");
  std::vector<double> beta;
  double sum = 0.0;
  for (int b : s.bits) {
    beta.push_back(b ? cfg.beta_slip : cfg.beta_stick);
    sum += beta.back();
  }
  for (double& b : beta) b /= sum;
  return beta;
}

/// Palm perturbation layout: [dp_left, dtheta_left, dp_right, dtheta_right].
/// Rotations are rotation vectors composed on the left about the palm origin.
inline constexpr int kPalmDofs = 12;

inline int palm_block(ContactRole r) { return r == ContactRole::PalmRight ? 6 : 0; }

inline StackedPose apply_palm_delta(const StackedPose& q, const Eigen::Matrix<double, kPalmDofs, 1>& d) {
  StackedPose out = q;
  out.left = q.left.perturbed(d.segment<3>(0), d.segment<3>(3));
  out.right = q.right.perturbed(d.segment<3>(6), d.segment<3>(9));
  return out;
}

struct Linearization {
  /// d(sum_i G_i^T w_i) / d(palm perturbation), 6 x 12.
  Eigen::Matrix<double, 6, kPalmDofs> d_palm;
  /// d(G_i^T w_i) / d w_i = G_i^T for each contact.
  std::vector<Mat6> d_wrench;
  Vec6 residual;
};

/// Analytic Jacobians of the world wrench sum about (q, w).
inline Linearization linearize_equilibrium(const ContactFormation& f, const StackedPose& q,
                                           const std::vector<Wrench>& w, double tol = 1e-6) {
  if (w.size() != f.contacts.size()) throw Error(ErrorCode::InvalidArgument, "one wrench per contact");
  Linearization lin;
  lin.residual = net_contact_wrench(f, q, w) + f.external_wrench().vector();
  if (lin.residual.norm() > tol * std::max(1.0, f.external_wrench().vector().norm()))
    throw Error(ErrorCode::LinearizationPointInfeasible,
                "equilibrium residual " + std::to_string(lin.residual.norm()));
  lin.d_palm.setZero();
  const Pose3 ref = wrench_reference(q);
  for (std::size_t i = 0; i < f.contacts.size(); ++i) {
    const Contact c = world_contact(f, f.contacts[i], q);
    const Mat6 gt = grasp_matrix(c, ref).transpose();
    lin.d_wrench.push_back(gt);
    if (!is_palm(f.contacts[i].role)) continue;
    const Mat3 rc = c.frame.rotation();
    const Vec3 fw = rc * w[i].force();
    const Vec3 tc = rc * w[i].torque();
    const Vec3 r = c.frame.position() - ref.position();
    const int b = palm_block(f.contacts[i].role);
    lin.d_palm.block<3, 3>(0, b + 3) += -skew(fw);
    lin.d_palm.block<3, 3>(3, b + 3) += -skew(r) * skew(fw) - skew(tc);
    // Patch contacts sit at the palm origin and translate with it.
    if (f.contacts[i].kind == ContactKind::Patch) lin.d_palm.block<3, 3>(3, b) += -skew(fw);
  }
  return lin;
}

struct ControlAdjustment {
  std::array<Vec3, 2> delta_position{Vec3::Zero(), Vec3::Zero()};  // left, right
  std::array<Vec3, 2> delta_rotation{Vec3::Zero(), Vec3::Zero()};
  std::vector<Wrench> delta_wrenches;
  std::vector<Wrench> wrenches;  // w* + delta
  std::vector<double> achieved_alphas;
  bool applied = false;  // false: QP failed or the step was rejected; hold the previous command
  qp::Status status = qp::Status::MaxIterations;
  std::string diagnostic;

  Eigen::Matrix<double, kPalmDofs, 1> palm_delta() const {
    Eigen::Matrix<double, kPalmDofs, 1> d;
    d << delta_position[0], delta_rotation[0], delta_position[1], delta_rotation[1];
    return d;
  }
};

namespace detail {

/// Linear rows keeping each palm's contact consistent under the perturbation.
inline void add_palm_kinematics(qp::QpProblem& p, const ContactFormation& f, const StackedPose& q,
                                Eigen::Index dq_off) {
  const auto n = p.num_vars();
  auto fix = [&](int idx) {
    VecX row = VecX::Zero(n);
    row(dq_off + idx) = 1.0;
    p.add_equality(row, 0.0);
  };
  std::array<bool, 2> used{false, false};
  for (const auto& fc : f.contacts) {
    if (!is_palm(fc.role)) continue;
    const int b = palm_block(fc.role);
    used[b / 6] = true;
    // The palm material point at the contact stays put while sticking.
    for (int k = 0; k < 3; ++k) fix(b + k);
    if (fc.kind == ContactKind::Patch) {
      for (int k = 3; k < 6; ++k) fix(b + k);  // face alignment
      continue;
    }
    const Pose3& palm = q.palm(fc.role);
    const Vec3 nrm = palm.rotate(Vec3::UnitZ());
    VecX spin = VecX::Zero(n);
    spin.segment<3>(dq_off + b + 3) = nrm;
    p.add_equality(spin, 0.0);
    // Tilting the palm plane must not push it into the object.
    for (const auto& c : f.model.corners()) {
      const Vec3 cw = q.object.transform_point(c) - palm.position();
      const Vec3 g = nrm.cross(cw);
      if (g.norm() < 1e-12) continue;
      VecX row = VecX::Zero(n);
      row.segment<3>(dq_off + b + 3) = -g;
      p.add_inequality(row, cw.dot(nrm));
    }
  }
  for (int palm = 0; palm < 2; ++palm)
    if (!used[palm])
      for (int k = 0; k < 6; ++k) fix(6 * palm + k);
}

}  // namespace detail

/// One controller update about the linearization point (q, w).
inline ControlAdjustment control_step(const ContactFormation& formation, const StackedPose& q,
                                      const std::vector<Wrench>& w, const SlipSignal& signals,
                                      const ControllerSettings& cfg = {}) {
  if (formation.contacts.empty()) throw Error(ErrorCode::InvalidArgument, "formation has no contacts");
  if (signals.bits.size() != formation.contacts.size())
    throw Error(ErrorCode::InvalidArgument, "one slip bit per contact");
  const Linearization lin = linearize_equilibrium(formation, q, w, cfg.linearization_tol);
  const std::vector<double> beta = slip_weights(signals, cfg);

  // Force setpoints are decision variables here.
  ContactFormation f = formation;
  for (auto& c : f.contacts) c.normal_force.reset();

  const WrenchLayout layout(f, kPalmDofs);
  const Eigen::Index n = layout.total;
  qp::QpProblem p(n);
  p.lower = VecX::Constant(n, -std::numeric_limits<double>::infinity());
  p.upper = VecX::Constant(n, std::numeric_limits<double>::infinity());
  for (int k = 0; k < kPalmDofs; ++k) {
    const double bound = (k % 6) < 3 ? cfg.pos_bound : cfg.rot_bound;
    p.lower(k) = -bound;
    p.upper(k) = bound;
  }
  layout.add_contact_constraints(p, f);

  // Linearized balance: sum_i G_i^T B_i v_i + J dq = -w_ext.
  MatX bal = MatX::Zero(6, n);
  bal.leftCols(kPalmDofs) = lin.d_palm;
  for (std::size_t i = 0; i < f.contacts.size(); ++i)
    bal.block(0, layout.offsets[i], 6, layout.bases[i].size()) = lin.d_wrench[i] * layout.bases[i].B;
  const Vec6 rhs = -f.external_wrench().vector();
  for (int r = 0; r < 6; ++r) p.add_equality(bal.row(r).transpose(), rhs(r));

  // Per-component force bounds, objective and regularization.
  p.Q.topLeftCorner(kPalmDofs, kPalmDofs).diagonal().setConstant(cfg.regularization);
  for (std::size_t i = 0; i < f.contacts.size(); ++i) {
    const auto& wb = layout.bases[i];
    const auto off = layout.offsets[i];
    const Vec6 w0 = w[i].vector();
    for (int r = 0; r < 6; ++r) {
      if (wb.B.row(r).isZero()) continue;
      VecX row = VecX::Zero(n);
      row.segment(off, wb.size()) = wb.B.row(r).transpose();
      p.add_inequality(row, w0(r) + cfg.force_bound);
      p.add_inequality(-row, -(w0(r) - cfg.force_bound));
    }
    p.c(off + wb.alpha) = -beta[i];
    p.Q.block(off, off, wb.size(), wb.size()) += cfg.regularization * wb.B.transpose() * wb.B;
    p.c.segment(off, wb.size()) -= cfg.regularization * wb.B.transpose() * w0;
  }
  p.Q.diagonal().array() += 1e-12;
  detail::add_palm_kinematics(p, f, q, 0);

  ControlAdjustment out;
  const auto sol = qp::solve(p);
  out.status = sol.status;
  if (sol.status != qp::Status::Optimal) {
    out.diagnostic = std::string("qp ") + qp::to_string(sol.status);
    out.delta_wrenches.assign(w.size(), Wrench());
    out.wrenches = w;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const Contact c = world_contact(f, f.contacts[i], q);
      out.achieved_alphas.push_back(cone_contains(c, w[i]) ? surrogate_margin(c, w[i]) : 0.0);
    }
    return out;
  }

  for (int palm = 0; palm < 2; ++palm) {
    out.delta_position[palm] = sol.x.segment<3>(6 * palm);
    out.delta_rotation[palm] = sol.x.segment<3>(6 * palm + 3);
  }
  out.wrenches = layout.wrenches(sol.x);
  const StackedPose q_next = apply_palm_delta(q, out.palm_delta());
  for (std::size_t i = 0; i < w.size(); ++i) {
    out.delta_wrenches.push_back(out.wrenches[i] - w[i]);
    const Contact c = world_contact(f, f.contacts[i], q_next);
    out.achieved_alphas.push_back(std::max(0.0, out.wrenches[i].normal() - out.wrenches[i].tangential().norm() / c.mu));
  }
  const auto violations = check_formation_kinematics(formation, q_next);
  if (!violations.empty()) {
    out.diagnostic = "step rejected: kinematic violation";
    return out;
  }
  out.applied = true;
  return out;
}

/// Stateful wrapper that holds the previous command when a step fails.
class ContactController {
 public:
  explicit ContactController(ControllerSettings cfg = {}) : cfg_(cfg) {}

  const ControllerSettings& settings() const { return cfg_; }
  int consecutive_failures() const { return failures_; }

  ControlAdjustment step(const ContactFormation& f, const StackedPose& q, const std::vector<Wrench>& w,
                         const SlipSignal& s) {
    ControlAdjustment adj = control_step(f, q, w, s, cfg_);
    failures_ = adj.applied ? 0 : failures_ + 1;
    if (!adj.applied) {
      adj.delta_position = {Vec3::Zero(), Vec3::Zero()};
      adj.delta_rotation = {Vec3::Zero(), Vec3::Zero()};
    }
    return adj;
  }

 private:
  ControllerSettings cfg_;
  int failures_ = 0;
};

}  // namespace palmplan
