#pragma once

// Dense convex QP solver:
//
//   minimize   1/2 x'Qx + c'x
//   subject to Ax = b,  Gx <= h,  lower <= x <= upper
//
// Primal-dual interior point with Mehrotra predictor-corrector steps. When the
// main iteration does not converge an elastic phase-1 program decides between
// Infeasible and MaxIterations.

#include "palmplan/core_types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace palmplan::qp {

struct QpProblem {
  MatX Q;
  VecX c;
  MatX A;
  VecX b;
  MatX G;
  VecX h;
  VecX lower;  // empty, or size n with -inf entries for free variables
  VecX upper;

  QpProblem() = default;

  /// Empty problem with n variables and no constraints.
  explicit QpProblem(Eigen::Index n)
      : Q(MatX::Zero(n, n)), c(VecX::Zero(n)), A(0, n), b(0), G(0, n), h(0) {}

  Eigen::Index num_vars() const { return c.size(); }

  void validate() const {
    const auto n = c.size();
    auto bad = [](const char* what) { throw Error(ErrorCode::InvalidArgument, what); };
    if (Q.rows() != n || Q.cols() != n) bad("Q must be n x n");
    if (A.cols() != n || A.rows() != b.size()) bad("A/b dimension mismatch");
    if (G.cols() != n || G.rows() != h.size()) bad("G/h dimension mismatch");
    if (lower.size() != 0 && lower.size() != n) bad("lower bound size mismatch");
    if (upper.size() != 0 && upper.size() != n) bad("upper bound size mismatch");
    if (!Q.allFinite() || !c.allFinite() || !A.allFinite() || !b.allFinite() ||
        !G.allFinite() || !h.allFinite())
      bad("problem data must be finite");
  }

  /// Appends the row constraint  row . x <= rhs.
  void add_inequality(const VecX& row, double rhs) {
    G.conservativeResize(G.rows() + 1, Eigen::NoChange);
    G.row(G.rows() - 1) = row.transpose();
    h.conservativeResize(h.size() + 1);
    h(h.size() - 1) = rhs;
  }

  void add_equality(const VecX& row, double rhs) {
    A.conservativeResize(A.rows() + 1, Eigen::NoChange);
    A.row(A.rows() - 1) = row.transpose();
    b.conservativeResize(b.size() + 1);
    b(b.size() - 1) = rhs;
  }
};

enum class Status { Optimal, Infeasible, MaxIterations };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "Optimal";
    case Status::Infeasible: return "Infeasible";
    case Status::MaxIterations: return "MaxIterations";
  }
  return "?";
}

struct QpSolution {
  VecX x;
  Status status = Status::MaxIterations;
  double objective = 0.0;
  double primal_residual = 0.0;  // max equality / inequality violation
  double dual_residual = 0.0;    // stationarity
  double complementarity = 0.0;  // max_i s_i z_i
  double regularization = 0.0;   // ridge added to Q, if any
  int iterations = 0;
  VecX eq_multipliers;
  VecX ineq_multipliers;  // for the G rows followed by finite bound rows
};

struct Settings {
  double tol = 1e-8;
  int max_iter = 100000;
};

namespace detail {

struct StandardForm {
  MatX Q;
  VecX c;
  MatX A;
  VecX b;
  MatX G;
  VecX h;
};

inline StandardForm to_standard(const QpProblem& p) {
  const auto n = p.num_vars();
  StandardForm s;
  s.Q = 0.5 * (p.Q + p.Q.transpose());
  s.c = p.c;
  s.A = p.A;
  s.b = p.b;
  std::vector<std::pair<Eigen::Index, double>> rows;  // (var, sign)
  std::vector<double> rhs;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p.upper.size() && std::isfinite(p.upper(i))) {
      rows.emplace_back(i, 1.0);
      rhs.push_back(p.upper(i));
    }
    if (p.lower.size() && std::isfinite(p.lower(i))) {
      rows.emplace_back(i, -1.0);
      rhs.push_back(-p.lower(i));
    }
  }
  const auto m = p.G.rows() + static_cast<Eigen::Index>(rows.size());
  s.G = MatX::Zero(m, n);
  s.h = VecX::Zero(m);
  s.G.topRows(p.G.rows()) = p.G;
  s.h.head(p.G.rows()) = p.h;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = p.G.rows() + static_cast<Eigen::Index>(k);
    s.G(r, rows[k].first) = rows[k].second;
    s.h(r) = rhs[k];
  }
  return s;
}

/// Removes linearly dependent equality rows. Returns false when the system
/// A x = b is inconsistent.
inline bool reduce_equalities(MatX& A, VecX& b) {
  if (A.rows() == 0) return true;
  Eigen::ColPivHouseholderQR<MatX> qr(A.transpose());
  qr.setThreshold(1e-11);
  const auto rank = qr.rank();
  if (rank == A.rows()) return true;
  const Eigen::VectorXi perm = qr.colsPermutation().indices();
  std::vector<int> keep(perm.data(), perm.data() + rank);
  std::sort(keep.begin(), keep.end());
  MatX Ar(rank, A.cols());
  VecX br(rank);
  for (Eigen::Index i = 0; i < rank; ++i) {
    Ar.row(i) = A.row(keep[i]);
    br(i) = b(keep[i]);
  }
  // Consistency: every dropped row must be reproduced by the kept ones.
  Eigen::CompleteOrthogonalDecomposition<MatX> cod(Ar.transpose());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    if (std::binary_search(keep.begin(), keep.end(), static_cast<int>(i))) continue;
    const VecX coeff = cod.solve(A.row(i).transpose());
    const double scale = 1.0 + std::abs(b(i)) + br.cwiseAbs().maxCoeff();
    if (std::abs(coeff.dot(br) - b(i)) > 1e-9 * scale) return false;
  }
  A = Ar;
  b = br;
  return true;
}

struct IpmResult {
  VecX x, y, z, s;
  bool converged = false;
  int iterations = 0;
  double rp = 0.0, rd = 0.0, comp = 0.0;
};

inline double step_to_boundary(const VecX& v, const VecX& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  return alpha;
}

/// Solves the augmented Newton system of the interior point method
///   [ Q   A'  G'   ] [dx]   [r1]
///   [ A   0   0    ] [dy] = [r2]
///   [ G   0  -W^-1 ] [dz]   [r3]
/// where W = Z S^-1.
class KktSolver {
 public:
  KktSolver(const StandardForm& f, const VecX& w) {
    n_ = f.Q.rows();
    p_ = f.A.rows();
    m_ = f.G.rows();
    const auto N = n_ + p_ + m_;
    K_ = MatX::Zero(N, N);
    K_.topLeftCorner(n_, n_) = f.Q;
    K_.block(0, n_, n_, p_) = f.A.transpose();
    K_.block(0, n_ + p_, n_, m_) = f.G.transpose();
    K_.block(n_, 0, p_, n_) = f.A;
    K_.block(n_ + p_, 0, m_, n_) = f.G;
    for (Eigen::Index i = 0; i < m_; ++i) K_(n_ + p_ + i, n_ + p_ + i) = -1.0 / w(i);
    MatX Kreg = K_;
    const double delta = 1e-12 * (1.0 + f.Q.diagonal().cwiseAbs().maxCoeff());
    Kreg.topLeftCorner(n_, n_).diagonal().array() += delta;
    Kreg.block(n_, n_, p_, p_).diagonal().array() -= delta;
    lu_.compute(Kreg);
  }

  VecX solve(const VecX& rhs) const {
    VecX sol = lu_.solve(rhs);
    for (int it = 0; it < 3; ++it) {
      const VecX r = rhs - K_ * sol;
      sol += lu_.solve(r);
    }
    return sol;
  }

  Eigen::Index n() const { return n_; }
  Eigen::Index p() const { return p_; }
  Eigen::Index m() const { return m_; }

 private:
  Eigen::Index n_ = 0, p_ = 0, m_ = 0;
  MatX K_;
  Eigen::PartialPivLU<MatX> lu_;
};

inline IpmResult interior_point(const StandardForm& f, const Settings& settings) {
  const auto n = f.Q.rows();
  const auto p = f.A.rows();
  const auto m = f.G.rows();
  IpmResult res;

  // Initial point from the regularized least-squares problem.
  {
    KktSolver kkt(f, VecX::Ones(m));
    VecX rhs(n + p + m);
    rhs << -f.c, f.b, f.h;
    const VecX sol = kkt.solve(rhs);
    res.x = sol.head(n);
    res.y = sol.segment(n, p);
    res.z = sol.tail(m);
    res.s = -res.z;
    const double as = res.s.size() ? -res.s.minCoeff() : 0.0;
    const double az = res.z.size() ? -res.z.minCoeff() : 0.0;
    if (as >= 0.0) res.s.array() += 1.0 + as;
    if (az >= 0.0) res.z.array() += 1.0 + az;
  }

  const double scale_c = 1.0 + f.c.cwiseAbs().maxCoeff();
  const double scale_b = 1.0 + (p ? f.b.cwiseAbs().maxCoeff() : 0.0);
  const double scale_h = 1.0 + (m ? f.h.cwiseAbs().maxCoeff() : 0.0);
  const int cap = std::min(settings.max_iter, 500);
  int stall = 0;
  double best = std::numeric_limits<double>::infinity();

  for (int it = 0; it < cap; ++it) {
    res.iterations = it + 1;
    const VecX rd = f.Q * res.x + f.c + f.A.transpose() * res.y + f.G.transpose() * res.z;
    const VecX rp = f.A * res.x - f.b;
    const VecX rg = f.G * res.x + res.s - f.h;
    const double mu = m ? res.s.dot(res.z) / static_cast<double>(m) : 0.0;
    res.rd = rd.size() ? rd.cwiseAbs().maxCoeff() : 0.0;
    res.rp = std::max(rp.size() ? rp.cwiseAbs().maxCoeff() : 0.0,
                      rg.size() ? rg.cwiseAbs().maxCoeff() : 0.0);
    res.comp = m ? (res.s.array() * res.z.array()).maxCoeff() : 0.0;
    if (!res.x.allFinite() || !res.s.allFinite() || !res.z.allFinite()) return res;
    // Scale-aware stopping with an absolute floor at the requested tolerance.
    if (res.rd <= settings.tol && res.rp <= settings.tol && res.comp <= settings.tol) {
      res.converged = true;
      return res;
    }
    const double merit = res.rd / scale_c + res.rp / std::max(scale_b, scale_h) + mu;
    if (merit < 0.5 * best) {
      best = merit;
      stall = 0;
    } else if (++stall > 40) {
      return res;
    }
    if (std::max({res.x.cwiseAbs().maxCoeff(), m ? res.z.cwiseAbs().maxCoeff() : 0.0}) > 1e13)
      return res;

    const VecX w = res.z.cwiseQuotient(res.s);
    KktSolver kkt(f, w);

    auto direction = [&](const VecX& rc, VecX& dx, VecX& dy, VecX& dz, VecX& ds) {
      // rc is the complementarity residual target: Z ds + S dz = rc.
      // G dx + ds = -rg and Z ds + S dz = rc give G dx - W^-1 dz = -rg - rc / z.
      VecX rhs(n + p + m);
      rhs << -rd, -rp, -rg - rc.cwiseQuotient(res.z);
      const VecX sol = kkt.solve(rhs);
      dx = sol.head(n);
      dy = sol.segment(n, p);
      dz = sol.tail(m);
      ds = (rc - res.s.cwiseProduct(dz)).cwiseQuotient(res.z);
    };

    VecX dx, dy, dz, ds;
    const VecX sz = res.s.cwiseProduct(res.z);
    direction(-sz, dx, dy, dz, ds);
    double ap = std::min(step_to_boundary(res.s, ds), step_to_boundary(res.z, dz));
    double sigma = 0.0;
    if (m) {
      const double mu_aff =
          (res.s + ap * ds).dot(res.z + ap * dz) / static_cast<double>(m);
      sigma = std::pow(std::max(mu_aff, 0.0) / std::max(mu, 1e-300), 3.0);
      sigma = std::min(sigma, 1.0);
      const VecX rc = -sz - ds.cwiseProduct(dz) + VecX::Constant(m, sigma * mu);
      direction(rc, dx, dy, dz, ds);
    }
    double alpha = std::min(step_to_boundary(res.s, ds), step_to_boundary(res.z, dz));
    alpha = std::min(1.0, 0.99 * alpha);
    res.x += alpha * dx;
    res.y += alpha * dy;
    res.z += alpha * dz;
    res.s += alpha * ds;
  }
  return res;
}

}  // namespace detail

/// Solves the problem. Deterministic: identical inputs give identical outputs.
inline QpSolution solve(const QpProblem& problem, const Settings& settings = {}) {
  problem.validate();
  if (!(settings.tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tol must be positive");

  detail::StandardForm f = detail::to_standard(problem);
  QpSolution out;
  out.x = VecX::Zero(problem.num_vars());
  if (!detail::reduce_equalities(f.A, f.b)) {
    out.status = Status::Infeasible;
    return out;
  }

  auto finish = [&](const detail::IpmResult& r, double ridge) {
    out.x = r.x;
    out.iterations = r.iterations;
    out.regularization = ridge;
    out.objective = 0.5 * r.x.dot(problem.Q * r.x) + problem.c.dot(r.x);
    // Residuals against the original data.
    const VecX gx = f.G * r.x - f.h;
    const VecX ax = f.A * r.x - f.b;
    out.primal_residual = std::max(ax.size() ? ax.cwiseAbs().maxCoeff() : 0.0,
                                   gx.size() ? std::max(0.0, gx.maxCoeff()) : 0.0);
    const VecX rd = 0.5 * (problem.Q + problem.Q.transpose()) * r.x + problem.c +
                    f.A.transpose() * r.y + f.G.transpose() * r.z;
    out.dual_residual = rd.size() ? rd.cwiseAbs().maxCoeff() : 0.0;
    out.complementarity =
        gx.size() ? (r.z.array() * (-gx.array()).max(0.0)).maxCoeff() : 0.0;
    out.eq_multipliers = r.y;
    out.ineq_multipliers = r.z;
  };

  detail::IpmResult r = detail::interior_point(f, settings);
  if (r.converged) {
    finish(r, 0.0);
    out.status = Status::Optimal;
    return out;
  }

  // Retry with a small ridge on Q for semidefinite problems.
  constexpr double kRidge = 1e-10;
  detail::StandardForm fr = f;
  fr.Q.diagonal().array() += kRidge;
  detail::IpmResult rr = detail::interior_point(fr, settings);
  if (rr.converged) {
    finish(rr, kRidge);
    out.status = Status::Optimal;
    return out;
  }

  // Elastic phase-1: minimize total constraint violation.
  const auto n = f.Q.rows();
  const auto p = f.A.rows();
  const auto m = f.G.rows();
  detail::StandardForm e;
  const auto ne = n + 2 * p + m;
  e.Q = MatX::Zero(ne, ne);
  e.Q.topLeftCorner(n, n).diagonal().setConstant(1e-9);
  e.c = VecX::Zero(ne);
  e.c.tail(2 * p + m).setOnes();
  e.A = MatX::Zero(p, ne);
  e.A.leftCols(n) = f.A;
  e.A.block(0, n, p, p) = MatX::Identity(p, p);
  e.A.block(0, n + p, p, p) = -MatX::Identity(p, p);
  e.b = f.b;
  e.G = MatX::Zero(m + 2 * p + m, ne);
  e.h = VecX::Zero(m + 2 * p + m);
  e.G.topLeftCorner(m, n) = f.G;
  e.G.block(0, n + 2 * p, m, m) = -MatX::Identity(m, m);
  e.h.head(m) = f.h;
  e.G.bottomRightCorner(2 * p + m, 2 * p + m) = -MatX::Identity(2 * p + m, 2 * p + m);
  Settings es = settings;
  es.tol = std::max(settings.tol, 1e-9);
  const detail::IpmResult pr = detail::interior_point(e, es);
  const double violation = pr.x.size() ? pr.x.tail(2 * p + m).sum() : 0.0;
  if (pr.x.allFinite() && violation > 1e-6 * (1.0 + f.h.size() + f.b.size())) {
    out.status = Status::Infeasible;
    out.x = pr.x.head(n);
    out.primal_residual = violation;
    return out;
  }
  finish(r.x.allFinite() ? r : rr, 0.0);
  out.status = Status::MaxIterations;
  return out;
}

}  // namespace palmplan::qp
