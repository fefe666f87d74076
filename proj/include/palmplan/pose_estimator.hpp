#pragma once

// Tactile object pose estimator. Sensed corner points and edge lines (in palm
// frames) plus the placement implied by the active primitive constrain the
// object pose; the estimate is the constrained pose closest to the prior.

#include "palmplan/mechanics.hpp"

#include <optional>
#include <vector>

namespace palmplan {

enum class FeatureKind { Point, Line };
enum class PalmSide { Left, Right };

struct TactileFeature {
  FeatureKind kind = FeatureKind::Point;
  PalmSide palm = PalmSide::Left;
  Vec3 point = Vec3::Zero();              // palm frame
  Vec3 direction = Vec3::UnitX();         // palm frame, lines only
  int target_id = 0;                      // corner (point) or edge (line) index

  void validate(const ObjectModel& m) const {
    if (!point.allFinite() || !direction.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite feature");
    if (kind == FeatureKind::Point) {
      if (target_id < 0 || target_id >= static_cast<int>(m.corners().size()))
        throw Error(ErrorCode::InvalidArgument, "feature corner id out of range");
    } else {
      if (target_id < 0 || target_id >= static_cast<int>(m.edges().size()))
        throw Error(ErrorCode::InvalidArgument, "feature edge id out of range");
      if (std::abs(direction.norm() - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "line direction must be unit");
    }
  }
};

/// Weighted translation plus great-circle rotation distance.
inline double d_ts(const Pose3& a, const Pose3& b, double w_pos = 1.0, double w_rot = 0.1) {
  if (!(w_pos > 0.0 && w_rot > 0.0)) throw Error(ErrorCode::InvalidArgument, "weights must be positive");
  return w_pos * (a.position() - b.position()).norm() + w_rot * rotation_angle(a.orientation(), b.orientation());
}

struct EstimatorSettings {
  double w_pos = 1.0;
  double w_rot = 0.1;
  double penalty = 1e6;              // sensed features
  double placement_penalty = 1e10;   // table placement, trusted over noisy features
  int max_iter = 50;
  double step_tol = 1e-10;
  double infeasible_tol = 1e-4;  // feature residual beyond this means a wrong correspondence
};

/// Table line a pivoting object's edge must stay on. Derived from the prior when absent.
struct PivotLine {
  int edge = -1;
  Vec3 point = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();
};

struct PoseEstimate {
  Pose3 pose;
  double residual = 0.0;  // d_TS to the prior
  std::vector<double> feature_residuals;
  double placement_residual = 0.0;
  int iterations = 0;
};

namespace detail {

/// Inverse of the left Jacobian of SO(3).
inline Mat3 left_jacobian_inv(const Vec3& phi) {
  const double t = phi.norm();
  const Mat3 k = skew(phi);
  if (t < 1e-8) return Mat3::Identity() - 0.5 * k + k * k / 12.0;
  const double coef = 1.0 / (t * t) - (1.0 + std::cos(t)) / (2.0 * t * std::sin(t));
  return Mat3::Identity() - 0.5 * k + coef * k * k;
}

struct Residual {
  VecX r;
  MatX J;  // wrt [dp, dtheta] with left rotation about the object origin
};

/// Collinearity of an object line (point e, direction u, both world) with a
/// fixed world line (point a, unit direction d).
inline Residual line_residual(const Vec3& origin, const Vec3& e, const Vec3& u, const Vec3& a, const Vec3& d) {
  Residual out;
  out.r.resize(6);
  out.J.resize(6, 6);
  const Mat3 proj = Mat3::Identity() - d * d.transpose();
  out.r.head<3>() = proj * (e - a);
  out.r.tail<3>() = u.cross(d);
  out.J.block<3, 3>(0, 0) = proj;
  out.J.block<3, 3>(0, 3) = -proj * skew(e - origin);
  out.J.block<3, 3>(3, 0).setZero();
  out.J.block<3, 3>(3, 3) = skew(d) * skew(u);
  return out;
}

}  // namespace detail

class PoseEstimator {
 public:
  PoseEstimator(const ObjectModel& model, EstimatorSettings cfg = {}) : model_(model), cfg_(cfg) {}

  const EstimatorSettings& settings() const { return cfg_; }

  PoseEstimate estimate(const Pose3& prior, const std::vector<TactileFeature>& features,
                        const std::pair<Pose3, Pose3>& palms, Primitive primitive,
                        std::optional<PivotLine> pivot = std::nullopt) const {
    for (const auto& f : features) f.validate(model_);
    const bool placement = primitive != Primitive::Grasp;
    if (features.empty() && !placement) throw Error(ErrorCode::NoConstraint, "no features and no placement constraint");

    // Fixed data: sensed features in world coordinates, placement target.
    struct WorldFeature {
      FeatureKind kind;
      Vec3 point, direction;
      int target;
    };
    std::vector<WorldFeature> wf;
    for (const auto& f : features) {
      const Pose3& palm = f.palm == PalmSide::Left ? palms.first : palms.second;
      wf.push_back({f.kind, palm.transform_point(f.point), palm.rotate(f.direction).normalized(), f.target_id});
    }
    const int rest_face = resting_face(model_, prior);
    if (primitive == Primitive::Pivot && !pivot) pivot = pivot_line_from(prior);

    auto residuals = [&](const Pose3& pose, bool with_prior) {
      std::vector<detail::Residual> out;
      const Vec3 origin = pose.position();
      if (with_prior) {
        detail::Residual pr;
        pr.r.resize(6);
        pr.J = MatX::Zero(6, 6);
        const Vec3 phi = log_so3(pose.orientation() * prior.orientation().conjugate());
        pr.r << cfg_.w_pos * (pose.position() - prior.position()), cfg_.w_rot * phi;
        pr.J.block<3, 3>(0, 0) = cfg_.w_pos * Mat3::Identity();
        pr.J.block<3, 3>(3, 3) = cfg_.w_rot * detail::left_jacobian_inv(phi);
        out.push_back(pr);
      }
      for (const auto& f : wf) {
        if (f.kind == FeatureKind::Point) {
          detail::Residual res;
          const Vec3 c = pose.transform_point(model_.corners()[f.target]);
          res.r = c - f.point;
          res.J.resize(3, 6);
          res.J << Mat3::Identity(), -skew(c - origin);
          out.push_back(res);
        } else {
          const Edge& e = model_.edges()[f.target];
          out.push_back(detail::line_residual(origin, pose.transform_point(e.point), pose.rotate(e.direction),
                                              f.point, f.direction));
        }
      }
      if (placement) out.push_back(placement_residual(pose, primitive, rest_face, pivot));
      return out;
    };

    auto cost = [&](const Pose3& pose) {
      double c = 0.0;
      const auto rs = residuals(pose, true);
      for (std::size_t i = 0; i < rs.size(); ++i) c += weight(i, rs.size(), placement) * rs[i].r.squaredNorm();
      return c;
    };

    Pose3 pose = prior;
    PoseEstimate out;
    double current = cost(pose);
    for (int it = 0; it < cfg_.max_iter; ++it) {
      out.iterations = it + 1;
      const auto rs = residuals(pose, true);
      Mat6 h = Mat6::Zero();
      Vec6 g = Vec6::Zero();
      for (std::size_t i = 0; i < rs.size(); ++i) {
        const double w = weight(i, rs.size(), placement);
        h += w * rs[i].J.transpose() * rs[i].J;
        g += w * rs[i].J.transpose() * rs[i].r;
      }
      h.diagonal().array() += 1e-12 * (1.0 + h.diagonal().maxCoeff());
      Vec6 dx = -h.ldlt().solve(g);
      // Backtrack on the penalized cost.
      double step = 1.0;
      Pose3 trial = pose;
      double trial_cost = current;
      for (int k = 0; k < 30; ++k) {
        trial = pose.perturbed(step * dx.head<3>(), step * dx.tail<3>());
        trial_cost = cost(trial);
        if (trial_cost <= current) break;
        step *= 0.5;
      }
      if (trial_cost > current) break;
      pose = trial;
      current = trial_cost;
      if (step * dx.norm() < cfg_.step_tol) break;
    }

    out.pose = pose;
    out.residual = d_ts(pose, prior, cfg_.w_pos, cfg_.w_rot);
    const auto rs = residuals(pose, false);
    double worst = 0.0;
    for (std::size_t i = 0; i < wf.size(); ++i) {
      out.feature_residuals.push_back(rs[i].r.norm());
      worst = std::max(worst, rs[i].r.norm());
    }
    if (placement) {
      out.placement_residual = rs.back().r.norm();
      worst = std::max(worst, out.placement_residual);
    }
    if (worst > cfg_.infeasible_tol)
      throw Error(ErrorCode::InfeasibleFeatures, "feature residual " + std::to_string(worst));
    return out;
  }

  /// Edge of the prior closest to the table, with its projection on the table.
  PivotLine pivot_line_from(const Pose3& pose) const {
    PivotLine line;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < model_.edges().size(); ++i) {
      const Edge& e = model_.edges()[i];
      const double z = std::max(pose.transform_point(model_.corners()[e.corner_a]).z(),
                                pose.transform_point(model_.corners()[e.corner_b]).z());
      if (z < best - 1e-12) {
        best = z;
        line.edge = static_cast<int>(i);
      }
    }
    const Edge& e = model_.edges()[line.edge];
    line.point = pose.transform_point(e.point);
    line.point.z() = 0.0;
    line.direction = pose.rotate(e.direction);
    line.direction.z() = 0.0;
    line.direction.normalize();
    return line;
  }

 private:
  // Residual order: prior, features, then the placement term when present.
  double weight(std::size_t i, std::size_t count, bool placement) const {
    if (i == 0) return 1.0;
    return placement && i + 1 == count ? cfg_.placement_penalty : cfg_.penalty;
  }

  detail::Residual placement_residual(const Pose3& pose, Primitive primitive, int rest_face,
                                      const std::optional<PivotLine>& pivot) const {
    const Vec3 origin = pose.position();
    if (primitive == Primitive::Pivot) {
      const Edge& e = model_.edges().at(pivot->edge);
      return detail::line_residual(origin, pose.transform_point(e.point), pose.rotate(e.direction), pivot->point,
                                   pivot->direction);
    }
    // Resting face flat on the table: its normal points down and its centre is at z = 0.
    const Face& face = model_.faces()[rest_face];
    const Vec3 n = pose.rotate(face.normal);
    const Vec3 c = pose.transform_point(face.center);
    detail::Residual res;
    res.r.resize(3);
    res.r << n.x(), n.y(), c.z();
    res.J = MatX::Zero(3, 6);
    const Mat3 dn = -skew(n);
    res.J.block<2, 3>(0, 3) = dn.topRows<2>();
    res.J(2, 2) = 1.0;
    res.J.block<1, 3>(2, 3) = -skew(c - origin).row(2);
    return res;
  }

  ObjectModel model_;
  EstimatorSettings cfg_;
};

inline PoseEstimate estimate(const Pose3& prior, const std::vector<TactileFeature>& features,
                             const std::pair<Pose3, Pose3>& palms, const ObjectModel& model, Primitive primitive,
                             const EstimatorSettings& cfg = {}) {
  return PoseEstimator(model, cfg).estimate(prior, features, palms, primitive);
}

/// Exact features of a given object pose, for tests and synthetic sensing.
inline TactileFeature corner_feature(const ObjectModel& m, const Pose3& object, const Pose3& palm, PalmSide side,
                                     int corner) {
  TactileFeature f;
  f.kind = FeatureKind::Point;
  f.palm = side;
  f.target_id = corner;
  f.point = palm.inverse().transform_point(object.transform_point(m.corners().at(corner)));
  return f;
}

inline TactileFeature edge_feature(const ObjectModel& m, const Pose3& object, const Pose3& palm, PalmSide side,
                                   int edge) {
  TactileFeature f;
  f.kind = FeatureKind::Line;
  f.palm = side;
  f.target_id = edge;
  const Pose3 inv = palm.inverse();
  f.point = inv.transform_point(object.transform_point(m.edges().at(edge).point));
  f.direction = inv.rotate(object.rotate(m.edges().at(edge).direction));
  return f;
}

}  // namespace palmplan
