#pragma once

// Geometric and contact primitives shared by every palmplan module: rigid
// poses, wrenches, contact frames, grasp matrices, friction cones and the
// ellipsoidal limit surface of patch contacts.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace palmplan {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;

enum class ErrorCode {
  InvalidArgument,
  NotInCone,
  KinematicViolation,
  LinearizationPointInfeasible,
  InfeasibleFeatures,
  NoConstraint,
  Unreachable,
  OutOfWorkspace,
  PivotInfeasible,
  NoFeasibleSide,
  NoConsistentMode,
  ConfigError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotInCone: return "NotInCone";
    case ErrorCode::KinematicViolation: return "KinematicViolation";
    case ErrorCode::LinearizationPointInfeasible: return "LinearizationPointInfeasible";
    case ErrorCode::InfeasibleFeatures: return "InfeasibleFeatures";
    case ErrorCode::NoConstraint: return "NoConstraint";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::OutOfWorkspace: return "OutOfWorkspace";
    case ErrorCode::PivotInfeasible: return "PivotInfeasible";
    case ErrorCode::NoFeasibleSide: return "NoFeasibleSide";
    case ErrorCode::NoConsistentMode: return "NoConsistentMode";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// ---------------------------------------------------------------------------
// SO(3) helpers

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

/// Rotation vector -> unit quaternion.
inline Eigen::Quaterniond exp_so3(const Vec3& rotvec) {
  const double angle = rotvec.norm();
  if (angle < 1e-12) {
    Eigen::Quaterniond q(1.0, 0.5 * rotvec.x(), 0.5 * rotvec.y(), 0.5 * rotvec.z());
    return q.normalized();
  }
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, rotvec / angle));
}

/// Unit quaternion -> rotation vector with angle in [0, pi].
inline Vec3 log_so3(const Eigen::Quaterniond& q_in) {
  Eigen::Quaterniond q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v;
  const double angle = 2.0 * std::atan2(s, q.w());
  return v * (angle / s);
}

// ---------------------------------------------------------------------------

/// Rigid-body pose: position in meters and a unit quaternion kept normalized.
class Pose3 {
 public:
  Pose3() : position_(Vec3::Zero()), orientation_(Eigen::Quaterniond::Identity()) {}

  Pose3(const Vec3& position, const Eigen::Quaterniond& orientation)
      : position_(position), orientation_(orientation.normalized()) {
    if (!position_.allFinite() || !orientation_.coeffs().allFinite())
      throw Error(ErrorCode::InvalidArgument, "pose must be finite");
  }

  Pose3(const Vec3& position, const Mat3& rotation)
      : Pose3(position, Eigen::Quaterniond(rotation)) {}

  static Pose3 identity() { return Pose3(); }

  /// From (x, y, z, qw, qx, qy, qz).
  static Pose3 from_array(const std::array<double, 7>& a) {
    const Eigen::Quaterniond q(a[3], a[4], a[5], a[6]);
    if (q.norm() < 1e-12) throw Error(ErrorCode::InvalidArgument, "zero quaternion");
    return Pose3(Vec3(a[0], a[1], a[2]), q);
  }

  /// (x, y, z, qw, qx, qy, qz) with qw >= 0.
  std::array<double, 7> to_array() const {
    Eigen::Quaterniond q = orientation_;
    if (q.w() < 0.0) q.coeffs() *= -1.0;
    return {position_.x(), position_.y(), position_.z(), q.w(), q.x(), q.y(), q.z()};
  }

  const Vec3& position() const { return position_; }
  const Eigen::Quaterniond& orientation() const { return orientation_; }
  Mat3 rotation() const { return orientation_.toRotationMatrix(); }

  Vec3 transform_point(const Vec3& p) const { return position_ + orientation_ * p; }
  Vec3 rotate(const Vec3& v) const { return orientation_ * v; }

  Pose3 operator*(const Pose3& other) const {
    return Pose3(position_ + orientation_ * other.position_, orientation_ * other.orientation_);
  }

  Pose3 inverse() const {
    const Eigen::Quaterniond qi = orientation_.conjugate();
    return Pose3(-(qi * position_), qi);
  }

  /// Left perturbation: translate by dp in world, rotate by rotvec about the
  /// pose origin expressed in world axes.
  Pose3 perturbed(const Vec3& dp, const Vec3& rotvec) const {
    return Pose3(position_ + dp, exp_so3(rotvec) * orientation_);
  }

 private:
  Vec3 position_;
  Eigen::Quaterniond orientation_;
};

/// Geodesic angle between two orientations, in [0, pi].
/// Angle between two unit vectors, accurate near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

inline double rotation_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  // atan2 form keeps full precision for nearly equal rotations.
  const Eigen::Quaterniond r = a.normalized().conjugate() * b.normalized();
  return 2.0 * std::atan2(r.vec().norm(), std::abs(r.w()));
}

struct PlanarPose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a - kPi;
}

// ---------------------------------------------------------------------------

/// Force and torque pair; components are always finite.
class Wrench {
 public:
  Wrench() : force_(Vec3::Zero()), torque_(Vec3::Zero()) {}
  Wrench(const Vec3& force, const Vec3& torque) : force_(force), torque_(torque) { check(); }
  explicit Wrench(const Vec6& w) : force_(w.head<3>()), torque_(w.tail<3>()) { check(); }

  const Vec3& force() const { return force_; }
  const Vec3& torque() const { return torque_; }

  Vec6 vector() const {
    Vec6 w;
    w << force_, torque_;
    return w;
  }

  // Contact-frame split: axis 0 is the inward normal, axes 1-2 tangential.
  double normal() const { return force_.x(); }
  Vec2 tangential() const { return force_.tail<2>(); }

  Wrench operator+(const Wrench& o) const { return Wrench(force_ + o.force_, torque_ + o.torque_); }
  Wrench operator-(const Wrench& o) const { return Wrench(force_ - o.force_, torque_ - o.torque_); }
  Wrench operator*(double s) const { return Wrench(force_ * s, torque_ * s); }

 private:
  void check() const {
    if (!force_.allFinite() || !torque_.allFinite())
      throw Error(ErrorCode::InvalidArgument, "wrench must be finite");
  }

  Vec3 force_;
  Vec3 torque_;
};

// ---------------------------------------------------------------------------

struct PatchModel {
  double characteristic_radius = 0.04;
  double ls_coefficient = 0.6;

  PatchModel() = default;
  PatchModel(double radius, double coefficient = 0.6)
      : characteristic_radius(radius), ls_coefficient(coefficient) {
    if (!(radius > 0.0) || !(coefficient > 0.0))
      throw Error(ErrorCode::InvalidArgument, "patch parameters must be positive");
  }

  /// Torque-to-force ratio of the limit-surface ellipsoid (meters).
  double torque_radius() const { return ls_coefficient * characteristic_radius; }
};

enum class ContactKind { Point, Patch };

/// Contact frame in world: origin at the contact, axis 0 = inward normal.
struct Contact {
  Pose3 frame;
  ContactKind kind = ContactKind::Point;
  double mu = 0.5;
  std::optional<PatchModel> patch;

  Contact() = default;
  Contact(const Pose3& f, ContactKind k, double friction, std::optional<PatchModel> p = std::nullopt)
      : frame(f), kind(k), mu(friction), patch(p) {
    if (!(mu > 0.0)) throw Error(ErrorCode::InvalidArgument, "mu must be positive");
    if (kind == ContactKind::Patch && !patch)
      throw Error(ErrorCode::InvalidArgument, "patch contact requires a patch model");
  }

  Vec3 normal() const { return frame.rotate(Vec3::UnitX()); }
};

// ---------------------------------------------------------------------------

/// 6x6 grasp matrix G with G^T w = wrench about the reference origin
/// (reference axes) equivalent to the contact-frame wrench w.
inline Mat6 grasp_matrix(const Contact& contact, const Pose3& reference) {
  const Pose3 rel = reference.inverse() * contact.frame;
  const Mat3 r = rel.rotation();
  Mat6 gt = Mat6::Zero();
  gt.topLeftCorner<3, 3>() = r;
  gt.bottomLeftCorner<3, 3>() = skew(rel.position()) * r;
  gt.bottomRightCorner<3, 3>() = r;
  return gt.transpose();
}

/// Tolerance used by membership tests so that points produced exactly on a
/// boundary by floating-point arithmetic still count as inside.
inline constexpr double kMembershipTol = 1e-12;

inline bool limit_surface_contains(const PatchModel& patch, double mu, double fn,
                                   const Vec2& ft, double tau_z) {
  if (fn < -kMembershipTol) return false;
  const double scale = std::max(1.0, std::abs(fn));
  if (fn <= kMembershipTol * scale) {
    return ft.norm() <= kMembershipTol * scale && std::abs(tau_z) <= kMembershipTol * scale;
  }
  const double a = ft.norm() / (mu * fn);
  const double b = tau_z / (patch.torque_radius() * mu * fn);
  return a * a + b * b <= 1.0 + kMembershipTol;
}

/// Coulomb membership of a contact-frame wrench. Patch contacts also bound the
/// tangential torques by the pressure-center constraint |tau_t| <= r f_n.
inline bool cone_contains(const Contact& contact, const Wrench& w) {
  const double fn = w.normal();
  const Vec2 ft = w.tangential();
  const double scale = std::max(1.0, w.force().norm());
  if (fn < -kMembershipTol * scale) return false;
  if (contact.kind == ContactKind::Point) {
    if (w.torque().norm() > kMembershipTol * scale) return false;
    return ft.norm() <= contact.mu * fn + kMembershipTol * scale;
  }
  const PatchModel& p = *contact.patch;
  const double cop = p.characteristic_radius * std::max(fn, 0.0) + kMembershipTol * scale;
  if (std::abs(w.torque().y()) > cop || std::abs(w.torque().z()) > cop) return false;
  return limit_surface_contains(p, contact.mu, std::max(fn, 0.0), ft, w.torque().x());
}

/// Inscribed polyhedral friction cone.
struct FrictionConePoly {
  double mu = 0.0;
  int num_facets = 0;
  std::vector<Vec3> edge_directions;  // contact frame, unit norm
};

inline FrictionConePoly polyhedral_cone(double mu, int k = 8) {
  if (k < 4) throw Error(ErrorCode::InvalidArgument, "polyhedral cone needs k >= 4");
  if (!(mu > 0.0)) throw Error(ErrorCode::InvalidArgument, "mu must be positive");
  FrictionConePoly cone{mu, k, {}};
  cone.edge_directions.reserve(static_cast<std::size_t>(k));
  const double inv = 1.0 / std::sqrt(1.0 + mu * mu);
  for (int j = 0; j < k; ++j) {
    const double a = 2.0 * kPi * j / k;
    cone.edge_directions.emplace_back(inv, mu * inv * std::cos(a), mu * inv * std::sin(a));
  }
  return cone;
}

}  // namespace palmplan
