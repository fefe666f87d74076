#pragma once

// Cuboid object geometry: faces, corners, edges and stable placements on a
// horizontal table at z = 0.

#include "palmplan/core_types.hpp"

#include <algorithm>
#include <vector>

namespace palmplan {

struct Face {
  Vec3 center;   // object frame
  Vec3 normal;   // outward unit normal
  Vec3 u, v;     // in-plane unit axes, u x v = normal
  double half_u = 0.0, half_v = 0.0;
};

struct Edge {
  Vec3 point;      // midpoint, object frame
  Vec3 direction;  // unit
  double length = 0.0;
  int corner_a = 0, corner_b = 0;
  int face_a = 0, face_b = 0;  // the two faces sharing this edge
};

/// Box-shaped object with the center of mass at its geometric center.
///
/// Face order: +x, -x, +y, -y, +z, -z. Corner i has coordinate signs taken from
/// bits 0, 1, 2 of i (set bit = positive half-extent).
class ObjectModel {
 public:
  ObjectModel() : ObjectModel(Vec3(0.09, 0.14, 0.10), 1.0) {}

  ObjectModel(const Vec3& extents, double mass) : extents_(extents), mass_(mass) {
    if (!(extents.minCoeff() > 0.0)) throw Error(ErrorCode::InvalidArgument, "extents must be positive");
    if (!(mass > 0.0)) throw Error(ErrorCode::InvalidArgument, "mass must be positive");
    build();
  }

  const Vec3& extents() const { return extents_; }
  Vec3 half_extents() const { return 0.5 * extents_; }
  double mass() const { return mass_; }

  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<Vec3>& corners() const { return corners_; }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Faces the object can rest on: those containing the projected center of mass.
  std::vector<int> stable_placements() const {
    std::vector<int> out;
    for (int f = 0; f < 6; ++f) {
      const Face& face = faces_[f];
      const Vec3 com_in_plane = -face.center;  // COM relative to face center
      if (std::abs(com_in_plane.dot(face.u)) <= face.half_u &&
          std::abs(com_in_plane.dot(face.v)) <= face.half_v)
        out.push_back(f);
    }
    return out;
  }

  /// Distance from the center of mass to a face plane.
  double face_height(int f) const { return faces_.at(f).center.dot(faces_.at(f).normal); }

  static int opposite_face(int f) { return f ^ 1; }

  static bool adjacent(int f, int g) { return f / 2 != g / 2; }

  /// Index of the edge shared by faces f and g, or -1.
  int shared_edge(int f, int g) const {
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const Edge& e = edges_[i];
      if ((e.face_a == f && e.face_b == g) || (e.face_a == g && e.face_b == f))
        return static_cast<int>(i);
    }
    return -1;
  }

  /// Corners lying on face f.
  std::vector<int> face_corners(int f) const {
    std::vector<int> out;
    for (int c = 0; c < 8; ++c)
      if (std::abs((corners_[c] - faces_[f].center).dot(faces_[f].normal)) < 1e-12) out.push_back(c);
    return out;
  }

  /// Edges bounding face f.
  std::vector<int> face_edges(int f) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < edges_.size(); ++i)
      if (edges_[i].face_a == f || edges_[i].face_b == f) out.push_back(static_cast<int>(i));
    return out;
  }

  /// Rotation taking the object to rest on face f with zero yaw: the face
  /// axes (u, v, n) map to world (x, -y, -z).
  Mat3 rest_rotation(int f) const {
    const Face& face = faces_.at(f);
    Mat3 obj, world;
    obj << face.u, face.v, face.normal;
    world << Vec3::UnitX(), -Vec3::UnitY(), -Vec3::UnitZ();
    return world * obj.transpose();
  }

 private:
  void build() {
    const Vec3 h = half_extents();
    for (int axis = 0; axis < 3; ++axis) {
      for (int sign : {1, -1}) {
        Face f;
        f.normal = Vec3::Zero();
        f.normal(axis) = sign;
        f.center = f.normal * h(axis);
        const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
        f.u = Vec3::Unit(a1);
        f.v = f.normal.cross(f.u);
        f.half_u = h(a1);
        f.half_v = h(a2);
        faces_.push_back(f);
      }
    }
    for (int i = 0; i < 8; ++i)
      corners_.emplace_back((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z());
    for (int i = 0; i < 8; ++i) {
      for (int bit = 0; bit < 3; ++bit) {
        const int j = i | (1 << bit);
        if (j == i) continue;
        Edge e;
        e.corner_a = i;
        e.corner_b = j;
        e.point = 0.5 * (corners_[i] + corners_[j]);
        e.direction = Vec3::Unit(bit);
        e.length = extents_(bit);
        // The two faces containing both corners.
        std::vector<int> fs;
        for (int f = 0; f < 6; ++f) {
          const auto& face = faces_[f];
          if (std::abs((corners_[i] - face.center).dot(face.normal)) < 1e-12 &&
              std::abs((corners_[j] - face.center).dot(face.normal)) < 1e-12)
            fs.push_back(f);
        }
        e.face_a = fs.at(0);
        e.face_b = fs.at(1);
        edges_.push_back(e);
      }
    }
  }

  Vec3 extents_;
  double mass_;
  std::vector<Face> faces_;
  std::vector<Vec3> corners_;
  std::vector<Edge> edges_;
};

// ---------------------------------------------------------------------------
// Placements

struct Placement {
  int face = 5;
  PlanarPose pose;
};

/// Object pose resting on `face` at the given planar pose.
inline Pose3 pose_from_placement(const ObjectModel& model, const Placement& p) {
  const Mat3 r = Eigen::AngleAxisd(p.pose.yaw, Vec3::UnitZ()).toRotationMatrix() * model.rest_rotation(p.face);
  return Pose3(Vec3(p.pose.x, p.pose.y, model.face_height(p.face)), r);
}

/// Face most aligned with the table (its outward normal closest to world -z).
inline int resting_face(const ObjectModel& model, const Pose3& pose) {
  int best = 0;
  double best_dot = -2.0;
  for (int f = 0; f < 6; ++f) {
    const double d = -pose.rotate(model.faces()[f].normal).z();
    if (d > best_dot + 1e-12) {
      best_dot = d;
      best = f;
    }
  }
  return best;
}

/// Projects a pose onto its nearest stable placement.
inline Placement placement_from_pose(const ObjectModel& model, const Pose3& pose) {
  Placement p;
  p.face = resting_face(model, pose);
  // Yaw of the rotation that best maps the rest orientation onto the pose.
  const Mat3 rel = pose.rotation() * model.rest_rotation(p.face).transpose();
  p.pose = {pose.position().x(), pose.position().y(), std::atan2(rel(1, 0) - rel(0, 1), rel(0, 0) + rel(1, 1))};
  return p;
}

/// True when the pose rests flat on a face: aligned normal and face on the table.
inline bool is_resting(const ObjectModel& model, const Pose3& pose, int face, double tol = 1e-6) {
  const Vec3 n = pose.rotate(model.faces()[face].normal);
  const double ang = angle_between(n, -Vec3::UnitZ());
  const double gap = pose.transform_point(model.faces()[face].center).z();
  return ang <= tol && std::abs(gap) <= tol;
}

/// Rotates a pose resting on `face` about one of that face's edges (which lies
/// on the table). Positive angles tip the object toward the other face sharing
/// the edge; at 90 degrees that face rests on the table.
inline Pose3 tip_about_edge(const ObjectModel& model, const Pose3& pose, int face, int edge, double angle) {
  const Edge& e = model.edges().at(edge);
  if (e.face_a != face && e.face_b != face) throw Error(ErrorCode::InvalidArgument, "edge not on the resting face");
  const int other = e.face_a == face ? e.face_b : e.face_a;
  Vec3 axis = pose.rotate(e.direction);
  if (axis.cross(pose.rotate(model.faces()[other].normal)).z() > 0.0) axis = -axis;
  const Vec3 pivot = pose.transform_point(e.point);
  const Mat3 r = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  return Pose3(pivot + r * (pose.position() - pivot), r * pose.rotation());
}

}  // namespace palmplan
