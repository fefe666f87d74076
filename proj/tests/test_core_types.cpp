#include "palmplan/core_types.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace palmplan;

namespace {

Eigen::Quaterniond random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

Vec3 random_vec(std::mt19937_64& rng, double s = 1.0) {
  std::uniform_real_distribution<double> u(-s, s);
  return Vec3(u(rng), u(rng), u(rng));
}

Wrench world_wrench(const Contact& c, const Wrench& w, const Pose3& ref = Pose3()) {
  return Wrench(grasp_matrix(c, ref).transpose() * w.vector());
}

}  // namespace

TEST(Pose3, NormalizesAndComposes) {
  const Pose3 p(Vec3(1, 2, 3), Eigen::Quaterniond(2.0, 0.0, 0.0, 0.0));
  EXPECT_NEAR(p.orientation().norm(), 1.0, 1e-12);

  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Pose3 a(random_vec(rng), random_quat(rng));
    const Pose3 b(random_vec(rng), random_quat(rng));
    const Pose3 c(random_vec(rng), random_quat(rng));
    const Pose3 ab_c = (a * b) * c;
    const Pose3 a_bc = a * (b * c);
    EXPECT_LT((ab_c.position() - a_bc.position()).norm(), 1e-9);
    EXPECT_LT(rotation_angle(ab_c.orientation(), a_bc.orientation()), 1e-7);
    const Pose3 id = a * a.inverse();
    EXPECT_LT(id.position().norm(), 1e-9);
    EXPECT_NEAR(std::abs(id.orientation().w()), 1.0, 1e-9);
    EXPECT_NEAR((a * b).orientation().norm(), 1.0, 1e-9);
  }
}

TEST(Pose3, ArrayRoundTripUsesWxyz) {
  const Pose3 p = Pose3::from_array({0.1, 0.2, 0.3, 0.0, 0.0, 0.0, 1.0});
  EXPECT_NEAR((p.rotate(Vec3::UnitX()) - Vec3(-1, 0, 0)).norm(), 0.0, 1e-12);
  const auto a = p.to_array();
  EXPECT_DOUBLE_EQ(a[0], 0.1);
  EXPECT_NEAR(a[6], 1.0, 1e-12);
}

TEST(So3, ExpLogRoundTrip) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    Vec3 v = random_vec(rng, 1.5);
    EXPECT_LT((log_so3(exp_so3(v)) - v).norm(), 1e-10);
  }
}

TEST(Wrench, RejectsNonFinite) {
  EXPECT_THROW(Wrench(Vec3(std::nan(""), 0, 0), Vec3::Zero()), Error);
}

TEST(GraspMatrix, IdentityFrame) {
  const Contact c(Pose3(), ContactKind::Point, 0.5);
  const Wrench w = world_wrench(c, Wrench(Vec3::UnitZ(), Vec3::Zero()));
  EXPECT_LT((w.force() - Vec3::UnitZ()).norm(), 1e-15);
  EXPECT_LT(w.torque().norm(), 1e-15);
}

TEST(GraspMatrix, OffsetContactProducesCrossProductTorque) {
  const Contact c(Pose3(Vec3(1, 0, 0), Eigen::Quaterniond::Identity()), ContactKind::Point, 0.5);
  const Wrench w = world_wrench(c, Wrench(Vec3(0, 0, 1), Vec3::Zero()));
  EXPECT_LT((w.force() - Vec3(0, 0, 1)).norm(), 1e-15);
  EXPECT_LT((w.torque() - Vec3(0, -1, 0)).norm(), 1e-15);
}

TEST(GraspMatrix, RotatedFrameRotatesForce) {
  const Eigen::Quaterniond q(Eigen::AngleAxisd(kPi / 2, Vec3::UnitZ()));
  const Contact c(Pose3(Vec3::Zero(), q), ContactKind::Point, 0.5);
  const Wrench w = world_wrench(c, Wrench(Vec3(1, 0, 0), Vec3::Zero()));
  // Oracle: rotate the contact axis 0 into the world.
  EXPECT_LT((w.force() - q * Vec3::UnitX()).norm(), 1e-12);
}

TEST(GraspMatrix, VirtualWorkInvariance) {
  // f_world . v_world == f_contact . v_contact for the paired twist transform.
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Pose3 ref(random_vec(rng), random_quat(rng));
    const Contact c(Pose3(random_vec(rng), random_quat(rng)), ContactKind::Patch, 0.5,
                    PatchModel(0.05));
    const Vec6 wc = (Vec6() << random_vec(rng), random_vec(rng)).finished();
    const Vec6 ww = grasp_matrix(c, ref).transpose() * wc;
    // Reference twist (v at reference origin, omega), reference axes.
    const Vec3 v_ref = random_vec(rng), omega_ref = random_vec(rng);
    const Pose3 rel = ref.inverse() * c.frame;
    const Mat3 r = rel.rotation();
    const Vec3 v_contact = r.transpose() * (v_ref + omega_ref.cross(rel.position()));
    const Vec3 w_contact = r.transpose() * omega_ref;
    const double p_world = ww.head<3>().dot(v_ref) + ww.tail<3>().dot(omega_ref);
    const double p_contact = wc.head<3>().dot(v_contact) + wc.tail<3>().dot(w_contact);
    EXPECT_NEAR(p_world, p_contact, 1e-9);
  }
}

TEST(ConeContains, PointContactExamples) {
  const Contact c(Pose3(), ContactKind::Point, 0.5);
  EXPECT_TRUE(cone_contains(c, Wrench(Vec3(1, 0, 0), Vec3::Zero())));
  EXPECT_TRUE(cone_contains(c, Wrench(Vec3(1, 0.5, 0), Vec3::Zero())));
  EXPECT_FALSE(cone_contains(c, Wrench(Vec3(1, 0.51, 0), Vec3::Zero())));
  EXPECT_FALSE(cone_contains(c, Wrench(Vec3(-0.1, 0, 0), Vec3::Zero())));
  // Point contacts carry no torque.
  EXPECT_FALSE(cone_contains(c, Wrench(Vec3(1, 0, 0), Vec3(0.01, 0, 0))));
}

TEST(LimitSurface, Examples) {
  const PatchModel patch(0.05, 0.6);
  EXPECT_TRUE(limit_surface_contains(patch, 0.5, 1.0, Vec2::Zero(), 0.0));
  EXPECT_TRUE(limit_surface_contains(patch, 0.5, 1.0, Vec2(0.5, 0.0), 0.0));
  // Boundary torque at f_t = 0.3: tau = c r mu fn sqrt(1 - 0.36).
  const double tau_boundary = 0.6 * 0.05 * 0.5 * 1.0 * std::sqrt(1.0 - 0.36);
  EXPECT_TRUE(limit_surface_contains(patch, 0.5, 1.0, Vec2(0.3, 0.0), tau_boundary));
  // Direct formula evaluation of the torque giving LHS = 1.0001.
  const double tau_out = 0.6 * 0.05 * 0.5 * std::sqrt(1.0001 - 0.36);
  EXPECT_FALSE(limit_surface_contains(patch, 0.5, 1.0, Vec2(0.3, 0.0), tau_out));
  EXPECT_TRUE(limit_surface_contains(patch, 0.5, 0.0, Vec2::Zero(), 0.0));
  EXPECT_FALSE(limit_surface_contains(patch, 0.5, 0.0, Vec2(1e-3, 0.0), 0.0));
}

TEST(LimitSurface, ZeroTorqueReducesToCoulomb) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  const PatchModel patch(0.03);
  for (int i = 0; i < 2000; ++i) {
    const double mu = 0.1 + u(rng), fn = u(rng);
    const Vec2 ft(u(rng) - 1.0, u(rng) - 1.0);
    EXPECT_EQ(limit_surface_contains(patch, mu, fn, ft, 0.0), ft.norm() <= mu * fn + 1e-12)
        << "mu=" << mu << " fn=" << fn;
  }
}

TEST(PolyhedralCone, FourFacetClosedForm) {
  const auto cone = polyhedral_cone(1.0, 4);
  const double s = 1.0 / std::sqrt(2.0);
  const std::vector<Vec3> expected = {{s, s, 0}, {s, 0, s}, {s, -s, 0}, {s, 0, -s}};
  ASSERT_EQ(cone.edge_directions.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_LT((cone.edge_directions[i] - expected[i]).norm(), 1e-15);
}

TEST(PolyhedralCone, RejectsTooFewFacets) {
  EXPECT_THROW(polyhedral_cone(0.5, 3), Error);
  EXPECT_THROW(polyhedral_cone(0.0, 8), Error);
}

TEST(PolyhedralCone, EdgesLieOnBoundary) {
  for (double mu : {0.1, 0.5, 1.3}) {
    for (int k : {4, 8, 16}) {
      const auto cone = polyhedral_cone(mu, k);
      const Contact c(Pose3(), ContactKind::Point, mu);
      for (const auto& d : cone.edge_directions) {
        EXPECT_NEAR(d.norm(), 1.0, 1e-12);
        EXPECT_GT(d.x(), 0.0);
        EXPECT_NEAR(d.tail<2>().norm(), mu * d.x(), 1e-9);
        EXPECT_TRUE(cone_contains(c, Wrench(d, Vec3::Zero())));
      }
    }
  }
}

TEST(PolyhedralCone, InscriptionProperty) {
  // 10^4 random conic combinations of polyhedral edges stay in the exact cone.
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> mu_dist(0.1, 2.0);
  std::exponential_distribution<double> weight(1.0);
  for (int k : {4, 8, 16}) {
    for (int trial = 0; trial < 10000; ++trial) {
      const double mu = mu_dist(rng);
      const auto cone = polyhedral_cone(mu, k);
      Vec3 f = Vec3::Zero();
      for (const auto& d : cone.edge_directions) f += weight(rng) * d;
      ASSERT_TRUE(cone_contains(Contact(Pose3(), ContactKind::Point, mu), Wrench(f, Vec3::Zero())));
    }
  }
}
