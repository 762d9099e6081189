#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "quad_mpc/leg_kinematics.hpp"
#include "quad_mpc/testing/oracles.hpp"

using namespace quad_mpc;

namespace {

const LegGeometry kGeom = LegGeometry::from_robot(RobotParams{});

Vec3 fk(double a, double b, double c) {
  JointState js;
  js.q = Vec3(a, b, c);
  return leg_fk(js, kGeom);
}

}  // namespace

TEST(Raibert, ZeroFeedbackWhenTrackingVelocity) {
  const Vec3 p = raibert_footstep(Vec3(0.3, 0.088, 0.2), Vec3(0.5, 0, 0), Vec3(0.5, 0, 0), 0.1, 0.2, 9.81);
  EXPECT_LT((p - Vec3(0.325, 0.088, 0.0)).norm(), 1e-15);
}

TEST(Raibert, StandingLandsUnderHip) {
  const Vec3 p = raibert_footstep(Vec3(0.15, -0.044, 0.2), Vec3::Zero(), Vec3::Zero(), 0.1, 0.2, 9.81);
  EXPECT_EQ(p, Vec3(0.15, -0.044, 0.0));
}

TEST(Raibert, VelocityErrorOffset) {
  const Vec3 hip(0, 0, 0.2);
  const Vec3 a = raibert_footstep(hip, Vec3(0.6, 0, 0), Vec3(0.5, 0, 0), 0.1, 0.2, 9.81);
  const Vec3 b = raibert_footstep(hip, Vec3(0.6, 0, 0), Vec3(0.6, 0, 0), 0.1, 0.2, 9.81);
  EXPECT_NEAR(a.x() - b.x(), 0.014278, 1e-6);
  EXPECT_NEAR(std::sqrt(0.2 / 9.81), 0.14278, 1e-5);
}

TEST(Raibert, AffineInVelocities) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (int i = 0; i < 100; ++i) {
    const Vec3 hip(n(rng), n(rng), 0.2), vc(n(rng), n(rng), 0), vr(n(rng), n(rng), 0);
    Vec3 ground = hip;
    ground.z() = 0;
    const Vec3 d1 = raibert_footstep(hip, vc, vr, 0.1, 0.2, 9.81) - ground;
    const Vec3 d2 = raibert_footstep(hip, 2 * vc, 2 * vr, 0.1, 0.2, 9.81) - ground;
    EXPECT_LT((d2 - 2 * d1).norm(), 1e-14);
  }
}

TEST(SwingTrajectory, StartPoint) {
  const SwingPlan plan{Vec3(0.1, 0.05, 0), Vec3(0.2, 0.06, 0), 0.08, 0.18};
  const SwingSample s = swing_trajectory(plan, 0.0);
  EXPECT_EQ(s.pos, plan.p_start);
  EXPECT_EQ(s.vel.x(), 0.0);
  EXPECT_EQ(s.vel.y(), 0.0);
}

TEST(SwingTrajectory, EndPoint) {
  const SwingPlan plan{Vec3(0.1, 0.05, 0), Vec3(0.2, 0.06, 0), 0.08, 0.18};
  const SwingSample s = swing_trajectory(plan, 1.0);
  EXPECT_LT((s.pos - plan.p_end).norm(), 1e-15);
  EXPECT_EQ(s.pos.z(), 0.0);
  EXPECT_LT(s.vel.norm(), 1e-15);
}

TEST(SwingTrajectory, MidpointAtApex) {
  const SwingPlan plan{Vec3(0.1, 0.05, 0), Vec3(0.2, 0.07, 0), 0.08, 0.18};
  const SwingSample s = swing_trajectory(plan, 0.5);
  EXPECT_EQ(s.pos.z(), 0.08);
  EXPECT_LT((s.pos.head<2>() - 0.5 * (plan.p_start + plan.p_end).head<2>()).norm(), 1e-15);
}

TEST(SwingTrajectory, ContinuouslyDifferentiableAtApex) {
  const SwingPlan plan{Vec3(0.1, 0.05, 0), Vec3(0.3, -0.02, 0), 0.08, 0.18};
  const double e = 1e-12;
  const SwingSample l = swing_trajectory(plan, 0.5 - e), r = swing_trajectory(plan, 0.5 + e);
  EXPECT_LT((l.vel - r.vel).norm(), 1e-9);
}

TEST(SwingTrajectory, VelocityIsTimeDerivative) {
  const SwingPlan plan{Vec3(0.1, 0.05, 0), Vec3(0.3, -0.02, 0), 0.08, 0.18};
  for (double s = 0.01; s < 0.99; s += 0.03) {
    const double h = 1e-6;
    const Vec3 fd = (swing_trajectory(plan, s + h).pos - swing_trajectory(plan, s - h).pos) / (2 * h * plan.duration);
    EXPECT_LT((fd - swing_trajectory(plan, s).vel).norm(), 1e-6) << s;
  }
}

TEST(SwingTrajectory, PhaseOutOfRange) {
  const SwingPlan plan;
  EXPECT_THROW(swing_trajectory(plan, -0.01), PhaseOutOfRange);
  EXPECT_THROW(swing_trajectory(plan, 1.01), PhaseOutOfRange);
  EXPECT_THROW(swing_trajectory(plan, std::nan("")), PhaseOutOfRange);
}

TEST(LegFk, StraightDown) { EXPECT_LT((fk(0, 0, 0) - Vec3(0, 0, -0.28)).norm(), 1e-15); }

TEST(LegFk, HipPitchedForward) { EXPECT_LT((fk(0, std::numbers::pi / 2, 0) - Vec3(0.28, 0, 0)).norm(), 1e-15); }

TEST(LegFk, AbductedSideways) { EXPECT_LT((fk(std::numbers::pi / 2, 0, 0) - Vec3(0, 0.28, 0)).norm(), 1e-15); }

TEST(LegIk, JustOutOfReachThrows) {
  EXPECT_THROW(leg_ik(Vec3(0, 0, -0.28 - 1e-6), kGeom), Unreachable);
  EXPECT_THROW(leg_ik(Vec3(0, 0, -0.28), kGeom), Unreachable);
  EXPECT_THROW(leg_ik(Vec3(0, 0, 0), kGeom), Unreachable);
}

TEST(LegIk, NominalHeightKneeAngle) {
  const JointState js = leg_ik(Vec3(0, 0, -0.2), kGeom);
  // interior angle between the links
  const double interior = std::numbers::pi - js.q(2);
  EXPECT_NEAR(std::cos(interior), -0.0204, 1e-4);
  EXPECT_NEAR(std::cos(interior), (2 * 0.14 * 0.14 - 0.04) / (2 * 0.14 * 0.14), 1e-12);
  EXPECT_GT(js.q(2), 0.0);
  EXPECT_LT((leg_fk(js, kGeom) - Vec3(0, 0, -0.2)).norm(), 1e-12);
}

TEST(LegIk, RoundTripOnRandomReachablePoints) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dir(-1, 1), rad(1e-3, 0.28 - 1e-6);
  int n = 0;
  while (n < 1000) {
    Vec3 d(dir(rng), dir(rng), dir(rng));
    if (d.norm() < 1e-3 || d.norm() > 1) continue;
    if (d.z() > -0.05) d.z() = -std::abs(d.z()) - 0.05;  // below the hip
    const Vec3 p = d.normalized() * rad(rng);
    const JointState js = leg_ik(p, kGeom);
    EXPECT_LT((leg_fk(js, kGeom) - p).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GT(js.q(2), 0.0);
    EXPECT_LT(js.q(2), std::numbers::pi);
    ++n;
  }
}

TEST(LegJacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  for (int i = 0; i < 1000; ++i) {
    JointState js;
    js.q = Vec3(u(rng), u(rng), u(rng));
    const MatX fd = oracle::finite_difference_jacobian(
        [](const VecX& q) {
          JointState j;
          j.q = q;
          return VecX(leg_fk(j, kGeom));
        },
        js.q);
    EXPECT_LT((MatX(leg_jacobian(js, kGeom)) - fd).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(LegJacobian, StraightLegIsSingular) {
  JointState js;
  EXPECT_NEAR(leg_jacobian(js, kGeom).determinant(), 0.0, 1e-12);
}

TEST(LegJacobian, ColumnNormsBounded) {
  JointState js;
  js.q = Vec3(0, std::numbers::pi / 4, -std::numbers::pi / 2);
  const Mat3 J = leg_jacobian(js, kGeom);
  for (int c = 0; c < 3; ++c) EXPECT_LE(J.col(c).norm(), 0.28 + 1e-12);
}

TEST(StanceTorques, IdentityMaps) {
  EXPECT_EQ(stance_torques(Mat3::Identity(), Mat3::Identity(), Vec3(0, 0, 10)), Vec3(0, 0, 10));
  EXPECT_TRUE(stance_torques(Mat3::Random(), rotation_z(0.3), Vec3::Zero()).isZero(0.0));
}

TEST(StanceTorques, PowerConsistency) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  for (int i = 0; i < 200; ++i) {
    Mat3 J;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) J(r, c) = n(rng);
    const Mat3 R = rotation_zyx({n(rng), 0.5 * n(rng), n(rng)});
    const Vec3 f(n(rng), n(rng), n(rng)), qdot(n(rng), n(rng), n(rng));
    EXPECT_NEAR(stance_torques(J, R, f).dot(qdot), f.dot(R * J * qdot), 1e-10);
  }
}

TEST(SwingPd, ZeroError) {
  EXPECT_TRUE(swing_pd_torque(Vec3(1, 2, 3), Vec3(4, 5, 6), Vec3(1, 2, 3), Vec3(4, 5, 6)).isZero(0.0));
}

TEST(SwingPd, ProportionalTerm) {
  EXPECT_LT((swing_pd_torque(Vec3::Zero(), Vec3::Zero(), Vec3(0.1, 0, 0), Vec3::Zero()) - Vec3(30, 0, 0)).norm(),
            1e-12);
}

TEST(SwingPd, DerivativeTerm) {
  EXPECT_LT((swing_pd_torque(Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3(0, 1, 0)) - Vec3(0, 0.1, 0)).norm(),
            1e-15);
}

TEST(LegGeometry, HipOffsetsFromBodyDimensions) {
  EXPECT_EQ(kGeom.hip_offset_body[0], Vec3(0.15, 0.044, 0));
  EXPECT_EQ(kGeom.hip_offset_body[3], Vec3(-0.15, -0.044, 0));
  EXPECT_EQ(kGeom.l1, 0.14);
  EXPECT_EQ(kGeom.l2, 0.14);
}
