#pragma once

// Footstep placement, swing-foot trajectories and the 3-DOF leg
// (hip abduction about x, hip pitch, knee pitch).

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "quad_mpc/common.hpp"
#include "quad_mpc/srb_model.hpp"

namespace quad_mpc {

struct LegGeometry {
  PerLeg<Vec3> hip_offset_body;
  double l1 = 0.14;
  double l2 = 0.14;

  static LegGeometry from_robot(const RobotParams& params) {
    LegGeometry g;
    const double hx = params.body_length / 2.0, hy = params.body_width / 2.0;
    g.hip_offset_body = {Vec3(hx, hy, 0.0), Vec3(hx, -hy, 0.0), Vec3(-hx, hy, 0.0), Vec3(-hx, -hy, 0.0)};
    g.l1 = params.link_length;
    g.l2 = params.link_length;
    return g;
  }
};

/// Joint angles [abduction, hip pitch, knee] and rates.
struct JointState {
  Vec3 q = Vec3::Zero();
  Vec3 qdot = Vec3::Zero();
};

struct SwingPlan {
  Vec3 p_start = Vec3::Zero();
  Vec3 p_end = Vec3::Zero();
  double apex_height = 0.08;
  double duration = 0.18;
};

/// Raibert touchdown point with gain sqrt(h / g), projected onto the ground.
inline Vec3 raibert_footstep(const Vec3& hip_world, const Vec3& v_cur, const Vec3& v_ref, double t_st,
                             double h, double g) {
  const double k_raibert = std::sqrt(h / g);
  Vec3 p = hip_world + 0.5 * t_st * v_cur + k_raibert * (v_cur - v_ref);
  p.z() = 0.0;
  return p;
}

struct SwingSample {
  Vec3 pos;
  Vec3 vel;
};

namespace detail {
// Cubic Hermite blend with zero end slopes and its derivative.
inline double smoothstep(double s) { return s * s * (3.0 - 2.0 * s); }
inline double smoothstep_ds(double s) { return 6.0 * s * (1.0 - s); }
}  // namespace detail

/// Foot position and velocity at swing phase s in [0,1].
inline SwingSample swing_trajectory(const SwingPlan& plan, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw PhaseOutOfRange("swing_trajectory: phase outside [0,1]");

  SwingSample out;
  const Vec3 delta = plan.p_end - plan.p_start;
  const double h = detail::smoothstep(s), dh = detail::smoothstep_ds(s);
  out.pos.head<2>() = plan.p_start.head<2>() + delta.head<2>() * h;
  out.vel.head<2>() = delta.head<2>() * dh;

  if (s <= 0.5) {
    const double u = 2.0 * s;
    const double rise = plan.apex_height - plan.p_start.z();
    out.pos.z() = plan.p_start.z() + rise * detail::smoothstep(u);
    out.vel.z() = rise * detail::smoothstep_ds(u) * 2.0;
  } else {
    const double u = 2.0 * s - 1.0;
    const double fall = plan.p_end.z() - plan.apex_height;
    out.pos.z() = plan.apex_height + fall * detail::smoothstep(u);
    out.vel.z() = fall * detail::smoothstep_ds(u) * 2.0;
  }
  out.vel /= plan.duration;
  return out;
}

/// Foot position in the hip frame.
inline Vec3 leg_fk(const JointState& js, const LegGeometry& geom) {
  const double q1 = js.q(0), q2 = js.q(1), q3 = js.q(2);
  const double xs = geom.l1 * std::sin(q2) + geom.l2 * std::sin(q2 + q3);
  const double zs = -geom.l1 * std::cos(q2) - geom.l2 * std::cos(q2 + q3);
  return rotation_x(q1) * Vec3(xs, 0.0, zs);
}

/// Knee-back inverse kinematics (knee angle in (0, pi)).
inline JointState leg_ik(const Vec3& foot_hip, const LegGeometry& geom) {
  const double l1 = geom.l1, l2 = geom.l2;
  const double d = foot_hip.norm();
  if (d > l1 + l2 - 1e-9 || d < std::abs(l1 - l2) + 1e-9)
    throw Unreachable("leg_ik: foot target outside the reachable annulus");

  JointState js;
  const double r_yz = std::hypot(foot_hip.y(), foot_hip.z());
  js.q(0) = std::atan2(foot_hip.y(), -foot_hip.z());
  const double xs = foot_hip.x();
  const double zs = -r_yz;

  const double cos_knee = std::clamp((d * d - l1 * l1 - l2 * l2) / (2.0 * l1 * l2), -1.0, 1.0);
  js.q(2) = std::acos(cos_knee);
  const double reach_angle = std::atan2(xs, -zs);
  js.q(1) = reach_angle - std::atan2(l2 * std::sin(js.q(2)), l1 + l2 * std::cos(js.q(2)));
  return js;
}

/// d(foot position in hip frame) / dq.
inline Mat3 leg_jacobian(const JointState& js, const LegGeometry& geom) {
  const double q1 = js.q(0), q2 = js.q(1), q3 = js.q(2);
  const double xs = geom.l1 * std::sin(q2) + geom.l2 * std::sin(q2 + q3);
  const double zs = -geom.l1 * std::cos(q2) - geom.l2 * std::cos(q2 + q3);
  const double c1 = std::cos(q1), s1 = std::sin(q1);

  Mat3 dRx;
  dRx << 0.0, 0.0, 0.0,
         0.0, -s1, -c1,
         0.0, c1, -s1;
  const Mat3 Rx = rotation_x(q1);

  Mat3 J;
  J.col(0) = dRx * Vec3(xs, 0.0, zs);
  J.col(1) = Rx * Vec3(-zs, 0.0, xs);
  J.col(2) = Rx * Vec3(geom.l2 * std::cos(q2 + q3), 0.0, geom.l2 * std::sin(q2 + q3));
  return J;
}

/// Joint torques realizing foot force f: J^T R^T f.
inline Vec3 stance_torques(const Mat3& J, const Mat3& R, const Vec3& f) {
  return J.transpose() * R.transpose() * f;
}

struct SwingGains {
  double kp = 300.0;
  double kd = 0.1;
};

inline Vec3 swing_pd_torque(const Vec3& q, const Vec3& qdot, const Vec3& q_ref, const Vec3& qdot_ref,
                            const SwingGains& gains = {}) {
  return gains.kp * (q_ref - q) + gains.kd * (qdot_ref - qdot);
}

}  // namespace quad_mpc
