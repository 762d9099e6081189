#pragma once

// Single-rigid-body plant: rotation utilities, contact wrench, the full
// nonlinear dynamics and a fixed-step RK4 integrator.

#include <cmath>

#include <Eigen/Dense>

#include "quad_mpc/common.hpp"

namespace quad_mpc {

/// Z-Y-X Euler angles. `roll` rotates about x, `pitch` about y, `yaw` about z.
struct EulerAngles {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  Vec3 vec() const { return {roll, pitch, yaw}; }
  static EulerAngles from(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
};

struct RobotParams {
  double mass = 5.5;
  Mat3 inertia_body = Eigen::Vector3d(0.026, 0.112, 0.075).asDiagonal();
  double gravity = 9.81;
  double mu = 1.0;
  double body_length = 0.3;
  double body_width = 0.088;
  double body_height = 0.05;
  double link_length = 0.14;
  double nominal_height = 0.2;

  /// Throws ConfigError on a physically meaningless parameter set.
  void validate() const {
    if (!(mass > 0.0)) throw ConfigError("robot.mass must be > 0");
    if (!(mu > 0.0)) throw ConfigError("robot.mu must be > 0");
    if (!(link_length > 0.0)) throw ConfigError("robot.link_length must be > 0");
    if (!(nominal_height > 0.0)) throw ConfigError("robot.nominal_height must be > 0");
    if (!(gravity > 0.0)) throw ConfigError("robot.gravity must be > 0");
    if ((inertia_body - inertia_body.transpose()).norm() > 1e-12)
      throw ConfigError("robot inertia must be symmetric");
    Eigen::LLT<Mat3> llt(inertia_body);
    if (llt.info() != Eigen::Success) throw ConfigError("robot inertia must be positive definite");
  }
};

struct PlantState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Mat3 R = Mat3::Identity();       // body -> world
  Vec3 w_body = Vec3::Zero();      // angular velocity, body frame

  Vec3 w_world() const { return R * w_body; }
};

struct PlantStateDot {
  Vec3 p_dot;
  Vec3 v_dot;
  Mat3 R_dot;
  Vec3 w_dot;
};

/// Per-foot world-frame forces. Forces on feet out of contact are ignored.
struct FootForces {
  PerLeg<Vec3> f{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  PerLeg<bool> contact{false, false, false, false};

  /// Copy with swing-foot forces zeroed.
  FootForces masked() const {
    FootForces out = *this;
    for (int i = 0; i < kNumLegs; ++i)
      if (!contact[i]) out.f[i].setZero();
    return out;
  }
};

struct Wrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};

/// Skew-symmetric matrix with hat(a) * b == a.cross(b).
inline Mat3 hat(const Vec3& a) {
  Mat3 m;
  m << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
       -a.y(), a.x(), 0.0;
  return m;
}

inline Mat3 rotation_x(double phi) {
  const double c = std::cos(phi), s = std::sin(phi);
  Mat3 m;
  m << 1.0, 0.0, 0.0,
       0.0, c, -s,
       0.0, s, c;
  return m;
}

inline Mat3 rotation_y(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Mat3 m;
  m << c, 0.0, s,
       0.0, 1.0, 0.0,
       -s, 0.0, c;
  return m;
}

inline Mat3 rotation_z(double psi) {
  const double c = std::cos(psi), s = std::sin(psi);
  Mat3 m;
  m << c, -s, 0.0,
       s, c, 0.0,
       0.0, 0.0, 1.0;
  return m;
}

/// R = Rz(yaw) * Ry(pitch) * Rx(roll).
inline Mat3 rotation_zyx(const EulerAngles& e) {
  return rotation_z(e.yaw) * rotation_y(e.pitch) * rotation_x(e.roll);
}

inline constexpr double kGimbalMargin = 1e-6;

/// Inverse of rotation_zyx, valid away from pitch = +-pi/2.
inline EulerAngles euler_from_rotation(const Mat3& R) {
  const double r31 = R(2, 0);
  if (std::abs(r31) >= 1.0 - kGimbalMargin)
    throw GimbalLock("euler_from_rotation: pitch too close to +-pi/2");
  EulerAngles e;
  e.pitch = -std::asin(r31);
  e.roll = std::atan2(R(2, 1), R(2, 2));
  e.yaw = std::atan2(R(1, 0), R(0, 0));
  return e;
}

/// Net wrench on the body about the center of mass `p`, world frame.
inline Wrench wrench_from_forces(const FootForces& forces, const PerLeg<Vec3>& foot_pos_world,
                                 const Vec3& p) {
  Wrench w;
  for (int i = 0; i < kNumLegs; ++i) {
    if (!forces.contact[i]) continue;
    const Vec3 r = foot_pos_world[i] - p;
    w.force += forces.f[i];
    w.torque += hat(r) * forces.f[i];
  }
  return w;
}

/// Continuous SRB dynamics. `f_ext` is an extra world force through the CoM.
inline PlantStateDot srb_derivative(const PlantState& s, const FootForces& forces,
                                    const PerLeg<Vec3>& foot_pos, const RobotParams& params,
                                    const Vec3& f_ext = Vec3::Zero()) {
  const Wrench w = wrench_from_forces(forces, foot_pos, s.p);
  const Vec3 tau_body = s.R.transpose() * w.torque;
  const Mat3& I = params.inertia_body;

  PlantStateDot d;
  d.p_dot = s.v;
  d.v_dot = (w.force + f_ext) / params.mass - Vec3(0.0, 0.0, params.gravity);
  d.R_dot = s.R * hat(s.w_body);
  d.w_dot = I.ldlt().solve(tau_body - s.w_body.cross(I * s.w_body));
  return d;
}

/// Nearest rotation matrix (polar factor) via SVD.
inline Mat3 orthonormalize(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 out = svd.matrixU() * svd.matrixV().transpose();
  if (out.determinant() < 0.0) {
    Mat3 U = svd.matrixU();
    U.col(2) *= -1.0;
    out = U * svd.matrixV().transpose();
  }
  return out;
}

namespace detail {

inline PlantState euler_offset(const PlantState& s, const PlantStateDot& d, double h) {
  PlantState out;
  out.p = s.p + h * d.p_dot;
  out.v = s.v + h * d.v_dot;
  out.R = s.R + h * d.R_dot;
  out.w_body = s.w_body + h * d.w_dot;
  return out;
}

inline bool all_finite(const PlantState& s) {
  return s.p.allFinite() && s.v.allFinite() && s.R.allFinite() && s.w_body.allFinite();
}

}  // namespace detail

/// One classical RK4 step with forces held over the interval, followed by
/// re-projection of R onto SO(3).
inline PlantState integrate_step(const PlantState& s, const FootForces& forces,
                                 const PerLeg<Vec3>& foot_pos, double dt, const RobotParams& params,
                                 const Vec3& f_ext = Vec3::Zero()) {
  if (!(dt > 0.0)) throw Error("integrate_step: dt must be > 0");
  auto f = [&](const PlantState& x) { return srb_derivative(x, forces, foot_pos, params, f_ext); };

  const PlantStateDot k1 = f(s);
  const PlantStateDot k2 = f(detail::euler_offset(s, k1, dt / 2));
  const PlantStateDot k3 = f(detail::euler_offset(s, k2, dt / 2));
  const PlantStateDot k4 = f(detail::euler_offset(s, k3, dt));

  PlantState out;
  out.p = s.p + dt / 6.0 * (k1.p_dot + 2.0 * k2.p_dot + 2.0 * k3.p_dot + k4.p_dot);
  out.v = s.v + dt / 6.0 * (k1.v_dot + 2.0 * k2.v_dot + 2.0 * k3.v_dot + k4.v_dot);
  out.R = s.R + dt / 6.0 * (k1.R_dot + 2.0 * k2.R_dot + 2.0 * k3.R_dot + k4.R_dot);
  out.w_body = s.w_body + dt / 6.0 * (k1.w_dot + 2.0 * k2.w_dot + 2.0 * k3.w_dot + k4.w_dot);
  if (!detail::all_finite(out)) throw NonFinite("integrate_step: non-finite state");
  out.R = orthonormalize(out.R);
  return out;
}

}  // namespace quad_mpc
