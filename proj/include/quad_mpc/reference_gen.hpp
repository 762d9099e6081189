#pragma once

// Kinematic reference: trapezoidal velocity ramp for translation and a
// constant-rate ramp-and-hold for yaw.

#include <algorithm>
#include <cmath>

#include "quad_mpc/common.hpp"
#include "quad_mpc/ltv_mpc.hpp"

namespace quad_mpc {

struct Command {
  Vec3 v_d = Vec3::Zero();     // desired velocity, world frame
  double a_d = 0.5;            // acceleration magnitude along v_d
  double psi_d = 0.0;
  double omega_psi_d = 0.5;    // yaw rate used during the yaw ramp
  double omega_dot_psi_d = 0.0;  // kept for configuration completeness; not used by the ramp
  double z0 = 0.2;
  double gravity = 9.81;

  void validate() const {
    if (v_d.norm() > 0.0 && !(a_d > 0.0)) throw ConfigError("command.accel must be > 0 when moving");
    if (!(z0 > 0.0)) throw ConfigError("command.z0 must be > 0");
    if (psi_d != 0.0 && !(omega_psi_d > 0.0))
      throw ConfigError("command.omega_psi_d must be > 0 when psi_d != 0");
  }
};

/// Reference state at time t >= 0 (negative t is treated as 0).
inline MpcState reference_point(double t, const Command& cmd) {
  t = std::max(0.0, t);
  MpcState x = MpcState::Zero();

  const double speed = cmd.v_d.norm();
  if (speed > 0.0) {
    const Vec3 dir = cmd.v_d / speed;
    const double t_ramp = speed / cmd.a_d;
    if (t <= t_ramp) {
      x.segment<3>(idx::p) = 0.5 * cmd.a_d * t * t * dir;
      x.segment<3>(idx::v) = cmd.a_d * t * dir;
    } else {
      x.segment<3>(idx::p) = cmd.v_d * t - 0.5 * speed * speed / cmd.a_d * dir;
      x.segment<3>(idx::v) = cmd.v_d;
    }
  }
  x(idx::p + 2) += cmd.z0;

  if (cmd.psi_d != 0.0) {
    const double sign = cmd.psi_d > 0.0 ? 1.0 : -1.0;
    const double t_yaw = std::abs(cmd.psi_d) / cmd.omega_psi_d;
    if (t < t_yaw) {
      x(idx::theta + 2) = sign * cmd.omega_psi_d * t;
      x(idx::omega + 2) = sign * cmd.omega_psi_d;
    } else {
      x(idx::theta + 2) = cmd.psi_d;
    }
  }
  x(idx::g) = cmd.gravity;
  return x;
}

/// Stacked references for x_1 .. x_N of a horizon starting at t.
inline VecX reference_window(double t, int N, double dt, const Command& cmd) {
  VecX y(kStateDim * std::max(N, 0));
  for (int k = 0; k < N; ++k) y.segment<kStateDim>(kStateDim * k) = reference_point(t + (k + 1) * dt, cmd);
  return y;
}

}  // namespace quad_mpc
