#pragma once

// Gravity-augmented linear time-varying model of the rigid body, its exact
// zero-order-hold discretization, single-shooting condensing of the horizon
// into dense QP data, and friction-pyramid force constraints.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quad_mpc/common.hpp"
#include "quad_mpc/srb_model.hpp"

namespace quad_mpc {

inline constexpr int kStateDim = 13;

/// [p(3), v(3), Theta(3), omega_world(3), g_s(1)]
using MpcState = Eigen::Matrix<double, kStateDim, 1>;
using MpcMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;

namespace idx {
inline constexpr int p = 0;
inline constexpr int v = 3;
inline constexpr int theta = 6;
inline constexpr int omega = 9;
inline constexpr int g = 12;
}  // namespace idx

/// Linearization state read off the nonlinear plant.
inline MpcState mpc_state_from_plant(const PlantState& s, double gravity) {
  const EulerAngles e = euler_from_rotation(s.R);
  MpcState x;
  x.segment<3>(idx::p) = s.p;
  x.segment<3>(idx::v) = s.v;
  x.segment<3>(idx::theta) = e.vec();
  x.segment<3>(idx::omega) = s.w_world();
  x(idx::g) = gravity;
  return x;
}

struct Weights {
  Vec3 q_p = Vec3::Constant(1e6);
  Vec3 q_v = Vec3::Constant(1e6);
  Vec3 q_theta = Vec3::Constant(1e6);
  Vec3 q_omega = Vec3::Constant(1e6);
  Vec3 k_u = Vec3::Constant(1e1);

  /// Diagonal of the per-step state weight; the gravity state is untracked.
  MpcState state_diagonal() const {
    MpcState q;
    q << q_p, q_v, q_theta, q_omega, 0.0;
    return q;
  }

  void validate() const {
    for (const Vec3* q : {&q_p, &q_v, &q_theta, &q_omega})
      if ((q->array() < 0.0).any() || !q->allFinite())
        throw ConfigError("state weights must be finite and >= 0");
    if ((k_u.array() <= 0.0).any() || !k_u.allFinite())
      throw ConfigError("force weights must be finite and > 0");
  }
};

struct LtvContinuous {
  MpcMatrix Ac;
  MatX Bc;                       // 13 x 3n
  std::vector<int> contact_map;  // leg index of each 3-column block
};

struct LtvDiscrete {
  MpcMatrix Ad;
  MatX Bd;
  double dt = 0.0;
  std::vector<int> contact_map;
};

/// Drift part of the model: p' = v, v_z' = -g_s, Theta' = Rz(psi)^T omega.
inline MpcMatrix state_matrix(double psi) {
  MpcMatrix A = MpcMatrix::Zero();
  A.block<3, 3>(idx::p, idx::v).setIdentity();
  A(idx::v + 2, idx::g) = -1.0;
  A.block<3, 3>(idx::theta, idx::omega) = rotation_z(psi).transpose();
  return A;
}

/// Continuous model for the feet in `contact_map`, with `foot_pos_rel[j]` the
/// world-frame lever arm of foot contact_map[j] from the center of mass.
inline LtvContinuous continuous_ltv(double psi, const std::vector<Vec3>& foot_pos_rel,
                                    const std::vector<int>& contact_map, const RobotParams& params) {
  if (foot_pos_rel.empty()) throw EmptyContact("continuous_ltv: no feet in contact");
  if (foot_pos_rel.size() != contact_map.size())
    throw DimensionMismatch("continuous_ltv: lever arms and contact map differ in size");

  const Mat3 Rz = rotation_z(psi);
  const Mat3 I_world = Rz * params.inertia_body * Rz.transpose();
  const Mat3 I_world_inv = I_world.inverse();

  LtvContinuous sys;
  sys.Ac = state_matrix(psi);
  sys.Bc = MatX::Zero(kStateDim, 3 * static_cast<int>(foot_pos_rel.size()));
  sys.contact_map = contact_map;
  for (std::size_t j = 0; j < foot_pos_rel.size(); ++j) {
    const int c = 3 * static_cast<int>(j);
    sys.Bc.block<3, 3>(idx::v, c) = Mat3::Identity() / params.mass;
    sys.Bc.block<3, 3>(idx::omega, c) = I_world_inv * hat(foot_pos_rel[j]);
  }
  return sys;
}

/// Convenience overload taking contact legs in order 0..n-1.
inline LtvContinuous continuous_ltv(double psi, const std::vector<Vec3>& foot_pos_rel,
                                    const RobotParams& params) {
  std::vector<int> map(foot_pos_rel.size());
  for (std::size_t j = 0; j < map.size(); ++j) map[j] = static_cast<int>(j);
  return continuous_ltv(psi, foot_pos_rel, map, params);
}

/// Exact zero-order-hold discretization. Ac is nilpotent of index 3, so the
/// matrix exponential series terminates after the quadratic term.
inline LtvDiscrete discretize_zoh(const LtvContinuous& sys, double dt) {
  if (!(dt > 0.0)) throw Error("discretize_zoh: dt must be > 0");
  const MpcMatrix A2 = sys.Ac * sys.Ac;
  LtvDiscrete d;
  d.dt = dt;
  d.contact_map = sys.contact_map;
  d.Ad = MpcMatrix::Identity() + sys.Ac * dt + A2 * (dt * dt / 2.0);
  const MpcMatrix S = MpcMatrix::Identity() * dt + sys.Ac * (dt * dt / 2.0) + A2 * (dt * dt * dt / 6.0);
  d.Bd = S * sys.Bc;
  return d;
}

// ---------------------------------------------------------------------------
// Horizon layout

/// Predicted contact pattern, one row per horizon step.
using ContactSchedule = std::vector<PerLeg<bool>>;

struct StepColumns {
  int offset = 0;
  int width = 0;
  std::vector<int> legs;
};

/// Column layout of the stacked decision vector U.
struct QpLayout {
  std::vector<StepColumns> steps;
  int num_vars = 0;

  static QpLayout from_schedule(const ContactSchedule& schedule) {
    QpLayout layout;
    int offset = 0;
    for (const auto& row : schedule) {
      StepColumns s;
      s.offset = offset;
      for (int i = 0; i < kNumLegs; ++i)
        if (row[i]) s.legs.push_back(i);
      s.width = 3 * static_cast<int>(s.legs.size());
      offset += s.width;
      layout.steps.push_back(std::move(s));
    }
    layout.num_vars = offset;
    return layout;
  }

  int horizon() const { return static_cast<int>(steps.size()); }
};

struct Condensed {
  MatX A_qp;  // 13N x 13
  MatX B_qp;  // 13N x N_u
};

/// Stacked prediction X = A_qp x0 + B_qp U for a time-varying model sequence.
inline Condensed condense(const std::vector<LtvDiscrete>& models, const QpLayout& layout) {
  const int N = static_cast<int>(models.size());
  if (N != layout.horizon()) throw DimensionMismatch("condense: horizon length mismatch");
  for (int k = 0; k < N; ++k) {
    if (models[k].Bd.cols() != layout.steps[k].width)
      throw DimensionMismatch("condense: contact width of step " + std::to_string(k) +
                              " disagrees with the column layout");
  }

  Condensed c;
  c.A_qp = MatX::Zero(kStateDim * N, kStateDim);
  c.B_qp = MatX::Zero(kStateDim * N, layout.num_vars);

  MpcMatrix power = MpcMatrix::Identity();
  for (int k = 0; k < N; ++k) {
    power = models[k].Ad * power;
    c.A_qp.block(kStateDim * k, 0, kStateDim, kStateDim) = power;
  }
  for (int j = 0; j < N; ++j) {
    const int w = layout.steps[j].width;
    if (w == 0) continue;
    const int col = layout.steps[j].offset;
    MatX block = models[j].Bd;
    c.B_qp.block(kStateDim * j, col, kStateDim, w) = block;
    for (int k = j + 1; k < N; ++k) {
      block = models[k].Ad * block;
      c.B_qp.block(kStateDim * k, col, kStateDim, w) = block;
    }
  }
  return c;
}

struct QpCost {
  MatX H;
  VecX G;
};

/// H = 2 (B^T Qbar B + Kbar), G = 2 B^T Qbar (A x0 - y).
inline QpCost build_cost(const MatX& A_qp, const MatX& B_qp, const MpcState& x0, const VecX& X_ref,
                         const Weights& w) {
  const Eigen::Index rows = A_qp.rows();
  if (rows % kStateDim != 0 || B_qp.rows() != rows || X_ref.size() != rows)
    throw DimensionMismatch("build_cost: inconsistent prediction dimensions");
  if (B_qp.cols() % 3 != 0) throw DimensionMismatch("build_cost: control width must be 3n");

  const VecX q = w.state_diagonal().replicate(rows / kStateDim, 1);
  const VecX k = w.k_u.replicate(B_qp.cols() / 3, 1);

  const MatX QB = q.asDiagonal() * B_qp;
  QpCost cost;
  cost.H = 2.0 * (B_qp.transpose() * QB);
  cost.H.diagonal() += 2.0 * k;
  cost.H = 0.5 * (cost.H + cost.H.transpose()).eval();
  cost.G = 2.0 * QB.transpose() * (A_qp * x0 - X_ref);
  return cost;
}

struct Inequality {
  MatX A;
  VecX b;
};

/// Friction pyramid plus normal-force bounds for one foot: A f <= b.
inline Inequality friction_pyramid_single(double mu, double fz_lb, double fz_ub) {
  if (!(fz_lb < fz_ub) || fz_lb < 0.0)
    throw InvalidBounds("friction_pyramid_single: require 0 <= fz_lb < fz_ub");
  if (!(mu > 0.0)) throw InvalidBounds("friction_pyramid_single: mu must be > 0");
  Inequality c;
  c.A.resize(6, 3);
  c.A << -1.0, 0.0, -mu,
          1.0, 0.0, -mu,
          0.0, -1.0, -mu,
          0.0, 1.0, -mu,
          0.0, 0.0, -1.0,
          0.0, 0.0, 1.0;
  c.b.resize(6);
  c.b << 0.0, 0.0, 0.0, 0.0, -fz_lb, fz_ub;
  return c;
}

/// Block-diagonal stack of per-foot pyramids over every contact of the horizon.
inline Inequality stack_constraints(const QpLayout& layout, double mu, double fz_lb, double fz_ub) {
  const Inequality single = friction_pyramid_single(mu, fz_lb, fz_ub);
  const int feet = layout.num_vars / 3;
  Inequality c;
  c.A = MatX::Zero(6 * feet, layout.num_vars);
  c.b = single.b.replicate(feet, 1);
  int foot = 0;
  for (const auto& step : layout.steps) {
    if (step.width != 3 * static_cast<int>(step.legs.size()))
      throw DimensionMismatch("stack_constraints: step width disagrees with its contact set");
    for (std::size_t j = 0; j < step.legs.size(); ++j, ++foot)
      c.A.block(6 * foot, step.offset + 3 * static_cast<int>(j), 6, 3) = single.A;
  }
  if (3 * foot != layout.num_vars) throw DimensionMismatch("stack_constraints: layout column count");
  return c;
}

inline Inequality stack_constraints(const ContactSchedule& schedule, double mu, double fz_lb,
                                    double fz_ub) {
  return stack_constraints(QpLayout::from_schedule(schedule), mu, fz_lb, fz_ub);
}

/// Dense problem  min 1/2 U^T H U + U^T G  s.t.  A_ineq U <= b_ineq.
struct QpProblem {
  MatX H;
  VecX G;
  MatX A_ineq;
  VecX b_ineq;
  QpLayout layout;
};

/// Everything the horizon builder needs for one control tick.
struct HorizonInput {
  MpcState x0;
  double psi = 0.0;              // yaw held over the horizon
  double dt = 0.02;
  ContactSchedule schedule;      // N rows
  std::vector<PerLeg<Vec3>> lever_arms;  // per step, world-frame foot - CoM (used for contact legs)
  VecX X_ref;                    // 13N
  Weights weights;
  double fz_lb = 0.0;
  double fz_ub = 0.0;
};

/// Assemble the condensed QP for one tick.
inline QpProblem build_qp(const HorizonInput& in, const RobotParams& params) {
  const int N = static_cast<int>(in.schedule.size());
  if (N < 1) throw DimensionMismatch("build_qp: empty horizon");
  if (static_cast<int>(in.lever_arms.size()) != N)
    throw DimensionMismatch("build_qp: one set of lever arms per step required");

  QpProblem qp;
  qp.layout = QpLayout::from_schedule(in.schedule);

  std::vector<LtvDiscrete> models;
  models.reserve(N);
  for (int k = 0; k < N; ++k) {
    const auto& legs = qp.layout.steps[k].legs;
    if (legs.empty()) {
      LtvContinuous drift{state_matrix(in.psi), MatX::Zero(kStateDim, 0), {}};
      models.push_back(discretize_zoh(drift, in.dt));
      continue;
    }
    std::vector<Vec3> r;
    for (int leg : legs) r.push_back(in.lever_arms[k][leg]);
    models.push_back(discretize_zoh(continuous_ltv(in.psi, r, legs, params), in.dt));
  }

  const Condensed c = condense(models, qp.layout);
  QpCost cost = build_cost(c.A_qp, c.B_qp, in.x0, in.X_ref, in.weights);
  qp.H = std::move(cost.H);
  qp.G = std::move(cost.G);
  Inequality ineq = stack_constraints(qp.layout, params.mu, in.fz_lb, in.fz_ub);
  qp.A_ineq = std::move(ineq.A);
  qp.b_ineq = std::move(ineq.b);
  return qp;
}

}  // namespace quad_mpc
