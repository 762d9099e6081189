#pragma once

// Closed-loop simulation: nonlinear rigid-body plant at dt_sim, MPC at dt_mpc,
// scheduled contacts, Raibert footholds and external force pulses.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "quad_mpc/common.hpp"
#include "quad_mpc/gait_fsm.hpp"
#include "quad_mpc/leg_kinematics.hpp"
#include "quad_mpc/ltv_mpc.hpp"
#include "quad_mpc/qp_solver.hpp"
#include "quad_mpc/reference_gen.hpp"
#include "quad_mpc/srb_model.hpp"

namespace quad_mpc {

/// External force pulse through the center of mass, shaped by a cubic Bezier
/// with control points (0, c, c, 0).
struct DisturbanceSpec {
  double onset = 0.0;
  double window = 0.2;
  Vec3 peak = Vec3::Zero();
  // false: the curve maximum equals `peak` (control points 4/3 peak).
  // true: `peak` is the inner control-point value and the curve tops out at 0.75 peak.
  bool peak_is_control_point = false;
};

inline Vec3 bezier_force(double t, const DisturbanceSpec& d) {
  if (t < d.onset || t > d.onset + d.window) return Vec3::Zero();
  const double u = (t - d.onset) / d.window;
  const Vec3 control = d.peak_is_control_point ? d.peak : Vec3(d.peak * (4.0 / 3.0));
  return 3.0 * u * (1.0 - u) * control;
}

struct ScenarioConfig {
  std::string name = "trot_straight";
  RobotParams robot;
  std::string gait = "trot";
  double settle_time = 0.3;  // full stance before gait and command start
  Command command;
  Weights weights;
  int horizon = 15;
  double dt_mpc = 0.02;
  double dt_sim = 0.001;
  double duration = 5.0;
  double fz_min = 0.0;
  double fz_max = 0.0;  // <= 0 selects 2 m g
  double apex_height = 0.08;
  bool warm_start = true;
  std::vector<DisturbanceSpec> disturbances;

  ScenarioConfig() {
    command.v_d = Vec3(0.5, 0.0, 0.0);
    command.a_d = 0.5;
    command.z0 = robot.nominal_height;
  }

  double fz_upper() const { return fz_max > 0.0 ? fz_max : 2.0 * robot.mass * robot.gravity; }

  int steps_per_tick() const { return static_cast<int>(std::lround(dt_mpc / dt_sim)); }

  void validate() const {
    robot.validate();
    weights.validate();
    command.validate();
    gait_table(gait).validate();
    if (horizon < 1) throw ConfigError("mpc.horizon must be >= 1");
    if (!(dt_sim > 0.0) || !(dt_mpc > 0.0)) throw ConfigError("time steps must be > 0");
    const double ratio = dt_mpc / dt_sim;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0)
      throw ConfigError("mpc.dt must be an integer multiple of sim.dt");
    if (!(duration > 0.0)) throw ConfigError("sim.duration must be > 0");
    if (fz_min < 0.0 || !(fz_min < fz_upper())) throw ConfigError("require 0 <= mpc.fz_min < mpc.fz_max");
    if (!(apex_height > 0.0)) throw ConfigError("swing.apex_height must be > 0");
    if (settle_time < 0.0) throw ConfigError("gait.settle_time must be >= 0");
    for (const auto& d : disturbances)
      if (!(d.window > 0.0)) throw ConfigError("disturbance window must be > 0");
  }
};

/// Everything the controller may read at a control instant.
struct WalkerState {
  PlantState plant;
  FsmState fsm;
  PerLeg<Vec3> feet{};             // world foot positions
  PerLeg<SwingPlan> swing{};       // valid while the leg swings
};

struct TickResult {
  FootForces forces;
  QpStatus status = QpStatus::Optimal;
  int iterations = 0;
  int cold_iterations = -1;  // filled when cold-start comparison is requested
  double solve_ms = 0.0;
  double kkt = 0.0;
  int num_vars = 0;
  MpcState reference = MpcState::Zero();
};

inline double wrap_angle(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

class MpcController {
 public:
  explicit MpcController(ScenarioConfig cfg)
      : cfg_(std::move(cfg)),
        gait_(gait_table(cfg_.gait)),
        legs_(LegGeometry::from_robot(cfg_.robot)),
        solver_(QpOptions{}) {}

  const ScenarioConfig& config() const { return cfg_; }
  const GaitParams& gait() const { return gait_; }
  const LegGeometry& legs() const { return legs_; }

  void set_compare_cold_start(bool on) { compare_cold_ = on; }

  /// Command time: the reference starts when the settling window ends.
  double command_time(double t) const { return t - cfg_.settle_time; }

  /// Predicted touchdown point of `leg` if it lands `t_ahead` seconds from now.
  Vec3 predict_foothold(const WalkerState& w, int leg, double t_ahead, double t_now) const {
    const PlantState& s = w.plant;
    const double yaw = std::atan2(s.R(1, 0), s.R(0, 0));
    const double yaw_rate = s.w_world().z();
    const Vec3 v_cur(s.v.x(), s.v.y(), 0.0);
    const MpcState ref = reference_point(command_time(t_now + t_ahead), cfg_.command);
    Vec3 v_ref = ref.segment<3>(idx::v);
    v_ref.z() = 0.0;
    const Vec3 hip = s.p + v_cur * t_ahead +
                     rotation_z(yaw + yaw_rate * t_ahead) * legs_.hip_offset_body[leg];
    return raibert_footstep(hip, v_cur, v_ref, gait_.t_stance, cfg_.command.z0, cfg_.robot.gravity);
  }

  /// Retarget every swinging foot to its current Raibert prediction.
  void retarget_swing(WalkerState& w, double t) const {
    for (int i = 0; i < kNumLegs; ++i) {
      if (w.fsm.settling() || w.fsm.legs[i].mode != LegMode::Swing) continue;
      const double remaining = std::max(0.0, gait_.t_swing - w.fsm.legs[i].dwell);
      w.swing[i].p_end = predict_foothold(w, i, remaining, t);
    }
  }

  SwingPlan start_swing(const WalkerState& w, int leg, double t) const {
    SwingPlan plan;
    plan.p_start = w.feet[leg];
    plan.p_end = predict_foothold(w, leg, gait_.t_swing, t);
    plan.apex_height = cfg_.apex_height;
    plan.duration = gait_.t_swing;
    return plan;
  }

  HorizonInput horizon_input(const WalkerState& w, double t) const {
    const int N = cfg_.horizon;
    const double dt = cfg_.dt_mpc;
    HorizonInput in;
    in.dt = dt;
    in.weights = cfg_.weights;
    in.fz_lb = cfg_.fz_min;
    in.fz_ub = cfg_.fz_upper();
    in.schedule = predict_contacts(w.fsm, gait_, N, dt);
    in.X_ref = reference_window(command_time(t), N, dt, cfg_.command);

    const MpcState ref_now = reference_point(command_time(t), cfg_.command);
    in.x0 = mpc_state_from_plant(w.plant, cfg_.robot.gravity);
    const double yaw_ref = ref_now(idx::theta + 2);
    in.x0(idx::theta + 2) = yaw_ref + wrap_angle(in.x0(idx::theta + 2) - yaw_ref);
    in.psi = in.x0(idx::theta + 2);

    // Foot positions over the horizon: current feet while the present stance
    // lasts, predicted footholds after each scheduled touchdown.
    in.lever_arms.assign(N, PerLeg<Vec3>{});
    for (int leg = 0; leg < kNumLegs; ++leg) {
      const bool swinging_now = !w.fsm.settling() && w.fsm.legs[leg].mode == LegMode::Swing;
      bool first_touchdown = true;
      Vec3 foot = w.feet[leg];
      for (int k = 0; k < N; ++k) {
        const bool c = in.schedule[k][leg];
        const bool touchdown = c && (k == 0 ? swinging_now : !in.schedule[k - 1][leg]);
        if (touchdown) {
          foot = (swinging_now && first_touchdown) ? w.swing[leg].p_end
                                                   : predict_foothold(w, leg, k * dt, t);
          first_touchdown = false;
        }
        // CoM displacement at the middle of step k, taken from the reference.
        const Vec3 com_shift =
            reference_point(command_time(t + (k + 0.5) * dt), cfg_.command).segment<3>(idx::p) -
            ref_now.segment<3>(idx::p);
        in.lever_arms[k][leg] = foot - (w.plant.p + com_shift);
      }
    }
    return in;
  }

  TickResult control_tick(const WalkerState& w, double t) {
    TickResult out;
    const HorizonInput in = horizon_input(w, t);
    out.reference = reference_point(command_time(t), cfg_.command);
    const QpProblem qp = build_qp(in, cfg_.robot);
    out.num_vars = qp.layout.num_vars;

    std::optional<WarmStart> warm;
    if (cfg_.warm_start) warm = shifted_warm_start(qp.layout);
    if (!warm) warm = interior_start(qp.layout);

    const auto t0 = std::chrono::steady_clock::now();
    const QpSolution sol = solver_.solve(qp.H, qp.G, qp.A_ineq, qp.b_ineq, warm);
    const auto t1 = std::chrono::steady_clock::now();
    out.solve_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    out.status = sol.status;
    out.iterations = sol.iterations;
    if (compare_cold_) out.cold_iterations = solver_.solve(qp.H, qp.G, qp.A_ineq, qp.b_ineq).iterations;

    out.forces.contact = in.schedule.front();
    if (sol.status == QpStatus::Optimal) {
      out.kkt = kkt_residuals(qp.H, qp.G, qp.A_ineq, qp.b_ineq, sol).max();
      const StepColumns& first = qp.layout.steps.front();
      for (std::size_t j = 0; j < first.legs.size(); ++j)
        out.forces.f[first.legs[j]] = sol.u_star.segment<3>(first.offset + 3 * static_cast<int>(j));
      prev_layout_ = qp.layout;
      prev_solution_ = sol;
      last_forces_ = out.forces;
    } else {
      // Hold the previous forces; the plant masks feet that have lifted off.
      out.forces.f = last_forces_.f;
      prev_solution_.reset();
    }
    return out;
  }

 private:
  ScenarioConfig cfg_;
  GaitParams gait_;
  LegGeometry legs_;
  ActiveSetSolver solver_;
  bool compare_cold_ = false;
  QpLayout prev_layout_;
  std::optional<QpSolution> prev_solution_;
  FootForces last_forces_;

  /// Weight shared evenly over the feet of each step: strictly inside every
  /// pyramid whenever the bounds admit it.
  WarmStart interior_start(const QpLayout& layout) const {
    WarmStart start;
    start.u = VecX::Zero(layout.num_vars);
    const double mg = cfg_.robot.mass * cfg_.robot.gravity;
    for (const auto& step : layout.steps) {
      const int n = static_cast<int>(step.legs.size());
      if (n == 0) continue;
      const double fz = std::clamp(mg / n, cfg_.fz_min + 1e-3, cfg_.fz_upper() - 1e-3);
      for (int j = 0; j < n; ++j) start.u(step.offset + 3 * j + 2) = fz;
    }
    return start;
  }

  /// Previous solution shifted one step forward in time, matched per (step, leg).
  std::optional<WarmStart> shifted_warm_start(const QpLayout& layout) const {
    if (!prev_solution_) return std::nullopt;
    const QpSolution& prev = *prev_solution_;

    // foot slot index in the previous layout, keyed by (step, leg)
    std::map<std::pair<int, int>, int> prev_slot;
    for (int k = 0, slot = 0; k < prev_layout_.horizon(); ++k)
      for (int leg : prev_layout_.steps[k].legs) prev_slot[{k, leg}] = slot++;
    std::map<int, int> slot_map;  // previous slot -> current slot

    WarmStart warm = interior_start(layout);
    for (int k = 0, slot = 0; k < layout.horizon(); ++k) {
      for (int leg : layout.steps[k].legs) {
        auto it = prev_slot.find({k + 1, leg});
        if (it != prev_slot.end()) {
          warm.u.segment<3>(3 * slot) = prev.u_star.segment<3>(3 * it->second);
          slot_map[it->second] = slot;
        }
        ++slot;
      }
    }
    for (int row : prev.active_set) {
      auto it = slot_map.find(row / 6);
      if (it != slot_map.end()) warm.working_set.push_back(6 * it->second + row % 6);
    }
    return warm;
  }
};

struct LogRow {
  double t = 0.0;
  PlantState state;
  EulerAngles euler;
  PerLeg<bool> contact{};
  PerLeg<Vec3> grf{};
  PerLeg<Vec3> feet{};
  Vec3 f_ext = Vec3::Zero();
  MpcState reference = MpcState::Zero();
  QpStatus qp_status = QpStatus::Optimal;
  double qp_ms = 0.0;  // nonzero only on rows where the controller ran
};

struct TickRecord {
  double t = 0.0;
  QpStatus status = QpStatus::Optimal;
  int iterations = 0;
  int cold_iterations = -1;
  double solve_ms = 0.0;
  double kkt = 0.0;
  int num_vars = 0;
};

struct SimLog {
  std::vector<LogRow> rows;
  std::vector<TickRecord> ticks;
  bool diverged = false;
  std::string divergence_reason;
  double divergence_time = 0.0;

  int qp_failures() const {
    return static_cast<int>(std::count_if(ticks.begin(), ticks.end(),
                                          [](const TickRecord& r) { return r.status != QpStatus::Optimal; }));
  }
};

inline std::optional<std::string> divergence_check(const PlantState& s, const EulerAngles& e) {
  if (s.p.z() < 0.02) return "fall: base height below 0.02 m";
  if (std::abs(e.roll) > 1.0 || std::abs(e.pitch) > 1.0) return "tilt: roll or pitch beyond 1 rad";
  if (s.p.norm() > 1e3 || s.v.norm() > 1e2) return "state bound exceeded";
  return std::nullopt;
}

struct RunOptions {
  bool compare_cold_start = false;
};

/// Run the closed loop for cfg.duration. Divergence stops the run and is
/// reported in the log rather than thrown.
inline SimLog run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {}) {
  cfg.validate();
  MpcController ctrl(cfg);
  ctrl.set_compare_cold_start(opts.compare_cold_start);
  const GaitParams& gait = ctrl.gait();
  const LegGeometry& legs = ctrl.legs();

  WalkerState w;
  w.plant.p = Vec3(0.0, 0.0, cfg.command.z0);
  w.fsm = FsmState::full_stance(cfg.settle_time);
  if (cfg.settle_time <= 0.0) w.fsm = FsmState::at_gait_onset(gait);
  for (int i = 0; i < kNumLegs; ++i) {
    w.feet[i] = legs.hip_offset_body[i];
    w.feet[i].z() = 0.0;
  }
  // A leg that starts mid-swing gets a plan from its current spot.
  for (int i = 0; i < kNumLegs; ++i)
    if (!w.fsm.settling() && w.fsm.legs[i].mode == LegMode::Swing) w.swing[i] = ctrl.start_swing(w, i, 0.0);

  const int steps = static_cast<int>(std::lround(cfg.duration / cfg.dt_sim));
  const int per_tick = cfg.steps_per_tick();

  SimLog log;
  log.rows.reserve(steps);
  FootForces command;
  QpStatus last_status = QpStatus::Optimal;

  for (int i = 0; i < steps; ++i) {
    const double t = i * cfg.dt_sim;

    EulerAngles e;
    std::optional<std::string> bad;
    try {
      e = euler_from_rotation(w.plant.R);
      bad = divergence_check(w.plant, e);
    } catch (const GimbalLock&) {
      bad = "tilt: gimbal lock";
    }
    if (bad) {
      log.diverged = true;
      log.divergence_reason = *bad;
      log.divergence_time = t;
      break;
    }

    double qp_ms = 0.0;
    if (i % per_tick == 0) {
      ctrl.retarget_swing(w, t);
      const TickResult tick = ctrl.control_tick(w, t);
      command = tick.forces;
      last_status = tick.status;
      qp_ms = tick.solve_ms;
      log.ticks.push_back({t, tick.status, tick.iterations, tick.cold_iterations, tick.solve_ms, tick.kkt,
                           tick.num_vars});
    }

    FootForces applied = command;
    applied.contact = contact_state(w.fsm);
    applied = applied.masked();
    Vec3 f_ext = Vec3::Zero();
    for (const auto& d : cfg.disturbances) f_ext += bezier_force(t, d);

    LogRow row;
    row.t = t;
    row.state = w.plant;
    row.euler = e;
    row.contact = applied.contact;
    row.grf = applied.f;
    row.feet = w.feet;
    row.f_ext = f_ext;
    row.reference = reference_point(ctrl.command_time(t), cfg.command);
    row.qp_status = last_status;
    row.qp_ms = qp_ms;
    log.rows.push_back(row);

    try {
      w.plant = integrate_step(w.plant, applied, w.feet, cfg.dt_sim, cfg.robot, f_ext);
    } catch (const NonFinite& err) {
      log.diverged = true;
      log.divergence_reason = err.what();
      log.divergence_time = t;
      break;
    }

    const PerLeg<bool> before = contact_state(w.fsm);
    w.fsm = advance(w.fsm, gait, cfg.dt_sim);
    const PerLeg<bool> after = contact_state(w.fsm);
    const double t_next = (i + 1) * cfg.dt_sim;
    for (int leg = 0; leg < kNumLegs; ++leg) {
      if (before[leg] && !after[leg]) {
        w.swing[leg] = ctrl.start_swing(w, leg, t_next);
      } else if (!before[leg] && after[leg]) {
        w.feet[leg] = w.swing[leg].p_end;
        continue;
      }
      if (!after[leg]) w.feet[leg] = swing_trajectory(w.swing[leg], w.fsm.legs[leg].phase).pos;
    }
  }
  return log;
}

/// Aggregate figures for summaries and acceptance checks.
struct SimSummary {
  int rows = 0;
  int ticks = 0;
  int qp_failures = 0;
  double mean_solve_ms = 0.0;
  double p95_solve_ms = 0.0;
  double max_solve_ms = 0.0;
  double rms_position_error = 0.0;
  double rms_velocity_error = 0.0;
  double rms_yaw_error = 0.0;
  double max_abs_roll = 0.0;
  double max_abs_pitch = 0.0;
  double max_kkt = 0.0;
  Vec3 final_position = Vec3::Zero();
  double final_yaw = 0.0;
};

inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline SimSummary summarize(const SimLog& log) {
  SimSummary s;
  s.rows = static_cast<int>(log.rows.size());
  s.ticks = static_cast<int>(log.ticks.size());
  s.qp_failures = log.qp_failures();
  std::vector<double> times;
  for (const auto& tk : log.ticks) {
    times.push_back(tk.solve_ms);
    s.max_kkt = std::max(s.max_kkt, tk.kkt);
  }
  if (!times.empty()) {
    double sum = 0.0;
    for (double x : times) sum += x;
    s.mean_solve_ms = sum / static_cast<double>(times.size());
    s.p95_solve_ms = percentile(times, 0.95);
    s.max_solve_ms = *std::max_element(times.begin(), times.end());
  }
  double ep = 0.0, ev = 0.0, ey = 0.0;
  for (const auto& r : log.rows) {
    ep += (r.state.p - r.reference.segment<3>(idx::p)).squaredNorm();
    ev += (r.state.v - r.reference.segment<3>(idx::v)).squaredNorm();
    const double dy = wrap_angle(r.euler.yaw - r.reference(idx::theta + 2));
    ey += dy * dy;
    s.max_abs_roll = std::max(s.max_abs_roll, std::abs(r.euler.roll));
    s.max_abs_pitch = std::max(s.max_abs_pitch, std::abs(r.euler.pitch));
  }
  if (!log.rows.empty()) {
    const double n = static_cast<double>(log.rows.size());
    s.rms_position_error = std::sqrt(ep / n);
    s.rms_velocity_error = std::sqrt(ev / n);
    s.rms_yaw_error = std::sqrt(ey / n);
    s.final_position = log.rows.back().state.p;
    s.final_yaw = log.rows.back().euler.yaw;
  }
  return s;
}

}  // namespace quad_mpc
