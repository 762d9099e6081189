#pragma once

// End-to-end acceptance checks. Each criterion returns a verdict plus the
// measured figures; tolerances are fixed here and must not be tuned.

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "quad_mpc/gait_fsm.hpp"
#include "quad_mpc/leg_kinematics.hpp"
#include "quad_mpc/ltv_mpc.hpp"
#include "quad_mpc/qp_solver.hpp"
#include "quad_mpc/scenario_config.hpp"
#include "quad_mpc/sim_harness.hpp"
#include "quad_mpc/srb_model.hpp"
#include "quad_mpc/testing/oracles.hpp"

namespace quad_mpc::acceptance {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  std::function<Verdict(const std::vector<std::string>& overrides)> check;
};

// ---------------------------------------------------------------------------
// Scenarios. The files under scenarios/ mirror these.

inline ScenarioConfig static_stand_scenario() {
  ScenarioConfig c;
  c.name = "static_stand";
  c.command.v_d = Vec3::Zero();
  c.duration = 5.0;
  // Settle past the end so the horizon never anticipates a lift-off.
  c.settle_time = c.duration + 1.0;
  return c;
}

inline ScenarioConfig trot_scenario() {
  ScenarioConfig c;
  c.name = "trot_straight";
  c.command.v_d = Vec3(0.5, 0.0, 0.0);
  c.command.a_d = 0.5;
  c.duration = 5.0;
  return c;
}

inline ScenarioConfig top_speed_scenario() {
  ScenarioConfig c = trot_scenario();
  c.name = "top_speed";
  c.command.v_d = Vec3(1.0, 0.0, 0.0);
  c.duration = 6.0;
  return c;
}

inline ScenarioConfig turn_scenario() {
  ScenarioConfig c = trot_scenario();
  c.name = "turn";
  c.command.v_d = Vec3(0.35, 0.0, 0.0);
  c.command.psi_d = std::numbers::pi / 4.0;
  return c;
}

inline ScenarioConfig disturbance_scenario() {
  ScenarioConfig c = trot_scenario();
  c.name = "disturbance";
  c.duration = 6.0;
  DisturbanceSpec d1, d2;
  d1.onset = 0.5;
  d1.peak = Vec3(0.0, 4.0, 0.0);
  d2.onset = 2.3;
  d2.peak = Vec3(0.0, 8.0, 0.0);
  c.disturbances = {d1, d2};
  return c;
}

inline ScenarioConfig crawl_scenario() {
  ScenarioConfig c = trot_scenario();
  c.name = "crawl";
  c.gait = "crawl";
  c.command.v_d = Vec3(0.2, 0.0, 0.0);
  return c;
}

inline ScenarioConfig with_overrides(ScenarioConfig cfg, const std::vector<std::string>& overrides) {
  ScenarioFile f{std::move(cfg), {}};
  for (const auto& o : overrides) apply_override(f, o);
  return f.config;
}

// ---------------------------------------------------------------------------
// Helpers over logs

inline std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

/// Mean of `get` over rows with t in [t0, t1]; NaN when the window is empty.
template <typename F>
double window_mean(const SimLog& log, double t0, double t1, F get) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : log.rows)
    if (r.t >= t0 - 1e-12 && r.t <= t1 + 1e-12) {
      sum += get(r);
      ++n;
    }
  return n ? sum / n : std::nan("");
}

inline bool reached(const SimLog& log, double t_end, double dt) {
  return !log.diverged && !log.rows.empty() && log.rows.back().t >= t_end - dt - 1e-9;
}

inline std::string fall_detail(const SimLog& log) {
  return log.diverged ? "diverged at t=" + fmt(log.divergence_time) + " (" + log.divergence_reason + ")" : "";
}

// ---------------------------------------------------------------------------
// Criteria

inline Verdict static_stand(const std::vector<std::string>& ov) {
  const ScenarioConfig cfg = with_overrides(static_stand_scenario(), ov);
  const auto t0 = std::chrono::steady_clock::now();
  const SimLog log = run_scenario(cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!reached(log, cfg.duration, cfg.dt_sim)) return {false, fall_detail(log)};

  const double target = oracle::static_foot_force(cfg.robot.mass, cfg.robot.gravity, kNumLegs);
  const Vec3 p0 = log.rows.front().state.p;
  double drift = 0.0, force_err = 0.0;
  for (const auto& r : log.rows) {
    drift = std::max(drift, (r.state.p - p0).norm());
    if (r.t < cfg.duration - 1.0) continue;  // settled: final second
    for (int i = 0; i < kNumLegs; ++i)
      force_err = std::max(force_err, (r.grf[i] - Vec3(0.0, 0.0, target)).cwiseAbs().maxCoeff());
  }
  const bool pass = force_err <= 0.5 && drift < 0.01 && wall < 10.0;
  return {pass, "max |f - (0,0,mg/4)|=" + fmt(force_err) + " N (tol 0.5), drift=" + fmt(drift) +
                    " m (tol 0.01), runtime=" + fmt(wall) + " s (tol 10)"};
}

inline Verdict trot_straight(const std::vector<std::string>& ov) {
  const ScenarioConfig cfg = with_overrides(trot_scenario(), ov);
  const SimLog log = run_scenario(cfg);
  if (!reached(log, cfg.duration, cfg.dt_sim)) return {false, fall_detail(log)};
  const double vx_err = window_mean(log, 2.0, 5.0, [](const LogRow& r) { return std::abs(r.state.v.x() - 0.5); });
  double z_err = 0.0;
  for (const auto& r : log.rows) z_err = std::max(z_err, std::abs(r.state.p.z() - 0.2));
  const bool pass = vx_err < 0.05 && z_err < 0.04;
  return {pass, "mean |vx-0.5| on [2,5] s=" + fmt(vx_err) + " (tol 0.05), max |pz-0.2|=" + fmt(z_err) +
                    " (tol 0.04)"};
}

inline Verdict grf_ideal(const std::vector<std::string>& ov) {
  const ScenarioConfig cfg = with_overrides(trot_scenario(), ov);
  const SimLog log = run_scenario(cfg);
  if (!reached(log, cfg.duration, cfg.dt_sim)) return {false, fall_detail(log)};
  const double ideal = cfg.robot.mass * cfg.robot.gravity / 2.0;
  double sum = 0.0;
  int n = 0;
  for (const auto& r : log.rows) {
    if (r.t < 2.0) continue;
    for (int i = 0; i < kNumLegs; ++i)
      if (r.contact[i]) {
        sum += r.grf[i].z();
        ++n;
      }
  }
  const double mean = n ? sum / n : 0.0;
  const bool pass = n > 0 && std::abs(mean - ideal) <= 0.3 * ideal;
  return {pass, "mean stance fz on [2,5] s=" + fmt(mean) + " N, ideal mg/2=" + fmt(ideal) + " N (tol +-30%: " +
                    fmt(0.7 * ideal) + ".." + fmt(1.3 * ideal) + ")"};
}

inline Verdict top_speed(const std::vector<std::string>& ov) {
  const ScenarioConfig cfg = with_overrides(top_speed_scenario(), ov);
  const SimLog log = run_scenario(cfg);
  if (!reached(log, cfg.duration, cfg.dt_sim)) return {false, fall_detail(log)};
  const double vx = window_mean(log, 3.0, 6.0, [](const LogRow& r) { return r.state.v.x(); });
  return {vx > 0.9, "mean vx on [3,6] s=" + fmt(vx) + " (need > 0.9)"};
}

inline Verdict turn(const std::vector<std::string>& ov) {
  const ScenarioConfig cfg = with_overrides(turn_scenario(), ov);
  const SimLog log = run_scenario(cfg);
  if (!reached(log, cfg.duration, cfg.dt_sim)) return {false, fall_detail(log)};
  const double target = std::numbers::pi / 4.0;
  const double yaw_err = std::abs(wrap_angle(log.rows.back().euler.yaw - target));

  // Yaw rate after settling: final second, averaged over one gait cycle to
  // remove the stepping ripple.
  const double cycle = gait_table(cfg.gait).cycle();
  const double t_end = log.rows.back().t;
  double worst = 0.0;
  for (const auto& r : log.rows) {
    if (r.t < t_end - 1.0) continue;
    const double rate = window_mean(log, r.t - cycle, r.t, [](const LogRow& x) { return x.state.w_world().z(); });
    worst = std::max(worst, std::abs(rate));
  }
  const bool pass = yaw_err < 0.05 && worst < 0.05;
  return {pass, "final |psi-pi/4|=" + fmt(yaw_err) + " rad (tol 0.05), max cycle-mean |w_psi| in final 1 s=" +
                    fmt(worst) + " rad/s (tol 0.05)"};
}

inline Verdict disturbance(const std::vector<std::string>& ov) {
  const ScenarioConfig cfg = with_overrides(disturbance_scenario(), ov);
  const SimLog log = run_scenario(cfg);
  if (!reached(log, cfg.duration, cfg.dt_sim)) return {false, fall_detail(log)};
  double tilt = 0.0;
  for (const auto& r : log.rows) tilt = std::max({tilt, std::abs(r.euler.roll), std::abs(r.euler.pitch)});
  return {tilt < 0.5, "no fall through " + fmt(cfg.duration) + " s, max |roll|,|pitch|=" + fmt(tilt) +
                          " rad (tol 0.5)"};
}

inline Verdict crawl(const std::vector<std::string>& ov) {
  const ScenarioConfig cfg = with_overrides(crawl_scenario(), ov);
  const SimLog log = run_scenario(cfg);
  if (!reached(log, cfg.duration, cfg.dt_sim)) return {false, fall_detail(log)};
  const double vx = window_mean(log, 2.0, cfg.duration, [](const LogRow& r) { return r.state.v.x(); });
  return {true, "no fall through " + fmt(cfg.duration) + " s, mean vx on [2,5] s=" + fmt(vx)};
}

inline Verdict control_rate(const std::vector<std::string>& ov) {
  const ScenarioConfig cfg = with_overrides(trot_scenario(), ov);
  const SimLog log = run_scenario(cfg);
  const SimSummary s = summarize(log);
  // The variable bound applies to the gait; the settle window loads all four feet.
  int max_vars = 0, settle_vars = 0;
  for (const auto& tk : log.ticks) {
    int& slot = tk.t < cfg.settle_time ? settle_vars : max_vars;
    slot = std::max(slot, tk.num_vars);
  }
  const bool pass = !log.diverged && s.mean_solve_ms < 20.0 && s.p95_solve_ms < 20.0 && max_vars <= 90 &&
                    s.qp_failures == 0 && s.max_kkt < 1e-6;
  return {pass, "mean=" + fmt(s.mean_solve_ms) + " ms, p95=" + fmt(s.p95_solve_ms) + " ms (tol 20), max vars=" +
                    std::to_string(max_vars) + " (<= 90; settle window " + std::to_string(settle_vars) +
                    "), qp failures=" + std::to_string(s.qp_failures) +
                    ", max kkt=" + fmt(s.max_kkt, 3)};
}

inline Verdict qp_suite(const std::vector<std::string>&) {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> n_dist(1, 30);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const ActiveSetSolver solver;
  double worst_kkt = 0.0, worst_box = 0.0;
  int failures = 0, boxes = 0;

  for (int trial = 0; trial < 500; ++trial) {
    const int n = n_dist(rng);
    const MatX H = oracle::random_spd(rng, n);
    VecX G(n);
    for (int i = 0; i < n; ++i) G(i) = 5.0 * normal(rng);

    MatX A;
    VecX b;
    VecX lo, hi;
    const bool box = trial % 2 == 1;
    if (box) {
      // Box constraints as 2n rows; both bounds random with lo < hi.
      lo.resize(n);
      hi.resize(n);
      for (int i = 0; i < n; ++i) {
        lo(i) = -2.0 * uni(rng);
        hi(i) = lo(i) + 0.1 + 2.0 * uni(rng);
      }
      A = MatX::Zero(2 * n, n);
      b.resize(2 * n);
      A.topRows(n).setIdentity();
      A.bottomRows(n) = -MatX::Identity(n, n);
      b << hi, -lo;
    } else {
      // General rows around a known feasible point.
      const int m = std::uniform_int_distribution<int>(0, 60)(rng);
      A.resize(m, n);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = normal(rng);
      VecX u0(n);
      for (int j = 0; j < n; ++j) u0(j) = normal(rng);
      b = A * u0;
      for (int i = 0; i < m; ++i) b(i) += uni(rng);
    }

    const QpSolution sol = solver.solve(H, G, A, b);
    if (sol.status != QpStatus::Optimal) {
      ++failures;
      continue;
    }
    worst_kkt = std::max(worst_kkt, kkt_residuals(H, G, A, b, sol).max());
    if (box) {
      ++boxes;
      const VecX ref = oracle::box_qp_projected_gradient(H, G, lo, hi);
      worst_box = std::max(worst_box, (sol.u_star - ref).cwiseAbs().maxCoeff());
    }
  }
  const bool pass = failures == 0 && worst_kkt < 1e-6 && worst_box < 1e-6;
  return {pass, "500 QPs, failures=" + std::to_string(failures) + ", max kkt=" + fmt(worst_kkt, 3) +
                    " (tol 1e-6), " + std::to_string(boxes) + " box QPs max |u-u_pg|=" + fmt(worst_box, 3) +
                    " (tol 1e-6)"};
}

inline Verdict condensing(const std::vector<std::string>&) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const RobotParams params;
  double worst = 0.0;

  for (int trial = 0; trial < 100; ++trial) {
    const int N = std::uniform_int_distribution<int>(1, 20)(rng);
    ContactSchedule schedule(N);
    for (auto& row : schedule)
      for (auto& c : row) c = uni(rng) < 0.6;
    const QpLayout layout = QpLayout::from_schedule(schedule);

    std::vector<LtvDiscrete> models;
    std::vector<MatX> As, Bs;
    const double psi = 2.0 * std::numbers::pi * uni(rng) - std::numbers::pi;
    for (int k = 0; k < N; ++k) {
      const auto& legs = layout.steps[k].legs;
      LtvDiscrete d;
      if (trial % 2 == 0) {
        // Physical models with random lever arms.
        std::vector<Vec3> r;
        for (std::size_t j = 0; j < legs.size(); ++j)
          r.emplace_back(0.2 * normal(rng), 0.1 * normal(rng), -0.2 + 0.02 * normal(rng));
        LtvContinuous sys = legs.empty() ? LtvContinuous{state_matrix(psi), MatX::Zero(kStateDim, 0), {}}
                                         : continuous_ltv(psi, r, legs, params);
        d = discretize_zoh(sys, 0.02);
      } else {
        // Generic near-identity dynamics.
        d.Ad = MpcMatrix::Identity();
        for (int i = 0; i < kStateDim; ++i)
          for (int j = 0; j < kStateDim; ++j) d.Ad(i, j) += 0.05 * normal(rng);
        d.Bd = MatX(kStateDim, layout.steps[k].width);
        for (int i = 0; i < d.Bd.rows(); ++i)
          for (int j = 0; j < d.Bd.cols(); ++j) d.Bd(i, j) = 0.1 * normal(rng);
        d.contact_map = legs;
      }
      models.push_back(d);
      As.push_back(d.Ad);
      Bs.push_back(d.Bd);
    }

    const Condensed c = condense(models, layout);
    VecX x0(kStateDim);
    for (int i = 0; i < kStateDim; ++i) x0(i) = normal(rng);
    VecX U(layout.num_vars);
    for (int i = 0; i < U.size(); ++i) U(i) = 10.0 * normal(rng);
    std::vector<VecX> u_steps;
    for (const auto& s : layout.steps) u_steps.push_back(U.segment(s.offset, s.width));

    const VecX X = c.A_qp * x0 + c.B_qp * U;
    const VecX X_ref = oracle::rollout(As, Bs, x0, u_steps);
    worst = std::max(worst, (X - X_ref).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-10, "100 LTV sequences, max |X_condensed - X_rollout|=" + fmt(worst, 3) + " (tol 1e-10)"};
}

inline Verdict plant_conservation(const std::vector<std::string>&) {
  const RobotParams params;
  const FootForces none;
  const PerLeg<Vec3> feet{};

  // Torque-free tumble: gravity acts at the CoM, so world angular momentum is constant.
  PlantState s;
  s.R = rotation_zyx({0.3, -0.2, 0.7});
  s.w_body = Vec3(2.0, -1.5, 3.0);
  const Vec3 L0 = s.R * params.inertia_body * s.w_body;
  double worst_L = 0.0;
  for (int i = 0; i < 1000; ++i) {
    s = integrate_step(s, none, feet, 1e-3, params);
    const Vec3 L = s.R * params.inertia_body * s.w_body;
    worst_L = std::max(worst_L, (L - L0).norm() / L0.norm());
  }

  // Free fall.
  PlantState f;
  f.p = Vec3(0.1, -0.2, 1.0);
  f.v = Vec3(0.5, 0.3, 2.0);
  const Vec3 p0 = f.p, v0 = f.v;
  double worst_fall = 0.0;
  for (int i = 1; i <= 1000; ++i) {
    f = integrate_step(f, none, feet, 1e-3, params);
    Vec3 p, v;
    oracle::ballistic(p0, v0, params.gravity, i * 1e-3, p, v);
    worst_fall = std::max({worst_fall, (f.p - p).cwiseAbs().maxCoeff(), (f.v - v).cwiseAbs().maxCoeff()});
  }
  const bool pass = worst_L < 1e-6 && worst_fall < 1e-6;
  return {pass, "tumble max rel |dL|=" + fmt(worst_L, 3) + " (tol 1e-6), free fall max err=" + fmt(worst_fall, 3) +
                    " (tol 1e-6)"};
}

inline Verdict kinematics(const std::vector<std::string>&) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> q1(-0.6, 0.6), q2(-1.2, 1.2), q3(0.15, 2.9);
  const LegGeometry geom = LegGeometry::from_robot(RobotParams{});
  double worst_ik = 0.0, worst_jac = 0.0;
  for (int i = 0; i < 1000; ++i) {
    JointState js;
    js.q = Vec3(q1(rng), q2(rng), q3(rng));
    const Vec3 foot = leg_fk(js, geom);
    const Vec3 back = leg_fk(leg_ik(foot, geom), geom);
    worst_ik = std::max(worst_ik, (back - foot).cwiseAbs().maxCoeff());

    const MatX fd = oracle::finite_difference_jacobian(
        [&](const VecX& q) {
          JointState j;
          j.q = q;
          return VecX(leg_fk(j, geom));
        },
        js.q);
    worst_jac = std::max(worst_jac, (MatX(leg_jacobian(js, geom)) - fd).cwiseAbs().maxCoeff());
  }
  const bool pass = worst_ik < 1e-9 && worst_jac < 1e-6;
  return {pass, "1000 samples, max |fk(ik(p))-p|=" + fmt(worst_ik, 3) + " (tol 1e-9), max |J-J_fd|=" +
                    fmt(worst_jac, 3) + " (tol 1e-6)"};
}

inline const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "static_stand", static_stand}, {2, "trot_straight", trot_straight},
      {3, "grf_ideal", grf_ideal},       {4, "top_speed", top_speed},
      {5, "turn", turn},                 {6, "disturbance", disturbance},
      {7, "crawl", crawl},               {8, "control_rate", control_rate},
      {9, "qp_suite", qp_suite},         {10, "condensing", condensing},
      {11, "plant_conservation", plant_conservation}, {12, "kinematics", kinematics},
  };
  return all;
}

/// Runs the selected criteria (all when `only` is empty), prints one line per
/// criterion and returns true iff every selected criterion passed.
inline bool run_all(std::ostream& out, const std::string& only = {}, const std::vector<std::string>& overrides = {}) {
  bool all_pass = true;
  int ran = 0;
  for (const auto& c : criteria()) {
    if (!only.empty() && only != c.name) continue;
    ++ran;
    Verdict v;
    try {
      v = c.check(overrides);
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    all_pass = all_pass && v.pass;
    out << (v.pass ? "PASS" : "FAIL") << "  " << (c.id < 10 ? " " : "") << c.id << "  " << c.name << "  "
        << v.detail << std::endl;
  }
  if (ran == 0) {
    std::string names;
    for (const auto& c : criteria()) names += (names.empty() ? "" : ", ") + c.name;
    throw ConfigError("no criterion named '" + only + "' (valid: " + names + ")");
  }
  return all_pass;
}

}  // namespace quad_mpc::acceptance
