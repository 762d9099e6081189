#pragma once

// Per-leg stance/swing state machine driven by dwell time, with an optional
// full-stance settling window before the gait starts.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "quad_mpc/common.hpp"

namespace quad_mpc {

struct GaitParams {
  std::string name;
  double t_stance = 0.0;
  double t_swing = 0.0;
  PerLeg<double> phase_offsets{0.0, 0.0, 0.0, 0.0};  // cycle fraction at which stance begins

  double cycle() const { return t_stance + t_swing; }

  void validate() const {
    if (!(t_stance > 0.0) || !(t_swing > 0.0))
      throw ConfigError("gait '" + name + "': stance and swing durations must be > 0");
    for (double o : phase_offsets)
      if (!(o >= 0.0 && o < 1.0)) throw ConfigError("gait '" + name + "': offsets must lie in [0,1)");
  }
};

inline const std::vector<std::string>& gait_names() {
  static const std::vector<std::string> names{"trot", "bound", "pacing", "gallop", "trot_run", "crawl"};
  return names;
}

/// Stance/swing durations for the named gait. Offsets are in FL, FR, RL, RR order.
inline GaitParams gait_table(const std::string& name) {
  if (name == "trot") return {name, 0.10, 0.18, {0.0, 0.5, 0.5, 0.0}};
  if (name == "bound") return {name, 0.12, 0.12, {0.0, 0.0, 0.5, 0.5}};
  if (name == "pacing") return {name, 0.08, 0.20, {0.0, 0.5, 0.0, 0.5}};
  if (name == "gallop") return {name, 0.08, 0.20, {0.0, 0.1, 0.5, 0.6}};
  if (name == "trot_run") return {name, 0.12, 0.20, {0.0, 0.5, 0.5, 0.0}};
  if (name == "crawl") return {name, 0.30, 0.10, {0.0, 0.5, 0.75, 0.25}};
  std::string valid;
  for (const auto& n : gait_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw UnknownGait("unknown gait '" + name + "' (valid: " + valid + ")");
}

enum class LegMode { Stance, Swing };

struct LegPhase {
  LegMode mode = LegMode::Stance;
  double dwell = 0.0;  // time spent in the current mode
  double phase = 0.0;  // dwell / mode duration, in [0,1]
};

struct FsmState {
  PerLeg<LegPhase> legs{};
  double settle_remaining = 0.0;  // full stance until this reaches zero

  /// All legs loaded for `settle` seconds, then the gait starts at cycle phase 0.
  static FsmState full_stance(double settle) {
    FsmState s;
    s.settle_remaining = std::max(0.0, settle);
    return s;
  }

  /// Legs placed at cycle phase 0 of `gait`.
  static FsmState at_gait_onset(const GaitParams& gait) {
    FsmState s;
    const double T = gait.cycle();
    for (int i = 0; i < kNumLegs; ++i) {
      double local = std::fmod(-gait.phase_offsets[i] * T, T);
      if (local < 0.0) local += T;
      if (local >= T - kGuardEps) local = 0.0;
      LegPhase& leg = s.legs[i];
      if (local < gait.t_stance - kGuardEps) {
        leg.mode = LegMode::Stance;
        leg.dwell = local;
        leg.phase = local / gait.t_stance;
      } else {
        leg.mode = LegMode::Swing;
        leg.dwell = std::max(0.0, local - gait.t_stance);
        leg.phase = leg.dwell / gait.t_swing;
      }
    }
    return s;
  }

  bool settling() const { return settle_remaining > 0.0; }

  static constexpr double kGuardEps = 1e-9;
};

inline double mode_duration(LegMode mode, const GaitParams& gait) {
  return mode == LegMode::Stance ? gait.t_stance : gait.t_swing;
}

/// Advance every leg's dwell time by dt; the guard dwell >= duration toggles
/// the mode and resets dwell, carrying the overshoot into the new mode.
inline FsmState advance(const FsmState& fsm, const GaitParams& gait, double dt) {
  FsmState s = fsm;
  double remaining = std::max(0.0, dt);
  if (remaining == 0.0) return s;

  if (s.settle_remaining > 0.0) {
    const double used = std::min(s.settle_remaining, remaining);
    s.settle_remaining -= used;
    remaining -= used;
    if (s.settle_remaining > FsmState::kGuardEps) return s;
    s = FsmState::at_gait_onset(gait);
  }

  for (LegPhase& leg : s.legs) {
    double t = leg.dwell + remaining;
    double duration = mode_duration(leg.mode, gait);
    while (t >= duration - FsmState::kGuardEps) {
      t = std::max(0.0, t - duration);
      leg.mode = leg.mode == LegMode::Stance ? LegMode::Swing : LegMode::Stance;
      duration = mode_duration(leg.mode, gait);
    }
    leg.dwell = t;
    leg.phase = std::clamp(t / duration, 0.0, 1.0);
  }
  return s;
}

inline PerLeg<bool> contact_state(const FsmState& fsm) {
  PerLeg<bool> c{};
  for (int i = 0; i < kNumLegs; ++i) c[i] = fsm.settling() || fsm.legs[i].mode == LegMode::Stance;
  return c;
}

/// Contact pattern over the horizon; row k holds the contacts in effect over
/// [k dt, (k+1) dt), i.e. row 0 is the current pattern.
inline std::vector<PerLeg<bool>> predict_contacts(const FsmState& fsm, const GaitParams& gait, int N,
                                                  double dt) {
  std::vector<PerLeg<bool>> rows;
  rows.reserve(std::max(N, 0));
  FsmState s = fsm;
  for (int k = 0; k < N; ++k) {
    rows.push_back(contact_state(s));
    s = advance(s, gait, dt);
  }
  return rows;
}

}  // namespace quad_mpc
