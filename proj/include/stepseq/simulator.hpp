#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "stepseq/horizon.hpp"
#include "stepseq/sequencer.hpp"

namespace stepseq {

/// Point-mass walker state between contacts. The CoM rate is redundant with
/// (c, zeta) through zeta = c + c_dot / omega0 and is carried explicitly so
/// trace rows and impulse handling stay straightforward.
struct LipmState {
  Vec2 c = Vec2::Zero();
  Vec2 c_dot = Vec2::Zero();
  Vec2 zeta = Vec2::Zero();
  Vec2 p0 = Vec2::Zero();
  double t_abs = 0.0;
  double t_contact = 0.0;
  Side support = Side::neg;
};

/// Advance the state dt seconds under a fixed stance point, using the exact
/// solutions of the linear dynamics:
///   zeta' = p0 + (zeta - p0) e^{omega0 dt}
///   c'    = p0 + (c - p0) e^{-omega0 dt} + (zeta - p0) sinh(omega0 dt)
/// with c_dot recovered from the identity c_dot = omega0 (zeta - c).
inline LipmState propagate(const LipmState& s, double dt, double omega0) {
  if (dt < 0) throw std::domain_error("propagate: dt must be nonnegative");
  LipmState n = s;
  const double up = std::exp(omega0 * dt);
  const double dn = std::exp(-omega0 * dt);
  n.zeta = s.p0 + (s.zeta - s.p0) * up;
  n.c = s.p0 + (s.c - s.p0) * dn + (s.zeta - s.p0) * std::sinh(omega0 * dt);
  n.c_dot = omega0 * (n.zeta - n.c);
  n.t_abs = s.t_abs + dt;
  return n;
}

/// Instantaneous DCM displacement: the CoM position cannot jump, the rate
/// jumps by delta_zeta * omega0, so the DCM jumps by delta_zeta.
inline LipmState apply_dcm_shift(const LipmState& s, const Vec2& delta_zeta,
                                 double omega0) {
  LipmState n = s;
  n.zeta += delta_zeta;
  n.c_dot += omega0 * delta_zeta;
  return n;
}

/// External impulse J (N s) on a walker of the given mass: the CoM rate jumps
/// by J / mass, equivalent to a DCM shift of J / (mass * omega0).
inline LipmState apply_push(const LipmState& s, const Vec2& impulse, double mass,
                            double omega0) {
  if (!(mass > 0)) throw std::domain_error("push: mass must be positive");
  return apply_dcm_shift(s, impulse / (mass * omega0), omega0);
}

/// Exchange support at the planned landing location (plus any slip offset).
/// The CoM, its rate, and the DCM are continuous across the exchange; only
/// the stance point, the support label, and the contact clock change.
inline LipmState touchdown(const LipmState& s, const Step& step,
                           const Vec2& slip = Vec2::Zero()) {
  LipmState n = s;
  n.p0 = step.p_T + slip;
  n.support = step.side;
  n.t_contact = s.t_abs;
  return n;
}

/// One entry of the walking-command schedule; takes effect at time t and
/// holds until the next entry. w_nom is a magnitude applied symmetrically to
/// both step directions.
struct CommandPhase {
  double t = 0.0;
  double l_nom = 0.1;
  double w_nom = 0.25;
  double T_nom = 0.3;
};

struct PushEvent {
  double t = 0.0;
  Vec2 delta_zeta = Vec2::Zero();
};

struct SlipEvent {
  int step_index = 0;
  Vec2 offset = Vec2::Zero();
};

/// Initial walker configuration: stance point, true DCM, CoM, and the
/// direction label of the first swing.
struct StartState {
  Vec2 p0 = Vec2(-0.12, -0.10);
  Vec2 zeta = Vec2(-0.12, -0.07);
  Vec2 com = Vec2(-0.12, -0.07);
  Side side_next = Side::pos;
};

/// Closed-loop experiment description: duration, control rate, command
/// schedule, disturbances, and measurement noise.
struct Scenario {
  double duration = 10.0;
  double control_dt = 0.01;
  StartState start;
  std::vector<CommandPhase> commands;
  std::vector<PushEvent> pushes;
  std::vector<SlipEvent> slips;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  double mass = 1.3;
  double swing_apex = 0.05;
  double steady_start = 2.0;

  void validate() const {
    if (!(duration > 0)) throw std::invalid_argument("scenario: duration must be positive");
    if (!(control_dt > 0))
      throw std::invalid_argument("scenario: control_dt must be positive");
    if (!(mass > 0)) throw std::invalid_argument("scenario: mass must be positive");
    if (noise_sigma < 0)
      throw std::invalid_argument("scenario: noise_sigma must be nonnegative");
    if (!(swing_apex >= 0))
      throw std::invalid_argument("scenario: swing_apex must be nonnegative");
    for (const auto& p : pushes)
      if (p.t < 0 || p.t > duration)
        throw std::invalid_argument("scenario: push time outside [0, duration]");
    for (const auto& c : commands)
      if (c.t < 0 || c.t > duration)
        throw std::invalid_argument("scenario: command time outside [0, duration]");
    for (std::size_t i = 1; i < commands.size(); ++i)
      if (commands[i].t < commands[i - 1].t)
        throw std::invalid_argument("scenario: command times must be nondecreasing");
    for (const auto& s : slips)
      if (s.step_index < 0)
        throw std::invalid_argument("scenario: slip step index must be nonnegative");
  }
};

/// One controller-tick snapshot: true state, measured DCM, and the landing
/// target and absolute contact time of the freshly replanned step.
struct TraceRow {
  double t = 0.0;
  Vec2 c = Vec2::Zero();
  Vec2 c_dot = Vec2::Zero();
  Vec2 zeta = Vec2::Zero();
  Vec2 zeta_hat = Vec2::Zero();
  Vec2 p0 = Vec2::Zero();
  Side support = Side::neg;
  double swing_z = 0.0;
  Vec2 plan_p = Vec2::Zero();
  double plan_T = 0.0;
};

struct RunMetrics {
  Vec2 mean_velocity = Vec2::Zero();
  Vec2 target_velocity = Vec2::Zero();
  Vec2 tracking_error = Vec2::Zero();
  int steps_taken = 0;
  std::optional<int> recovery_steps;
  std::optional<double> rise_time;
  std::optional<double> failed_at;
};

struct RunResult {
  std::vector<TraceRow> trace;
  StepSequence steps;
  RunMetrics metrics;
};

namespace detail {

/// First-step timing window for in-flight replanning, anchored to the actual
/// touchdown instant: the landing may not move before the present (or below
/// the minimum swing duration), and once the elapsed swing time passes T_max
/// the window collapses to "land now".
inline TimingWindow replan_window(const SequencerParams& params, double elapsed) {
  TimingWindow w;
  w.T_lo = std::max(params.T_min, elapsed);
  w.T_hi = std::max(params.T_max, w.T_lo);
  w.T_target = std::clamp(params.T_nom, w.T_lo, w.T_hi);
  return w;
}

inline void apply_command(SequencerParams& params, const CommandPhase& c) {
  params.l_nom = c.l_nom;
  params.w_pos.nom = std::abs(c.w_nom);
  params.w_neg.nom = -std::abs(c.w_nom);
  params.T_nom = c.T_nom;
}

}  // namespace detail

/// Simulate closed-loop walking: every control tick measures the DCM (plus
/// optional noise), re-solves the single-step problem from the current
/// stance, and the state advances through any pushes and the planned
/// touchdown inside the tick. Returns the trace, the executed steps, and
/// summary metrics; an infeasible replan stops the run and records the time
/// in metrics.failed_at instead of throwing.
inline RunResult run(const SequencerParams& params, const Scenario& scenario) {
  params.validate();
  scenario.validate();

  RunResult out;
  SequencerParams cur = params;
  const double omega0 = params.omega0();

  std::mt19937_64 rng(scenario.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  LipmState state;
  state.p0 = scenario.start.p0;
  state.zeta = scenario.start.zeta;
  state.c = scenario.start.com;
  state.c_dot = omega0 * (state.zeta - state.c);
  state.support = other(scenario.start.side_next);
  Side side_next = scenario.start.side_next;

  auto pushes = scenario.pushes;
  std::stable_sort(pushes.begin(), pushes.end(),
                   [](const PushEvent& a, const PushEvent& b) { return a.t < b.t; });
  std::size_t push_idx = 0;
  std::size_t cmd_idx = 0;

  std::vector<Vec2> com_at_contact;
  std::vector<double> contact_times;
  double last_switch_time = 0.0;

  const double tick_eps = 1e-12;
  const int n_ticks = static_cast<int>(std::ceil(scenario.duration / scenario.control_dt -
                                                 tick_eps));
  out.steps.t0 = 0.0;
  out.steps.horizon = scenario.duration;

  StepSolution plan;
  bool have_plan = false;

  for (int tick = 0; tick < n_ticks; ++tick) {
    const double t = tick * scenario.control_dt;
    const double t_next = std::min(t + scenario.control_dt, scenario.duration);

    while (cmd_idx < scenario.commands.size() &&
           scenario.commands[cmd_idx].t <= t + tick_eps) {
      detail::apply_command(cur, scenario.commands[cmd_idx]);
      if (cmd_idx > 0) last_switch_time = scenario.commands[cmd_idx].t;
      ++cmd_idx;
    }

    Vec2 zeta_hat = state.zeta;
    if (scenario.noise_sigma > 0) {
      zeta_hat.x() += scenario.noise_sigma * gauss(rng);
      zeta_hat.y() += scenario.noise_sigma * gauss(rng);
    }

    const double elapsed = state.t_abs - state.t_contact;
    StanceContext ctx{state.p0, elapsed, zeta_hat, side_next};
    try {
      plan = solve_step_full(cur, ctx, detail::replan_window(cur, elapsed));
      have_plan = true;
    } catch (const QpError&) {
      out.metrics.failed_at = t;
      break;
    }

    TraceRow row;
    row.t = t;
    row.c = state.c;
    row.c_dot = state.c_dot;
    row.zeta = state.zeta;
    row.zeta_hat = zeta_hat;
    row.p0 = state.p0;
    row.support = state.support;
    row.swing_z = swing_height_reference(std::min(elapsed, plan.step.T), plan.step.T,
                                         scenario.swing_apex);
    row.plan_p = plan.step.p_T;
    row.plan_T = state.t_contact + plan.step.T;
    out.trace.push_back(row);

    const double land_abs = state.t_contact + plan.step.T;
    const bool lands = land_abs <= t_next + tick_eps;
    const double land_time = lands ? std::clamp(land_abs, t, t_next) : 0.0;

    double cursor = t;
    bool landed = false;
    auto do_touchdown = [&] {
      Vec2 slip = Vec2::Zero();
      const int k = static_cast<int>(out.steps.steps.size());
      for (const auto& s : scenario.slips)
        if (s.step_index == k) slip += s.offset;
      Step executed = plan.step;
      executed.T = land_time;
      state = touchdown(state, executed, slip);
      side_next = other(side_next);
      out.steps.steps.push_back(executed);
      out.steps.zeta_chain.push_back(state.zeta);
      com_at_contact.push_back(state.c);
      contact_times.push_back(land_time);
      landed = true;
    };

    while (push_idx < pushes.size() && pushes[push_idx].t <= t_next + tick_eps) {
      const double pt = std::clamp(pushes[push_idx].t, cursor, t_next);
      if (lands && !landed && land_time <= pt) {
        state = propagate(state, land_time - cursor, omega0);
        cursor = land_time;
        do_touchdown();
      }
      state = propagate(state, pt - cursor, omega0);
      state = apply_dcm_shift(state, pushes[push_idx].delta_zeta, omega0);
      cursor = pt;
      ++push_idx;
    }
    if (lands && !landed) {
      state = propagate(state, std::max(land_time, cursor) - cursor, omega0);
      cursor = std::max(land_time, cursor);
      do_touchdown();
    }

    state = propagate(state, t_next - cursor, omega0);
  }

  if (!out.metrics.failed_at && have_plan) {
    TraceRow row;
    row.t = state.t_abs;
    row.c = state.c;
    row.c_dot = state.c_dot;
    row.zeta = state.zeta;
    row.zeta_hat = state.zeta;
    row.p0 = state.p0;
    row.support = state.support;
    const double elapsed = state.t_abs - state.t_contact;
    const double t_f = std::max(plan.step.T, elapsed);
    row.swing_z = swing_height_reference(std::min(elapsed, t_f), t_f, scenario.swing_apex);
    row.plan_p = plan.step.p_T;
    row.plan_T = state.t_contact + plan.step.T;
    out.trace.push_back(row);
  }

  out.metrics.steps_taken = static_cast<int>(out.steps.steps.size());
  out.metrics.target_velocity = Vec2(cur.l_nom / cur.T_nom, 0.0);

  if (out.trace.size() >= 2) {
    std::size_t first = 0;
    while (first + 1 < out.trace.size() &&
           out.trace[first].t < scenario.steady_start - tick_eps)
      ++first;
    if (first + 1 >= out.trace.size()) first = 0;
    const TraceRow& a = out.trace[first];
    const TraceRow& b = out.trace.back();
    if (b.t > a.t) out.metrics.mean_velocity = (b.c - a.c) / (b.t - a.t);
  }
  out.metrics.tracking_error =
      (out.metrics.mean_velocity - out.metrics.target_velocity).cwiseAbs();

  if (!pushes.empty() && !out.steps.steps.empty()) {
    const double last_push = pushes.back().t;
    const double band = 0.02;
    auto width_ok = [&](std::size_t k) {
      const Vec2 prev = k == 0 ? scenario.start.p0 : out.steps.steps[k - 1].p_T;
      const double width = out.steps.steps[k].p_T.y() - prev.y();
      const double nominal = cur.lateral(out.steps.steps[k].side).nom;
      return std::abs(width - nominal) <= band;
    };
    std::size_t first_after = 0;
    while (first_after < out.steps.steps.size() &&
           contact_times[first_after] <= last_push)
      ++first_after;
    std::optional<int> rec;
    for (std::size_t r = first_after; r < out.steps.steps.size(); ++r) {
      bool all_ok = true;
      for (std::size_t k = r; k < out.steps.steps.size(); ++k)
        if (!width_ok(k)) {
          all_ok = false;
          break;
        }
      if (all_ok) {
        rec = static_cast<int>(r - first_after) + 1;
        break;
      }
    }
    out.metrics.recovery_steps = rec;
  }

  if (cmd_idx > 1 && last_switch_time > 0 && out.metrics.target_velocity.x() != 0) {
    const double vx = out.metrics.target_velocity.x();
    auto step_velocity = [&](std::size_t k) {
      return (com_at_contact[k].x() - com_at_contact[k - 1].x()) /
             (contact_times[k] - contact_times[k - 1]);
    };
    for (std::size_t k = 1; k < contact_times.size(); ++k) {
      if (contact_times[k] <= last_switch_time) continue;
      bool all_ok = true;
      for (std::size_t j = k; j < contact_times.size(); ++j)
        if (std::abs(step_velocity(j) - vx) > 0.05 * std::abs(vx)) {
          all_ok = false;
          break;
        }
      if (all_ok) {
        out.metrics.rise_time = contact_times[k] - last_switch_time;
        break;
      }
    }
  }

  return out;
}

}  // namespace stepseq
