#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "stepseq/sequencer.hpp"

namespace stepseq {

class SequenceOverflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A chained plan of footsteps covering a receding horizon, with the
/// predicted DCM at each contact (zeta = p + b).
struct StepSequence {
  std::vector<Step> steps;
  double t0 = 0.0;
  double horizon = 0.0;
  std::vector<Vec2> zeta_chain;
};

/// Chain single-step solves until the planned contact times cover H_u
/// seconds: each solution becomes the next stance origin, with the predicted
/// contact DCM p + b standing in for the measurement. The initial seed keeps
/// a zero DCM-offset slot; that slot never enters the next problem (only p
/// and the contact time do), so the literal zero is inert.
inline StepSequence generate_sequence(const SequencerParams& params,
                                      const StanceContext& initial_ctx, double H_u,
                                      int max_steps = 64) {
  if (H_u < 0) throw std::invalid_argument("horizon: H_u must be nonnegative");
  params.validate();

  StepSequence seq;
  seq.t0 = initial_ctx.t;
  seq.horizon = H_u;

  StanceContext ctx = initial_ctx;
  while (true) {
    if (static_cast<int>(seq.steps.size()) >= max_steps)
      throw SequenceOverflow("horizon: step cap (" + std::to_string(max_steps) +
                             ") exceeded before covering the horizon");
    StepSolution sol;
    try {
      sol = solve_step_full(params, ctx);
    } catch (const QpError& e) {
      throw QpError(e.code, "horizon: step " + std::to_string(seq.steps.size()) +
                                ": " + e.what());
    }
    seq.steps.push_back(sol.step);
    seq.zeta_chain.push_back(sol.step.p_T + sol.step.b_T);
    if (sol.step.T >= seq.t0 + H_u) break;
    ctx.p0 = sol.step.p_T;
    ctx.t = sol.step.T;
    ctx.zeta_hat = seq.zeta_chain.back();
    ctx.side_next = other(ctx.side_next);
  }
  return seq;
}

/// Swing-foot height profile: a quartic that starts and ends at zero height
/// and zero vertical velocity and peaks at h_apex mid-swing.
inline double swing_height_reference(double t, double t_f, double h_apex) {
  if (!(t_f > 0)) throw std::domain_error("swing: t_f must be positive");
  if (t < 0 || t > t_f) throw std::domain_error("swing: t outside [0, t_f]");
  const double t2 = t * t;
  return (16.0 * h_apex / (t_f * t_f * t_f * t_f)) * t2 * t2 -
         (32.0 * h_apex / (t_f * t_f * t_f)) * t2 * t +
         (16.0 * h_apex / (t_f * t_f)) * t2;
}

/// CoM position reached at the horizon end when the DCM is held at its last
/// predicted contact value: the stable mode decays from the contact instant,
///   c*(H_u) = (c - zeta) e^{omega0 (T - H_u)} + zeta,   T <= H_u.
inline Vec2 com_terminal_reference(const Vec2& c_hat, const Vec2& zeta_hat, double T,
                                   double H_u, double omega0) {
  if (T > H_u)
    throw std::domain_error("com reference: contact time must not exceed the horizon");
  return (c_hat - zeta_hat) * std::exp(omega0 * (T - H_u)) + zeta_hat;
}

}  // namespace stepseq
