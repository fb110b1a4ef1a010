#pragma once

#include <cmath>
#include <stdexcept>

#include "stepseq/qp.hpp"
#include "stepseq/types.hpp"

namespace stepseq {

class InvalidBounds : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Signed lateral bound set for one step direction.
struct LateralBounds {
  double min, nom, max;
};

/// Weights, geometry and timing limits of the single-step QP. Defaults are
/// the walking configuration used throughout the tests.
struct SequencerParams {
  double alpha1 = 1e3;   // landing-position weight
  double alpha2 = 1.0;   // step-timing weight
  double alpha3 = 1e6;   // DCM-offset weight (soft constraint)
  double z_c = 0.31;     // CoM height (m)
  double gravity = 9.81; // m/s^2

  double l_nom = 0.1, l_min = -0.3, l_max = 0.3;        // sagittal step (m)
  LateralBounds w_neg{-0.40, -0.25, -0.10};             // step toward -y (m)
  LateralBounds w_pos{0.10, 0.25, 0.40};                // step toward +y (m)
  double T_nom = 0.3, T_min = 0.1, T_max = 1.0;         // step timing (s)

  /// Natural frequency of the pendulum; computed so the identity
  /// omega0 = sqrt(g / z_c) can never drift from the stored height.
  double omega0() const { return std::sqrt(gravity / z_c); }

  /// Exponential timing variable Gamma(T) = e^{omega0 T}.
  double gamma_of(double T) const { return std::exp(omega0() * T); }

  const LateralBounds& lateral(Side s) const { return s == Side::neg ? w_neg : w_pos; }

  void validate() const {
    if (!(alpha1 > 0 && alpha2 > 0 && alpha3 > 0))
      throw std::invalid_argument("params: weights must be positive");
    if (!(z_c > 0 && gravity > 0))
      throw std::invalid_argument("params: z_c and gravity must be positive");
    if (!(l_min <= l_nom && l_nom <= l_max))
      throw std::invalid_argument("params: sagittal bounds must order l_min <= l_nom <= l_max");
    for (const auto* w : {&w_neg, &w_pos})
      if (!(w->min <= w->nom && w->nom <= w->max))
        throw std::invalid_argument("params: lateral bounds must order min <= nom <= max");
    if (!(0 < T_min && T_min <= T_nom && T_nom <= T_max))
      throw std::invalid_argument("params: timing bounds must order 0 < T_min <= T_nom <= T_max");
  }
};

/// One planned footstep: landing position, timing (both as Gamma and as T)
/// and the DCM offset at contact.
struct Step {
  Vec2 p_T;
  double gamma = 1.0;  // Gamma(T) = e^{omega0 T}
  double T = 0.0;      // ln(gamma)/omega0, on the same clock as StanceContext.t
  Vec2 b_T;
  Side side = Side::pos;
};

/// Where the planner stands: support position p0, the plan-clock time t at
/// which zeta_hat holds (time of the previous contact in chained planning,
/// the replanning instant for a fresh measurement), and the direction of the
/// upcoming step.
struct StanceContext {
  Vec2 p0;
  double t = 0.0;
  Vec2 zeta_hat;
  Side side_next = Side::pos;
};

/// Landing-time window for the upcoming step, in plan-clock seconds.
struct TimingWindow {
  double T_lo, T_hi, T_target;
};

/// Assembled QP plus the context-derived quantities the sensitivity layer
/// needs: the nominal targets, the equality coefficients k = (zeta_hat -
/// p0) e^{-omega0 t}, and the decay factor e^{-omega0 t} itself.
struct StepProblem {
  QpProblem qp;
  Vec5 x_nom;
  Vec2 k;
  double decay = 1.0;
  TimingWindow window{};
};

/// DCM offset that turns the commanded gait into a periodic orbit. The
/// step-to-step map b_{k+1} = E b_k - dp_k (E = e^{omega0 T_nom}) has period
/// 2 laterally; solving the two-step linear system gives
///   b_x = l_nom / (E - 1),
///   b_y = (w_next + E w_after) / (E^2 - 1),
/// where w_next is the displacement of the upcoming step.
inline Vec2 nominal_dcm_offset(const SequencerParams& params, Side side_next) {
  const double E = params.gamma_of(params.T_nom);
  const double w_next = params.lateral(side_next).nom;
  const double w_after = params.lateral(other(side_next)).nom;
  return {params.l_nom / (E - 1.0), (w_next + E * w_after) / (E * E - 1.0)};
}

/// Assemble the 5-variable step QP over x = (p_x, p_y, Gamma, b_x, b_y) with
/// an explicit landing-time window. All constraints use ctx.p0 as origin;
/// the equality rows encode
///   p_T + b_T - p0 - (zeta_hat - p0) e^{-omega0 t} Gamma = 0
/// per axis, which is the DCM propagated from time t to the landing time.
inline StepProblem build_problem(const SequencerParams& params, const StanceContext& ctx,
                                 const TimingWindow& window) {
  params.validate();
  if (ctx.t < 0) throw std::invalid_argument("context: t must be nonnegative");
  if (!(window.T_lo <= window.T_hi))
    throw InvalidBounds("timing window inverted: T_lo > T_hi");

  const LateralBounds& w = params.lateral(ctx.side_next);
  const Vec2 b_nom = nominal_dcm_offset(params, ctx.side_next);

  StepProblem sp;
  sp.window = window;
  sp.decay = std::exp(-params.omega0() * ctx.t);
  sp.k = (ctx.zeta_hat - ctx.p0) * sp.decay;
  sp.x_nom << ctx.p0.x() + params.l_nom, ctx.p0.y() + w.nom, params.gamma_of(window.T_target),
      b_nom.x(), b_nom.y();

  QpProblem& qp = sp.qp;
  Eigen::VectorXd alpha(5);
  alpha << params.alpha1, params.alpha1, params.alpha2, params.alpha3, params.alpha3;
  qp.H = (2.0 * alpha).asDiagonal();
  qp.g = -qp.H * sp.x_nom;

  qp.A_in.setZero(6, 5);
  qp.b_in.resize(6);
  qp.A_in(0, 0) = 1;  qp.b_in(0) = ctx.p0.x() + params.l_min;
  qp.A_in(1, 0) = -1; qp.b_in(1) = -(ctx.p0.x() + params.l_max);
  qp.A_in(2, 1) = 1;  qp.b_in(2) = ctx.p0.y() + w.min;
  qp.A_in(3, 1) = -1; qp.b_in(3) = -(ctx.p0.y() + w.max);
  qp.A_in(4, 2) = 1;  qp.b_in(4) = params.gamma_of(window.T_lo);
  qp.A_in(5, 2) = -1; qp.b_in(5) = -params.gamma_of(window.T_hi);

  qp.A_eq.setZero(2, 5);
  qp.b_eq.resize(2);
  qp.A_eq(0, 0) = 1; qp.A_eq(0, 2) = -sp.k.x(); qp.A_eq(0, 3) = 1;
  qp.A_eq(1, 1) = 1; qp.A_eq(1, 2) = -sp.k.y(); qp.A_eq(1, 4) = 1;
  qp.b_eq = ctx.p0;
  return sp;
}

/// Chained-planning window: the upcoming landing is confined to
/// [t + T_min, t + T_max] with target t + T_nom, i.e. the step-duration
/// limits are measured from the context time.
inline StepProblem build_problem(const SequencerParams& params, const StanceContext& ctx) {
  return build_problem(params, ctx,
                       TimingWindow{ctx.t + params.T_min, ctx.t + params.T_max,
                                    ctx.t + params.T_nom});
}

struct StepSolution {
  Step step;
  QpSolution qp;
  StepProblem problem;
};

inline StepSolution solve_step_full(const SequencerParams& params, const StanceContext& ctx,
                                    const TimingWindow& window) {
  StepSolution out;
  out.problem = build_problem(params, ctx, window);
  out.qp = solve(out.problem.qp);
  const Vec5& x = out.qp.x;
  out.step.p_T = x.head<2>();
  out.step.gamma = x(2);
  out.step.T = std::log(x(2)) / params.omega0();
  out.step.b_T = x.tail<2>();
  out.step.side = ctx.side_next;
  return out;
}

inline StepSolution solve_step_full(const SequencerParams& params, const StanceContext& ctx) {
  return solve_step_full(params, ctx,
                         TimingWindow{ctx.t + params.T_min, ctx.t + params.T_max,
                                      ctx.t + params.T_nom});
}

inline Step solve_step(const SequencerParams& params, const StanceContext& ctx) {
  return solve_step_full(params, ctx).step;
}

inline Step solve_step(const SequencerParams& params, const StanceContext& ctx,
                       const TimingWindow& window) {
  return solve_step_full(params, ctx, window).step;
}

}  // namespace stepseq
