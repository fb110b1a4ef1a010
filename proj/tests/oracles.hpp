#pragma once

// Reference implementations used only by the tests. Each one reaches the
// same quantity as the library through a structurally different route
// (exhaustive enumeration, generic integration, fixed-point iteration) so
// that agreement is evidence rather than tautology.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "stepseq/qp.hpp"
#include "stepseq/sequencer.hpp"

namespace oracles {

struct EnumeratedSolution {
  Eigen::VectorXd x;
  std::vector<int> active_set;
  double objective = 0.0;
};

/// Exhaustive active-set enumeration for small inequality-constrained QPs:
/// try every subset of inequality rows as candidate equalities, solve the
/// resulting saddle system directly, keep the feasible, dual-feasible
/// candidate with the lowest objective. Exponential in the row count, which
/// is fine for the 6-row problems under test.
inline std::optional<EnumeratedSolution> enumerate_qp(const stepseq::QpProblem& p,
                                                      double tol = 1e-9) {
  const int n = static_cast<int>(p.n());
  const int mi = static_cast<int>(p.m_in());
  const int me = static_cast<int>(p.m_eq());

  std::optional<EnumeratedSolution> best;
  for (std::uint32_t mask = 0; mask < (1u << mi); ++mask) {
    std::vector<int> subset;
    for (int i = 0; i < mi; ++i)
      if (mask & (1u << i)) subset.push_back(i);
    const int k = static_cast<int>(subset.size());
    if (me + k > n) continue;

    Eigen::MatrixXd A(me + k, n);
    Eigen::VectorXd b(me + k);
    if (me > 0) {
      A.topRows(me) = p.A_eq;
      b.head(me) = p.b_eq;
    }
    for (int i = 0; i < k; ++i) {
      A.row(me + i) = p.A_in.row(subset[i]);
      b(me + i) = p.b_in(subset[i]);
    }

    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + me + k, n + me + k);
    kkt.topLeftCorner(n, n) = p.H;
    if (me + k > 0) {
      kkt.topRightCorner(n, me + k) = A.transpose();
      kkt.bottomLeftCorner(me + k, n) = A;
    }
    Eigen::VectorXd rhs(n + me + k);
    rhs.head(n) = -p.g;
    rhs.tail(me + k) = b;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd x = sol.head(n);

    // Multipliers for the pinned inequality rows must be nonnegative in the
    // convention H x + g - A_in' u + A_eq' w = 0, i.e. u = -lambda.
    bool dual_ok = true;
    for (int i = 0; i < k; ++i)
      if (-sol(n + me + i) < -tol) dual_ok = false;
    if (!dual_ok) continue;

    bool feasible = true;
    for (int i = 0; i < mi; ++i)
      if (p.A_in.row(i).dot(x) - p.b_in(i) < -tol) feasible = false;
    if (me > 0 && (p.A_eq * x - p.b_eq).cwiseAbs().maxCoeff() > tol) feasible = false;
    if (!feasible) continue;

    const double obj = 0.5 * x.dot(p.H * x) + p.g.dot(x);
    if (!best || obj < best->objective - 1e-12) {
      best = EnumeratedSolution{x, subset, obj};
    } else if (obj < best->objective + 1e-12 &&
               subset.size() < best->active_set.size()) {
      best = EnumeratedSolution{x, subset, obj};
    }
  }
  return best;
}

/// Random feasible-by-construction QP in the shape of the step problem:
/// five variables, six inequality rows, two equality rows. A strictly
/// feasible witness x0 fixes the right sides, so every draw has a solution.
inline stepseq::QpProblem random_qp(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int n = 5, mi = 6, me = 2;

  stepseq::QpProblem p;
  Eigen::MatrixXd B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = gauss(rng);
  p.H = B.transpose() * B + 0.1 * Eigen::MatrixXd::Identity(n, n);
  p.g = Eigen::VectorXd(n);
  for (int i = 0; i < n; ++i) p.g(i) = 2.0 * gauss(rng);

  Eigen::VectorXd x0(n);
  for (int i = 0; i < n; ++i) x0(i) = gauss(rng);
  p.A_in = Eigen::MatrixXd(mi, n);
  for (int i = 0; i < mi; ++i)
    for (int j = 0; j < n; ++j) p.A_in(i, j) = gauss(rng);
  p.b_in = Eigen::VectorXd(mi);
  for (int i = 0; i < mi; ++i) p.b_in(i) = p.A_in.row(i).dot(x0) - 0.4 * unif(rng);

  p.A_eq = Eigen::MatrixXd(me, n);
  for (int i = 0; i < me; ++i)
    for (int j = 0; j < n; ++j) p.A_eq(i, j) = gauss(rng);
  p.b_eq = p.A_eq * x0;
  return p;
}

/// Generic fixed-step RK4 integration of the pendulum pair
///   c'    = omega0 (zeta - c)
///   zeta' = omega0 (zeta - p0)
/// used to cross-check the closed-form propagation.
struct PendulumState {
  stepseq::Vec2 c, zeta;
};

inline PendulumState rk4_pendulum(const PendulumState& s0, const stepseq::Vec2& p0,
                                  double omega0, double duration, int n_steps = 4000) {
  auto deriv = [&](const PendulumState& s) {
    PendulumState d;
    d.c = omega0 * (s.zeta - s.c);
    d.zeta = omega0 * (s.zeta - p0);
    return d;
  };
  auto axpy = [](const PendulumState& s, double h, const PendulumState& d) {
    return PendulumState{s.c + h * d.c, s.zeta + h * d.zeta};
  };
  PendulumState s = s0;
  const double h = duration / n_steps;
  for (int i = 0; i < n_steps; ++i) {
    const PendulumState k1 = deriv(s);
    const PendulumState k2 = deriv(axpy(s, h / 2, k1));
    const PendulumState k3 = deriv(axpy(s, h / 2, k2));
    const PendulumState k4 = deriv(axpy(s, h, k3));
    s.c += (h / 6) * (k1.c + 2 * k2.c + 2 * k3.c + k4.c);
    s.zeta += (h / 6) * (k1.zeta + 2 * k2.zeta + 2 * k3.zeta + k4.zeta);
  }
  return s;
}

/// Steady-gait DCM offset by backward fixed-point iteration: the offset at
/// contact k satisfies b_k = (b_{k+1} + disp_{k+1}) / E where disp is the
/// nominal displacement of the next step and E = e^{omega0 T_nom}. The map
/// contracts with factor 1/E, so a few hundred alternating iterations pin
/// the period-2 fixed point to machine precision.
inline stepseq::Vec2 iterate_nominal_offset(const stepseq::SequencerParams& params,
                                            stepseq::Side side_next, int iters = 200) {
  const double E = params.gamma_of(params.T_nom);
  stepseq::Vec2 b = stepseq::Vec2::Zero();
  stepseq::Side side = side_next;
  // Each backward application steps to the previous contact and flips the
  // direction label; pairs of applications return to side_next, so the
  // result is the offset at a side_next landing.
  for (int i = 0; i < 2 * iters; ++i) {
    const stepseq::Vec2 disp(params.l_nom, params.lateral(side).nom);
    b = (b + disp) / E;
    side = stepseq::other(side);
  }
  return b;
}

/// Least-squares plane fit y ~ a + sx * tx + sy * ty. Returns (a, sx, sy).
inline Eigen::Vector3d fit_plane(const std::vector<stepseq::Vec2>& thetas,
                                 const std::vector<double>& values) {
  Eigen::MatrixXd X(thetas.size(), 3);
  Eigen::VectorXd y(values.size());
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = thetas[i].x();
    X(i, 2) = thetas[i].y();
    y(i) = values[i];
  }
  return X.colPivHouseholderQr().solve(y);
}

/// Random stance contexts for derivative cross-checks. The measured DCM is
/// the zero-residual value for the stance plus Gaussian exploration noise,
/// which yields a healthy mix of interior and bound-active solutions.
struct ContextSampler {
  std::mt19937_64 rng;
  std::normal_distribution<double> gauss{0.0, 1.0};
  std::uniform_real_distribution<double> unif{0.0, 1.0};

  explicit ContextSampler(std::uint64_t seed) : rng(seed) {}

  stepseq::StanceContext draw(const stepseq::SequencerParams& params, double noise) {
    stepseq::StanceContext ctx;
    ctx.p0 = stepseq::Vec2(0.6 * unif(rng) - 0.3, 0.6 * unif(rng) - 0.3);
    ctx.t = 0.3 * unif(rng);
    ctx.side_next = unif(rng) < 0.5 ? stepseq::Side::neg : stepseq::Side::pos;
    const stepseq::Vec2 b_nom = nominal_dcm_offset(params, ctx.side_next);
    const stepseq::Vec2 p_nom =
        ctx.p0 + stepseq::Vec2(params.l_nom, params.lateral(ctx.side_next).nom);
    const stepseq::Vec2 zeta_T = p_nom + b_nom;
    // Measurement that makes the nominal tuple satisfy the contact equation
    // exactly: the timing target t + T_nom cancels the decay over t, leaving
    // one nominal-duration decay between measurement and contact. Noise then
    // moves the optimum off (or onto) the bounds.
    ctx.zeta_hat = ctx.p0 + (zeta_T - ctx.p0) / params.gamma_of(params.T_nom);
    ctx.zeta_hat.x() += noise * gauss(rng);
    ctx.zeta_hat.y() += noise * gauss(rng);
    return ctx;
  }
};

}  // namespace oracles
