#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stepseq/sequencer.hpp"

namespace stepseq {

class WeakActivity : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularJacobian : public std::runtime_error {
 public:
  SingularJacobian(const std::string& what, double cond)
      : std::runtime_error(what), condition_number(cond) {}
  double condition_number;
};

/// A solved step QP bundled with its multipliers, the unit at which the
/// implicit-function theorem is applied.
struct KktPoint {
  Vec5 x;
  Eigen::Matrix<double, 6, 1> u;
  Vec2 w;
  StepProblem problem;
};

inline KktPoint make_kkt_point(const StepProblem& problem, const QpSolution& sol) {
  KktPoint pt;
  pt.x = sol.x;
  pt.u = sol.u;
  pt.w = sol.w;
  pt.problem = problem;
  return pt;
}

/// Tangent of the full KKT triplet with respect to the two DCM measurement
/// perturbation components. Rows are ordered (p_x, p_y, Gamma, b_x, b_y,
/// u_1..u_6, w_1, w_2); columns are (theta_x, theta_y).
struct SensitivityResult {
  Eigen::Matrix<double, 13, 2> d_full;
  Eigen::Matrix<double, 5, 2> d_primal;
  double kkt_condition_number = 0.0;
};

/// The equality constraints as a parametric family h_j(x) + theta_j c_j(x) = 0.
/// With h_j built at the measured DCM, the perturbed constraint is exactly the
/// DCM dynamics equality for measurement zeta_hat + theta:
///   h_j + theta_j c_j = p_j + b_j - p0_j - (zeta_hat_j + theta_j - p0_j) e^{-omega0 t} Gamma.
struct PerturbedEqualityTerms {
  Eigen::Matrix<double, 5, 2> grad_h;  // columns are the constraint gradients
  Vec5 grad_c;                         // shared by both c_j (Gamma slot only)
  double decay = 1.0;                  // e^{-omega0 t}
  Vec2 rhs;                            // p0

  /// Equality residuals h(x).
  Vec2 h(const Vec5& x) const { return grad_h.transpose() * x - rhs; }
  /// Perturbation coefficients c_j(x) = -e^{-omega0 t} Gamma, equal per axis.
  Vec2 c(const Vec5& x) const { return Vec2::Constant(-decay * x(2)); }
};

inline PerturbedEqualityTerms perturbed_equality_terms(const StepProblem& problem) {
  PerturbedEqualityTerms terms;
  terms.grad_h = problem.qp.A_eq.transpose();
  terms.grad_c = Vec5::Zero();
  terms.grad_c(2) = -problem.decay;
  terms.decay = problem.decay;
  terms.rhs = problem.qp.b_eq;
  return terms;
}

inline PerturbedEqualityTerms perturbed_equality_terms(const SequencerParams& params,
                                                       const StanceContext& ctx) {
  return perturbed_equality_terms(build_problem(params, ctx));
}

namespace detail {

inline void check_strict_complementarity(const KktPoint& pt, double tol) {
  const QpProblem& qp = pt.problem.qp;
  for (int i = 0; i < 6; ++i) {
    const double gi = qp.A_in.row(i).dot(pt.x) - qp.b_in(i);
    if (gi <= tol && pt.u(i) <= tol)
      throw WeakActivity("sensitivity: constraint " + std::to_string(i) +
                         " is weakly active (g and u both near zero)");
  }
}

}  // namespace detail

/// Jacobians of the KKT residual map F(x, u, w; theta) = 0 at the solved
/// point: 13x13 state block and 13x2 parameter block. Row layout matches
/// SensitivityResult; the Hessian block is the exact objective Hessian
/// 2 diag(alpha). Requires strict complementarity.
inline std::pair<Eigen::Matrix<double, 13, 13>, Eigen::Matrix<double, 13, 2>>
assemble_kkt_jacobians(const KktPoint& pt, double strict_tol = 1e-8) {
  detail::check_strict_complementarity(pt, strict_tol);
  const QpProblem& qp = pt.problem.qp;

  Eigen::Matrix<double, 13, 13> J_state = Eigen::Matrix<double, 13, 13>::Zero();
  J_state.block<5, 5>(0, 0) = qp.H;
  J_state.block<5, 6>(0, 5) = -qp.A_in.transpose();
  J_state.block<5, 2>(0, 11) = qp.A_eq.transpose();
  for (int i = 0; i < 6; ++i) {
    J_state.block<1, 5>(5 + i, 0) = pt.u(i) * qp.A_in.row(i);
    J_state(5 + i, 5 + i) = qp.A_in.row(i).dot(pt.x) - qp.b_in(i);
  }
  J_state.block<2, 5>(11, 0) = qp.A_eq;

  // Second-order sufficiency: the Hessian must stay positive definite on the
  // tangent space of the active constraints. H is diagonal positive here, so
  // this can only fail on a malformed problem, but it is cheap to verify.
  {
    const Eigen::VectorXd hd = qp.H.diagonal();
    if (hd.minCoeff() <= 0.0)
      throw SingularJacobian("sensitivity: Hessian not positive definite", 0.0);
  }

  Eigen::Matrix<double, 13, 2> J_theta = Eigen::Matrix<double, 13, 2>::Zero();
  const PerturbedEqualityTerms terms = perturbed_equality_terms(pt.problem);
  const Vec2 c = terms.c(pt.x);
  for (int j = 0; j < 2; ++j) {
    J_theta(2, j) = terms.grad_c(2) * pt.w(j);  // C* diag(w), Gamma row
    J_theta(11 + j, j) = c(j);                  // diag(c_j)
  }
  return {J_state, J_theta};
}

/// d(x*, u*, w*)/d(theta) = -J_state^{-1} J_theta, solved on the reduced
/// system (primal, active multipliers, equality multipliers) so the rows of
/// inactive multipliers are zero exactly, not merely to rounding.
inline SensitivityResult dcm_sensitivity(const StepProblem& problem, const QpSolution& sol,
                                         double strict_tol = 1e-8) {
  const KktPoint pt = make_kkt_point(problem, sol);
  auto [J_state, J_theta] = assemble_kkt_jacobians(pt, strict_tol);

  SensitivityResult result;
  {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J_state);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    result.kkt_condition_number =
        smin > 0 ? smax / smin : std::numeric_limits<double>::infinity();
  }

  const std::vector<int>& act = sol.active_set;
  const int na = static_cast<int>(act.size());
  const int dim = 7 + na;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(dim, dim);
  K.topLeftCorner(5, 5) = problem.qp.H;
  for (int j = 0; j < na; ++j) {
    K.block(0, 5 + j, 5, 1) = -problem.qp.A_in.row(act[j]).transpose();
    K.block(5 + j, 0, 1, 5) = problem.qp.A_in.row(act[j]);
  }
  K.block(0, 5 + na, 5, 2) = problem.qp.A_eq.transpose();
  K.block(5 + na, 0, 2, 5) = problem.qp.A_eq;

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(dim, 2);
  for (int j = 0; j < 2; ++j) {
    rhs.block(0, j, 5, 1) = -J_theta.block<5, 1>(0, j);
    rhs(5 + na + j, j) = -J_theta(11 + j, j);
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  if (!lu.isInvertible())
    throw SingularJacobian("sensitivity: KKT Jacobian is singular",
                           result.kkt_condition_number);
  const Eigen::MatrixXd dz = lu.solve(rhs);

  result.d_full.setZero();
  result.d_full.topRows<5>() = dz.topRows(5);
  for (int j = 0; j < na; ++j) result.d_full.row(5 + act[j]) = dz.row(5 + j);
  result.d_full.bottomRows<2>() = dz.bottomRows(2);
  result.d_primal = result.d_full.topRows<5>();
  return result;
}

inline SensitivityResult dcm_sensitivity(const SequencerParams& params,
                                         const StanceContext& ctx) {
  const StepSolution s = solve_step_full(params, ctx);
  return dcm_sensitivity(s.problem, s.qp);
}

inline SensitivityResult dcm_sensitivity(const SequencerParams& params,
                                         const StanceContext& ctx,
                                         const TimingWindow& window) {
  const StepSolution s = solve_step_full(params, ctx, window);
  return dcm_sensitivity(s.problem, s.qp);
}

/// Central-difference re-solve of the perturbed QP, the ground truth the
/// analytic tangent is validated against. Samples where the active set
/// changes across the stencil are flagged (the tangent is one-sided there).
struct FdSensitivity {
  Eigen::Matrix<double, 5, 2> d;
  bool active_consistent = true;
};

inline FdSensitivity central_difference_sensitivity(const SequencerParams& params,
                                                    const StanceContext& ctx,
                                                    const TimingWindow& window,
                                                    double delta = 1e-5) {
  const StepSolution base = solve_step_full(params, ctx, window);
  FdSensitivity fd;
  for (int axis = 0; axis < 2; ++axis) {
    StanceContext plus = ctx, minus = ctx;
    plus.zeta_hat(axis) += delta;
    minus.zeta_hat(axis) -= delta;
    const StepSolution sp = solve_step_full(params, plus, window);
    const StepSolution sm = solve_step_full(params, minus, window);
    fd.d.col(axis) = (sp.qp.x - sm.qp.x) / (2.0 * delta);
    if (sp.qp.active_set != base.qp.active_set || sm.qp.active_set != base.qp.active_set)
      fd.active_consistent = false;
  }
  return fd;
}

inline FdSensitivity central_difference_sensitivity(const SequencerParams& params,
                                                    const StanceContext& ctx,
                                                    double delta = 1e-5) {
  return central_difference_sensitivity(
      params, ctx,
      TimingWindow{ctx.t + params.T_min, ctx.t + params.T_max, ctx.t + params.T_nom}, delta);
}

/// One row of the perturbation-response surface: the re-solved optimum at
/// measurement zeta_hat + theta.
struct SurfaceSample {
  Vec2 theta;
  Vec5 x = Vec5::Zero();
  bool solved = false;
  bool active_match = false;
};

/// Re-solve the step QP across a cloud of measurement perturbations.
/// Individual failures are recorded per row and never abort the sweep.
inline std::vector<SurfaceSample> solution_surface(const SequencerParams& params,
                                                   const StanceContext& ctx,
                                                   const std::vector<Vec2>& theta_samples) {
  const StepSolution base = solve_step_full(params, ctx);
  std::vector<SurfaceSample> rows;
  rows.reserve(theta_samples.size());
  for (const Vec2& theta : theta_samples) {
    SurfaceSample row;
    row.theta = theta;
    StanceContext perturbed = ctx;
    perturbed.zeta_hat += theta;
    try {
      const StepSolution s = solve_step_full(params, perturbed);
      row.x = s.qp.x;
      row.solved = true;
      row.active_match = s.qp.active_set == base.qp.active_set;
    } catch (const QpError&) {
      row.solved = false;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace stepseq
