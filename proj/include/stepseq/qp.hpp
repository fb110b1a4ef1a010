#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace stepseq {

/// Dense convex QP in the form
///   min 1/2 x'Hx + g'x   s.t.  A_in x >= b_in,  A_eq x = b_eq
/// with H symmetric positive definite. Inequality rows are kept in a fixed
/// caller-defined order; active sets and multipliers refer to row indices.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A_in;
  Eigen::VectorXd b_in;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;

  Eigen::Index n() const { return H.rows(); }
  Eigen::Index m_in() const { return A_in.rows(); }
  Eigen::Index m_eq() const { return A_eq.rows(); }
};

/// Optimal point with multipliers in the convention
///   Hx + g - A_in' u + A_eq' w = 0,  u >= 0.
struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd u;
  Eigen::VectorXd w;
  std::vector<int> active_set;
  double objective = 0.0;
  int iterations = 0;
};

struct QpTolerances {
  double feasibility = 1e-9;
  double complementarity = 1e-8;
  double strict_complementarity = 1e-8;
};

enum class QpFailure { infeasible, degenerate, singular_kkt };

class QpError : public std::runtime_error {
 public:
  QpError(QpFailure f, const std::string& what) : std::runtime_error(what), code(f) {}
  QpFailure code;
};

namespace detail {

inline void check_problem(const QpProblem& p) {
  const auto n = p.H.rows();
  if (p.H.cols() != n || p.g.size() != n)
    throw std::invalid_argument("qp: H/g dimension mismatch");
  if (p.A_in.rows() != p.b_in.size() || (p.A_in.rows() > 0 && p.A_in.cols() != n))
    throw std::invalid_argument("qp: inequality dimension mismatch");
  if (p.A_eq.rows() != p.b_eq.size() || (p.A_eq.rows() > 0 && p.A_eq.cols() != n))
    throw std::invalid_argument("qp: equality dimension mismatch");
  if (p.A_eq.rows() > n) throw std::invalid_argument("qp: more equalities than variables");
  const double scale = std::max(1.0, p.H.cwiseAbs().maxCoeff());
  if ((p.H - p.H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("qp: H is not symmetric");
}

}  // namespace detail

/// Stationary point of the equality-constrained subproblem
///   min 1/2 x'Hx + g'x  s.t.  Ax = b.
/// Returns (x, lambda) where Hx + g + A'lambda = 0. Callers treating rows of
/// A as active inequalities recover u = -lambda for those rows.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> solve_equality_kkt(
    const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::MatrixXd& A,
    const Eigen::VectorXd& b) {
  const int n = static_cast<int>(H.rows());
  const int k = static_cast<int>(A.rows());
  Eigen::MatrixXd K(n + k, n + k);
  K.setZero();
  K.topLeftCorner(n, n) = H;
  if (k > 0) {
    K.topRightCorner(n, k) = A.transpose();
    K.bottomLeftCorner(k, n) = A;
  }
  Eigen::VectorXd rhs(n + k);
  rhs.head(n) = -g;
  rhs.tail(k) = b;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  if (!lu.isInvertible())
    throw QpError(QpFailure::singular_kkt, "qp: singular KKT system");
  Eigen::VectorXd sol = lu.solve(rhs);
  return {sol.head(n), sol.tail(k)};
}

namespace detail {

/// Primal active-set iteration from a feasible start. Each round solves the
/// equality-constrained subproblem for the working set and either moves all
/// the way there, stops at the first blocking row (lowest index on ties), or
/// drops the lowest-index row with a negative multiplier. The lowest-index
/// rules are Bland's anti-cycling choice and also make solves bitwise
/// reproducible.
inline QpSolution primal_active_set(const QpProblem& p, Eigen::VectorXd x,
                                    const QpTolerances& tol) {
  const int mi = static_cast<int>(p.m_in());
  const int me = static_cast<int>(p.m_eq());

  std::vector<int> work;
  auto kkt_with = [&](const std::vector<int>& w)
      -> std::pair<Eigen::VectorXd, Eigen::VectorXd> {
    Eigen::MatrixXd A(me + static_cast<int>(w.size()), p.n());
    Eigen::VectorXd b(me + static_cast<int>(w.size()));
    if (me > 0) {
      A.topRows(me) = p.A_eq;
      b.head(me) = p.b_eq;
    }
    for (int j = 0; j < static_cast<int>(w.size()); ++j) {
      A.row(me + j) = p.A_in.row(w[j]);
      b(me + j) = p.b_in(w[j]);
    }
    return solve_equality_kkt(p.H, p.g, A, b);
  };

  Eigen::VectorXd lam;
  const int max_iter = 50 * (mi + 1);
  int iter = 0;
  for (;; ++iter) {
    if (iter >= max_iter)
      throw QpError(QpFailure::degenerate, "qp: active-set iteration cap hit");
    Eigen::VectorXd xhat;
    try {
      std::tie(xhat, lam) = kkt_with(work);
    } catch (const QpError&) {
      // A linearly dependent working set can appear after a degenerate
      // zero-length step; shedding a row restores independence.
      if (work.empty()) throw;
      work.pop_back();
      continue;
    }
    if ((xhat - x).cwiseAbs().maxCoeff() <=
        1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff())) {
      x = xhat;
      int drop = -1;
      for (int j = 0; j < static_cast<int>(work.size()); ++j) {
        if (-lam(me + j) < -1e-10) {
          drop = j;
          break;
        }
      }
      if (drop < 0) break;
      work.erase(work.begin() + drop);
      continue;
    }
    const Eigen::VectorXd dir = xhat - x;
    double alpha = 1.0;
    int blocker = -1;
    for (int i = 0; i < mi; ++i) {
      if (std::find(work.begin(), work.end(), i) != work.end()) continue;
      const double along = p.A_in.row(i).dot(dir);
      if (along >= -1e-14) continue;
      const double slack = p.A_in.row(i).dot(x) - p.b_in(i);
      const double ratio = std::max(0.0, slack) / (-along);
      if (ratio < alpha - 1e-14) {
        alpha = ratio;
        blocker = i;
      }
    }
    x += alpha * dir;
    if (blocker < 0) continue;  // full step; stationarity confirmed next round
    work.insert(std::lower_bound(work.begin(), work.end(), blocker), blocker);
  }

  QpSolution sol;
  sol.x = x;
  sol.w = lam.head(me);
  sol.u = Eigen::VectorXd::Zero(mi);
  for (int j = 0; j < static_cast<int>(work.size()); ++j)
    sol.u(work[j]) = std::max(0.0, -lam(me + j));
  sol.active_set = work;
  sol.objective = 0.5 * x.dot(p.H * x) + p.g.dot(x);
  sol.iterations = iter;
  return sol;
}

inline double max_violation(const QpProblem& p, const Eigen::VectorXd& x) {
  double v = 0.0;
  for (Eigen::Index i = 0; i < p.m_in(); ++i)
    v = std::max(v, p.b_in(i) - p.A_in.row(i).dot(x));
  return v;
}

}  // namespace detail

/// Solve the QP. The equality-constrained minimizer seeds the active-set
/// iteration directly when it is feasible. Otherwise the problem is lifted
/// with one elastic variable s >= 0 relaxing every inequality,
///   min 1/2 x'Hx + g'x + 1/2 rho s^2 + M s,
/// which has an obvious strictly feasible start. For M above the multiplier
/// mass of the original problem this penalty is exact: s = 0 at the optimum
/// and the (x, u, w) block is the original KKT point. M grows geometrically
/// until that happens; a residual s bounded away from zero at the largest M
/// means the constraints are genuinely inconsistent.
inline QpSolution solve(const QpProblem& p, const QpTolerances& tol = {}) {
  detail::check_problem(p);
  const int n = static_cast<int>(p.n());
  const int mi = static_cast<int>(p.m_in());
  const int me = static_cast<int>(p.m_eq());

  Eigen::VectorXd x_eq;
  {
    Eigen::MatrixXd A(me, n);
    Eigen::VectorXd b(me);
    if (me > 0) {
      A = p.A_eq;
      b = p.b_eq;
    }
    std::tie(x_eq, std::ignore) = solve_equality_kkt(p.H, p.g, A, b);
  }
  if (detail::max_violation(p, x_eq) <= tol.feasibility)
    return detail::primal_active_set(p, x_eq, tol);

  QpProblem lift;
  lift.H = Eigen::MatrixXd::Zero(n + 1, n + 1);
  lift.H.topLeftCorner(n, n) = p.H;
  const double h_scale = std::max(1.0, p.H.cwiseAbs().maxCoeff());
  lift.H(n, n) = h_scale;
  lift.g = Eigen::VectorXd::Zero(n + 1);
  lift.g.head(n) = p.g;
  lift.A_in = Eigen::MatrixXd::Zero(mi + 1, n + 1);
  lift.A_in.topLeftCorner(mi, n) = p.A_in;
  lift.A_in.col(n).setOnes();
  lift.b_in = Eigen::VectorXd::Zero(mi + 1);
  lift.b_in.head(mi) = p.b_in;
  lift.A_eq = Eigen::MatrixXd::Zero(me, n + 1);
  if (me > 0) lift.A_eq.topLeftCorner(me, n) = p.A_eq;
  lift.b_eq = p.b_eq;

  Eigen::VectorXd start(n + 1);
  start.head(n) = x_eq;
  start(n) = detail::max_violation(p, x_eq) + 1.0;

  double M = 1e3 * std::max(h_scale, p.g.cwiseAbs().maxCoeff());
  int iterations = 0;
  for (int round = 0; round < 6; ++round, M *= 100.0) {
    lift.g(n) = M;
    QpSolution lifted = detail::primal_active_set(lift, start, tol);
    iterations += lifted.iterations;
    if (lifted.x(n) > tol.feasibility) continue;

    QpSolution sol;
    sol.x = lifted.x.head(n);
    sol.u = lifted.u.head(mi);
    sol.w = lifted.w;
    for (int i : lifted.active_set)
      if (i < mi) sol.active_set.push_back(i);
    sol.objective = 0.5 * sol.x.dot(p.H * sol.x) + p.g.dot(sol.x);
    sol.iterations = iterations;
    return sol;
  }
  throw QpError(QpFailure::infeasible, "qp: no feasible point found");
}

}  // namespace stepseq
