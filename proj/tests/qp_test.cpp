#include "stepseq/qp.hpp"

#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

using stepseq::QpProblem;
using stepseq::QpSolution;

namespace {

QpProblem empty_constraints(int n) {
  QpProblem p;
  p.A_in = Eigen::MatrixXd::Zero(0, n);
  p.b_in = Eigen::VectorXd::Zero(0);
  p.A_eq = Eigen::MatrixXd::Zero(0, n);
  p.b_eq = Eigen::VectorXd::Zero(0);
  return p;
}

double stationarity_residual(const QpProblem& p, const QpSolution& s) {
  Eigen::VectorXd r = p.H * s.x + p.g;
  if (p.m_in() > 0) r -= p.A_in.transpose() * s.u;
  if (p.m_eq() > 0) r += p.A_eq.transpose() * s.w;
  return r.cwiseAbs().maxCoeff();
}

}  // namespace

TEST(QpTest, UnconstrainedQuadratic) {
  QpProblem p = empty_constraints(2);
  p.H = Eigen::Vector2d(2.0, 4.0).asDiagonal();
  p.g = Eigen::Vector2d(-2.0, -8.0);
  const QpSolution s = stepseq::solve(p);
  EXPECT_NEAR(s.x(0), 1.0, 1e-12);
  EXPECT_NEAR(s.x(1), 2.0, 1e-12);
  EXPECT_TRUE(s.active_set.empty());
  EXPECT_NEAR(s.objective, -9.0, 1e-12);
}

TEST(QpTest, SingleActiveBound) {
  // min x^2 subject to x >= 1: optimum on the bound, multiplier from
  // 2x - u = 0 at x = 1.
  QpProblem p = empty_constraints(1);
  p.H = Eigen::MatrixXd::Constant(1, 1, 2.0);
  p.g = Eigen::VectorXd::Zero(1);
  p.A_in = Eigen::MatrixXd::Constant(1, 1, 1.0);
  p.b_in = Eigen::VectorXd::Constant(1, 1.0);
  const QpSolution s = stepseq::solve(p);
  EXPECT_NEAR(s.x(0), 1.0, 1e-12);
  ASSERT_EQ(s.active_set, std::vector<int>({0}));
  EXPECT_NEAR(s.u(0), 2.0, 1e-12);
  EXPECT_NEAR(stationarity_residual(p, s), 0.0, 1e-12);
}

TEST(QpTest, InactiveBoundIgnored) {
  QpProblem p = empty_constraints(1);
  p.H = Eigen::MatrixXd::Constant(1, 1, 2.0);
  p.g = Eigen::VectorXd::Constant(1, -4.0);  // minimum at x = 2
  p.A_in = Eigen::MatrixXd::Constant(1, 1, 1.0);
  p.b_in = Eigen::VectorXd::Constant(1, 1.0);
  const QpSolution s = stepseq::solve(p);
  EXPECT_NEAR(s.x(0), 2.0, 1e-12);
  EXPECT_TRUE(s.active_set.empty());
  EXPECT_NEAR(s.u(0), 0.0, 1e-12);
}

TEST(QpTest, EqualityKktMultiplierConvention) {
  // min x'x subject to x1 + x2 = 1: x = (1/2, 1/2) and the returned lambda
  // satisfies Hx + g + A'lambda = 0, so lambda = -1 here.
  Eigen::MatrixXd H = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd A(1, 2);
  A << 1.0, 1.0;
  Eigen::VectorXd b = Eigen::VectorXd::Constant(1, 1.0);
  const auto [x, lam] = stepseq::solve_equality_kkt(H, g, A, b);
  EXPECT_NEAR(x(0), 0.5, 1e-12);
  EXPECT_NEAR(x(1), 0.5, 1e-12);
  ASSERT_EQ(lam.size(), 1);
  EXPECT_NEAR(lam(0), -1.0, 1e-12);
  EXPECT_NEAR((H * x + g + A.transpose() * lam).norm(), 0.0, 1e-12);
}

TEST(QpTest, EqualityKktSingularThrows) {
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd A(2, 2);
  A << 1.0, 1.0, 1.0, 1.0;  // dependent rows make the saddle system singular
  Eigen::VectorXd b(2);
  b << 1.0, 2.0;
  try {
    stepseq::solve_equality_kkt(H, g, A, b);
    FAIL() << "expected QpError";
  } catch (const stepseq::QpError& e) {
    EXPECT_EQ(e.code, stepseq::QpFailure::singular_kkt);
  }
}

TEST(QpTest, InfeasibleThrows) {
  // x >= 1 and -x >= 0 cannot both hold.
  QpProblem p = empty_constraints(1);
  p.H = Eigen::MatrixXd::Constant(1, 1, 2.0);
  p.g = Eigen::VectorXd::Zero(1);
  p.A_in = Eigen::MatrixXd(2, 1);
  p.A_in << 1.0, -1.0;
  p.b_in = Eigen::VectorXd(2);
  p.b_in << 1.0, 0.0;
  try {
    stepseq::solve(p);
    FAIL() << "expected QpError";
  } catch (const stepseq::QpError& e) {
    EXPECT_EQ(e.code, stepseq::QpFailure::infeasible);
  }
}

TEST(QpTest, MalformedProblemRejected) {
  QpProblem p = empty_constraints(2);
  p.H = Eigen::MatrixXd::Identity(2, 2);
  p.H(0, 1) = 0.5;  // not symmetric
  p.g = Eigen::VectorXd::Zero(2);
  EXPECT_THROW(stepseq::solve(p), std::invalid_argument);

  QpProblem q = empty_constraints(2);
  q.H = Eigen::MatrixXd::Identity(2, 2);
  q.g = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(stepseq::solve(q), std::invalid_argument);

  QpProblem r = empty_constraints(2);
  r.H = Eigen::MatrixXd::Identity(2, 2);
  r.g = Eigen::VectorXd::Zero(2);
  r.A_eq = Eigen::MatrixXd::Identity(3, 2);
  r.b_eq = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(stepseq::solve(r), std::invalid_argument);
}

TEST(QpTest, DegenerateVertexTerminates) {
  // Three coincident ways of writing x >= 1 plus a second variable; the
  // redundant rows must not trap the iteration.
  QpProblem p = empty_constraints(2);
  p.H = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  p.g = Eigen::VectorXd::Zero(2);
  p.A_in = Eigen::MatrixXd(3, 2);
  p.A_in << 1.0, 0.0, 2.0, 0.0, 1.0, 1e-9;
  p.b_in = Eigen::VectorXd(3);
  p.b_in << 1.0, 2.0, 1.0;
  const QpSolution s = stepseq::solve(p);
  EXPECT_NEAR(s.x(0), 1.0, 1e-8);
  EXPECT_NEAR(s.x(1), 0.0, 1e-8);
  EXPECT_NEAR(stationarity_residual(p, s), 0.0, 1e-7);
}

TEST(QpTest, MatchesEnumerationOnRandomProblems) {
  std::mt19937_64 rng(20240517);
  for (int trial = 0; trial < 200; ++trial) {
    const QpProblem p = oracles::random_qp(rng);
    const auto oracle = oracles::enumerate_qp(p);
    ASSERT_TRUE(oracle.has_value()) << "trial " << trial;
    const QpSolution s = stepseq::solve(p);
    EXPECT_LT((s.x - oracle->x).cwiseAbs().maxCoeff(), 1e-8) << "trial " << trial;
    EXPECT_NEAR(s.objective, oracle->objective,
                1e-9 * std::max(1.0, std::abs(oracle->objective)))
        << "trial " << trial;
  }
}

TEST(QpTest, KktInvariantsOnRandomProblems) {
  std::mt19937_64 rng(777);
  for (int trial = 0; trial < 200; ++trial) {
    const QpProblem p = oracles::random_qp(rng);
    const QpSolution s = stepseq::solve(p);
    const double scale = std::max(1.0, s.x.cwiseAbs().maxCoeff());
    for (int i = 0; i < 6; ++i) {
      const double gi = p.A_in.row(i).dot(s.x) - p.b_in(i);
      EXPECT_GT(gi, -1e-9 * scale) << "trial " << trial << " row " << i;
      EXPECT_GE(s.u(i), 0.0);
      EXPECT_LT(std::abs(s.u(i) * gi), 1e-6 * std::max(1.0, s.u(i)))
          << "trial " << trial << " row " << i;
    }
    EXPECT_LT((p.A_eq * s.x - p.b_eq).cwiseAbs().maxCoeff(), 1e-8 * scale);
    EXPECT_LT(stationarity_residual(p, s),
              1e-7 * std::max(1.0, p.H.cwiseAbs().maxCoeff() * scale));
  }
}

TEST(QpTest, SolutionInvariantUnderObjectiveScaling) {
  std::mt19937_64 rng(4242);
  const QpProblem base = oracles::random_qp(rng);
  const QpSolution ref = stepseq::solve(base);
  for (double lambda : {0.5, 2.0, 1000.0}) {
    QpProblem scaled = base;
    scaled.H *= lambda;
    scaled.g *= lambda;
    const QpSolution s = stepseq::solve(scaled);
    EXPECT_LT((s.x - ref.x).cwiseAbs().maxCoeff(), 1e-7) << "lambda " << lambda;
    ASSERT_EQ(s.active_set, ref.active_set) << "lambda " << lambda;
    for (int i : ref.active_set)
      EXPECT_NEAR(s.u(i), lambda * ref.u(i), 1e-6 * lambda * std::max(1.0, ref.u(i)));
  }
}

TEST(QpTest, RepeatSolveIsBitwiseIdentical) {
  std::mt19937_64 rng(99);
  const QpProblem p = oracles::random_qp(rng);
  const QpSolution a = stepseq::solve(p);
  const QpSolution b = stepseq::solve(p);
  ASSERT_EQ(a.x.size(), b.x.size());
  for (int i = 0; i < a.x.size(); ++i) EXPECT_EQ(a.x(i), b.x(i));
  EXPECT_EQ(a.active_set, b.active_set);
  EXPECT_EQ(a.objective, b.objective);
}
