#include "regfact/rsvd.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace regfact;
using regfact::testing::gaussian_matrix;

namespace {

MatrixXd second_difference_gram(Eigen::Index n) {
  return make_regularizer<double>(RegularizerKind::second_difference, n).L;
}

RsvdProblem<double> make_problem(const MatrixXd& a, Eigen::Index k, double lambda, double mu) {
  RsvdProblem<double> prob;
  prob.A = a;
  prob.k = k;
  prob.lambda = lambda;
  prob.mu = mu;
  prob.L = make_regularizer<double>(RegularizerKind::second_difference, a.rows());
  prob.M = make_regularizer<double>(RegularizerKind::second_difference, a.cols());
  return prob;
}

}  // namespace

TEST(SMatrix, ZeroPenaltyIsNegativeRankOne) {
  std::mt19937_64 rng(1);
  const MatrixXd a = gaussian_matrix(5, 4, rng);
  const VectorXd q = regfact::testing::householder_orthonormal(4, 1, rng);
  const MatrixXd s = s_matrix(q, a, 0.0, second_difference_gram(5));
  const VectorXd w = a * q;
  EXPECT_LE((s + w * w.transpose()).norm(), 1e-14);
  const auto eig = sym_eigen(s);
  EXPECT_NEAR(eig.values(0), -w.squaredNorm(), 1e-12 * w.squaredNorm());
  for (Eigen::Index i = 1; i < 5; ++i) EXPECT_NEAR(eig.values(i), 0.0, 1e-12 * w.squaredNorm());
}

TEST(SMatrix, ZeroDataIsPenalty) {
  const MatrixXd l = second_difference_gram(5);
  const VectorXd q = VectorXd::Unit(3, 1);
  EXPECT_EQ(s_matrix(q, MatrixXd(MatrixXd::Zero(5, 3)), 0.8, l), 0.8 * l);
}

TEST(SMatrix, SymmetricAndRejectsNonUnit) {
  std::mt19937_64 rng(2);
  const MatrixXd a = gaussian_matrix(6, 4, rng);
  const VectorXd q = regfact::testing::householder_orthonormal(4, 1, rng);
  const MatrixXd s = s_matrix(q, a, 1.3, second_difference_gram(6));
  EXPECT_EQ((s - s.transpose()).norm(), 0.0);
  EXPECT_THROW(s_matrix(VectorXd(2 * q), a, 1.3, second_difference_gram(6)), std::invalid_argument);
}

TEST(Psi, UnregularisedRankOneMinimumIsMinusSigmaSquared) {
  const MatrixXd a = gaussian_matrix(6, 4, 3);
  const auto base = svd(a);
  const MatrixXd zero_l = MatrixXd::Zero(6, 6), zero_m = MatrixXd::Zero(4, 4);
  const MatrixXd v1 = base.V.leftCols(1);
  EXPECT_NEAR(psi(v1, a, 0.0, 0.0, zero_l, zero_m), -base.sigma(0) * base.sigma(0), 1e-10 * base.sigma(0) * base.sigma(0));
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd q = regfact::testing::householder_orthonormal(4, 1, rng);
    EXPECT_NEAR(psi(q, a, 0.0, 0.0, zero_l, zero_m), -(a * q).squaredNorm(), 1e-10 * a.squaredNorm());
    EXPECT_GE(psi(q, a, 0.0, 0.0, zero_l, zero_m), -base.sigma(0) * base.sigma(0) - 1e-10);
  }
}

TEST(Psi, DataFreeCaseIsColumnPenalty) {
  std::mt19937_64 rng(4);
  const MatrixXd m = second_difference_gram(5);
  const MatrixXd q = regfact::testing::householder_orthonormal(5, 2, rng);
  const double value = psi(q, MatrixXd(MatrixXd::Zero(4, 5)), 0.0, 0.7, MatrixXd(MatrixXd::Zero(4, 4)), m);
  EXPECT_NEAR(value, 0.7 * (q.transpose() * m * q).trace(), 1e-12);
  EXPECT_GE(value, 0.0);
}

TEST(Psi, MatchesPowerIterationOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const MatrixXd a = gaussian_matrix(6, 5, rng);
    const MatrixXd q = regfact::testing::householder_orthonormal(5, 2, rng);
    const MatrixXd l = second_difference_gram(6), m = second_difference_gram(5);
    double oracle = 0;
    for (Eigen::Index i = 0; i < 2; ++i) {
      const VectorXd qi = q.col(i);
      const VectorXd w = a * qi;
      const MatrixXd s = 0.6 * l - w * w.transpose();
      oracle += regfact::testing::smallest_eigenvalue_power(s) + 0.4 * qi.dot(m * qi);
    }
    EXPECT_NEAR(psi(q, a, 0.6, 0.4, l, m), oracle, 1e-8 * std::abs(oracle));
  }
}

TEST(Psi, RejectsNonOrthonormalQ) {
  const MatrixXd a = gaussian_matrix(4, 3, 6);
  MatrixXd q = MatrixXd::Ones(3, 2);
  EXPECT_THROW(psi(q, a, 0.0, 0.0, MatrixXd(MatrixXd::Zero(4, 4)), MatrixXd(MatrixXd::Zero(3, 3))),
               std::invalid_argument);
}

TEST(PsiEvaluator, AgreesWithDenseRoute) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 4 + trial % 6, m = 3 + trial % 5;
    const MatrixXd a = gaussian_matrix(n, m, rng);
    const Eigen::Index k = 1 + trial % std::min<Eigen::Index>(3, std::min(n, m));
    const MatrixXd q = regfact::testing::householder_orthonormal(m, k, rng);
    const double lambda = 0.25 * (trial % 4), mu = 0.3 * (trial % 3);
    const MatrixXd l = second_difference_gram(n), mm = second_difference_gram(m);
    const PsiEvaluator<double> fast(a, lambda, mu, l, mm);
    const double dense = psi(q, a, lambda, mu, l, mm);
    EXPECT_NEAR(fast(q), dense, 1e-11 * std::max(1.0, std::abs(dense))) << "trial " << trial;
  }
}

TEST(RankOneDowndate, HandlesInactiveComponents) {
  VectorXd d(3), z(3);
  d << 0.0, 1.0, 2.0;
  z << 0.0, 0.0, 0.0;
  EXPECT_EQ(smallest_eigenvalue_rank_one_downdate(d, z), 0.0);
  // z orthogonal to the lowest eigenvector: the downdate may or may not go below d₀.
  z << 0.0, 0.1, 0.0;
  EXPECT_EQ(smallest_eigenvalue_rank_one_downdate(d, z), 0.0);
  z << 0.0, 2.0, 0.0;
  EXPECT_NEAR(smallest_eigenvalue_rank_one_downdate(d, z), -3.0, 1e-15);
}

TEST(ExtractP, ZeroPenaltyGivesNormalisedImage) {
  std::mt19937_64 rng(8);
  const MatrixXd a = gaussian_matrix(5, 4, rng);
  const MatrixXd q = regfact::testing::householder_orthonormal(4, 1, rng);
  const MatrixXd p = extract_p(q, a, 0.0, second_difference_gram(5));
  const VectorXd expected = (a * q).normalized();
  EXPECT_LE((p.col(0) - expected).norm(), 1e-10);
}

TEST(ExtractP, LeadingSingularPair) {
  const MatrixXd a = gaussian_matrix(7, 5, 9);
  const auto base = svd(a);
  const MatrixXd p = extract_p(MatrixXd(base.V.leftCols(1)), a, 0.0, MatrixXd(MatrixXd::Zero(7, 7)));
  EXPECT_LE((p.col(0) - base.U.col(0)).norm(), 1e-10);
}

TEST(ExtractP, UnitColumnsAndNonnegativeBeta) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd a = gaussian_matrix(6, 5, rng);
    const MatrixXd q = regfact::testing::householder_orthonormal(5, 3, rng);
    const MatrixXd p = extract_p(q, a, 0.9, second_difference_gram(6));
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(p.col(i).norm(), 1.0, 1e-10);
    const VectorXd beta = extract_b(p, a, q);
    EXPECT_TRUE((beta.array() >= 0).all());
  }
}

TEST(ExtractP, MinimisesEachColumnTerm) {
  std::mt19937_64 rng(11);
  const MatrixXd a = gaussian_matrix(5, 4, rng);
  const MatrixXd q = regfact::testing::householder_orthonormal(4, 2, rng);
  const MatrixXd l = second_difference_gram(5);
  const MatrixXd p = extract_p(q, a, 0.8, l);
  for (Eigen::Index i = 0; i < 2; ++i) {
    const MatrixXd s = s_matrix(VectorXd(q.col(i)), a, 0.8, l);
    const double best = p.col(i).dot(s * p.col(i));
    for (int trial = 0; trial < 500; ++trial) {
      const VectorXd r = regfact::testing::unit_columns(5, 1, rng);
      EXPECT_LE(best, r.dot(s * r) + 1e-12);
    }
  }
}

TEST(ExtractB, SingularVectorsGiveSingularValues) {
  const MatrixXd a = gaussian_matrix(6, 4, 12);
  const auto base = svd(a);
  const VectorXd beta = extract_b(MatrixXd(base.U.leftCols(3)), a, MatrixXd(base.V.leftCols(3)));
  EXPECT_LE((beta - base.sigma.head(3)).norm(), 1e-10 * base.sigma(0));
}

TEST(ExtractB, ZeroDataAndIndexOracle) {
  std::mt19937_64 rng(13);
  const MatrixXd p = gaussian_matrix(4, 2, rng), q = gaussian_matrix(3, 2, rng);
  EXPECT_EQ(extract_b(p, MatrixXd(MatrixXd::Zero(4, 3)), q).norm(), 0.0);
  const MatrixXd a = gaussian_matrix(4, 3, rng);
  const VectorXd beta = extract_b(p, a, q);
  for (Eigen::Index c = 0; c < 2; ++c) {
    double sum = 0;
    for (Eigen::Index i = 0; i < 4; ++i) {
      for (Eigen::Index j = 0; j < 3; ++j) sum += p(i, c) * a(i, j) * q(j, c);
    }
    EXPECT_NEAR(beta(c), sum, 1e-14);
  }
  EXPECT_THROW(extract_b(p, a, MatrixXd(MatrixXd::Zero(3, 3))), std::invalid_argument);
}

TEST(Rsvd, ResidualIdentityForUnitColumnP) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 30; ++trial) {
    const MatrixXd a = gaussian_matrix(7, 5, rng);
    const MatrixXd p = regfact::testing::unit_columns(7, 3, rng);
    const MatrixXd q = regfact::testing::householder_orthonormal(5, 3, rng);
    const VectorXd beta = extract_b(p, a, q);
    const double lhs = frobenius_norm_sq(MatrixXd(a - reconstruct(p, beta, q)));
    const double rhs = frobenius_norm_sq(a) - beta.squaredNorm();
    EXPECT_NEAR(lhs, rhs, 1e-8 * frobenius_norm_sq(a));
  }
}

TEST(Rsvd, ObjectiveDecomposesThroughS) {
  std::mt19937_64 rng(15);
  const MatrixXd l = second_difference_gram(6), m = second_difference_gram(5);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd a = gaussian_matrix(6, 5, rng);
    const MatrixXd p = regfact::testing::unit_columns(6, 2, rng);
    const MatrixXd q = regfact::testing::householder_orthonormal(5, 2, rng);
    const VectorXd beta = extract_b(p, a, q);
    const double f = rsvd_objective(a, p, beta, q, 0.7, 0.3, l, m);
    double decomposed = frobenius_norm_sq(a);
    for (Eigen::Index i = 0; i < 2; ++i) {
      const VectorXd qi = q.col(i);
      decomposed += p.col(i).dot(s_matrix(qi, a, 0.7, l) * p.col(i)) + 0.3 * qi.dot(m * qi);
    }
    EXPECT_NEAR(f, decomposed, 1e-8 * frobenius_norm_sq(a));
  }
}

TEST(SolveRsvd, UnregularisedRecoversLeadingPair) {
  const MatrixXd a = gaussian_matrix(8, 6, 16);
  const auto base = svd(a);
  for (auto strategy : {DescentStrategy::steepest, DescentStrategy::random}) {
    auto prob = make_problem(a, 1, 0.0, 0.0);
    prob.descent.strategy = strategy;
    prob.descent.seed = 3;
    prob.init = InitialQ::random_orthonormal;
    const auto sol = solve_rsvd(prob);
    EXPECT_NEAR(sol.beta(0), base.sigma(0), 1e-6 * base.sigma(0)) << to_string(strategy);
    EXPECT_GE(std::abs(sol.Q.col(0).dot(base.V.col(0))), 1 - 1e-6) << to_string(strategy);
  }
}

TEST(SolveRsvd, NearlyUnregularisedRankOneData) {
  const VectorXd u = VectorXd::LinSpaced(8, 1, 2).normalized();
  const VectorXd v = VectorXd::LinSpaced(6, -1, 3).normalized() * 2.0;
  const MatrixXd a = u * v.transpose();
  const auto sol = solve_rsvd(make_problem(a, 1, 1e-6, 1e-6));
  const MatrixXd recon = reconstruct(sol.P, sol.beta, sol.Q);
  EXPECT_LE((recon - a).norm(), 1e-3 * a.norm());
}

TEST(SolveRsvd, SolutionInvariants) {
  std::mt19937_64 rng(17);
  const MatrixXd a = gaussian_matrix(9, 7, rng);
  auto prob = make_problem(a, 2, 0.5, 0.3);
  prob.init = InitialQ::random_orthonormal;
  prob.descent.seed = 2;
  const auto sol = solve_rsvd(prob);
  EXPECT_LE(orthonormality_residual(sol.Q), 1e-10);
  for (Eigen::Index i = 0; i < 2; ++i) EXPECT_NEAR(sol.P.col(i).norm(), 1.0, 1e-10);
  EXPECT_LE((sol.beta - (sol.P.transpose() * a * sol.Q).diagonal()).norm(), 1e-10);
  ASSERT_FALSE(sol.psi_trace.empty());
  for (std::size_t i = 1; i < sol.psi_trace.size(); ++i) EXPECT_LE(sol.psi_trace[i], sol.psi_trace[i - 1]);
  EXPECT_LE(sol.psi_trace.back(), sol.psi_trace.front());
  const double lhs = frobenius_norm_sq(MatrixXd(a - reconstruct(sol.P, sol.beta, sol.Q)));
  EXPECT_NEAR(lhs, frobenius_norm_sq(a) - sol.beta.squaredNorm(), 1e-8 * frobenius_norm_sq(a));
  EXPECT_LE(sol.max_q_drift, 1e-10);
  // F = ‖A‖² + ψ at the optimal P and B.
  EXPECT_NEAR(sol.objective, frobenius_norm_sq(a) + sol.psi, 1e-8 * frobenius_norm_sq(a));
}

TEST(SolveRsvd, BudgetExhaustionReturnsBestSoFar) {
  std::mt19937_64 rng(18);
  const MatrixXd a = gaussian_matrix(8, 6, rng);
  auto prob = make_problem(a, 1, 0.2, 0.2);
  prob.init = InitialQ::random_orthonormal;
  prob.descent.max_iters = 2;
  const auto sol = solve_rsvd(prob);
  EXPECT_FALSE(sol.converged);
  EXPECT_EQ(sol.iterations, 2);
  EXPECT_LT(sol.psi, sol.psi_trace.front());
}

TEST(SolveRsvd, RejectsBadProblems) {
  const MatrixXd a = gaussian_matrix(4, 3, 19);
  EXPECT_THROW(solve_rsvd(make_problem(a, 4, 0.1, 0.1)), std::invalid_argument);
  EXPECT_THROW(solve_rsvd(make_problem(a, 1, 0.1, -1.0)), std::invalid_argument);
}
