#include "regfact/rpca.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace regfact;
using regfact::testing::gaussian_matrix;

namespace {

PcaProblem<double> make_problem(const MatrixXd& a, Eigen::Index k, double lambda, double mu,
                                RegularizerKind d_kind = RegularizerKind::second_difference,
                                bool laplacian_m = true) {
  PcaProblem<double> prob;
  prob.A = a;
  prob.k = k;
  prob.lambda = lambda;
  prob.mu = mu;
  prob.L = make_regularizer<double>(d_kind, a.rows());
  if (laplacian_m) {
    RegularizerSpec<double> spec;
    spec.kind = RegularizerKind::graph_laplacian;
    spec.size = a.cols();
    spec.adjacency = path_adjacency(a.cols());
    prob.M = realize(spec);
  } else {
    prob.M = make_regularizer<double>(RegularizerKind::none, a.cols());
  }
  return prob;
}

// Term-by-term recomputation of F with explicit loops.
double objective_by_loops(const MatrixXd& a, const MatrixXd& p, const MatrixXd& q, double lambda,
                          double mu, const MatrixXd& l, const MatrixXd& m) {
  double fit = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      double r = a(i, j);
      for (Eigen::Index c = 0; c < p.cols(); ++c) r -= p(i, c) * q(j, c);
      fit += r * r;
    }
  }
  double tp = 0;
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
      for (Eigen::Index j = 0; j < l.cols(); ++j) tp += p(i, c) * l(i, j) * p(j, c);
    }
  }
  double tq = 0;
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) tq += q(i, c) * m(i, j) * q(j, c);
    }
  }
  return fit + lambda * tp + mu * tq;
}

}  // namespace

TEST(BuildKMatrix, UnregularisedIsGram) {
  const MatrixXd a = gaussian_matrix(5, 4, 1);
  const MatrixXd k = build_k_matrix(make_problem(a, 2, 0.0, 0.0));
  EXPECT_LE((k - a.transpose() * a).norm(), 1e-12 * k.norm());
}

TEST(BuildKMatrix, IdentityRegulariserScalesGram) {
  const MatrixXd a = gaussian_matrix(5, 4, 2);
  const double lambda = 0.8;
  const MatrixXd k = build_k_matrix(make_problem(a, 2, lambda, 0.0, RegularizerKind::identity, false));
  EXPECT_LE((k - a.transpose() * a / (1 + lambda)).norm(), 1e-12 * k.norm());
}

TEST(BuildKMatrix, MatchesDenseInverseOracle) {
  const MatrixXd a = gaussian_matrix(4, 3, 3);
  const auto prob = make_problem(a, 1, 0.7, 0.3);
  const MatrixXd c = MatrixXd::Identity(4, 4) + 0.7 * prob.L.L;
  const MatrixXd oracle = a.transpose() * regfact::testing::dense_inverse(c) * a - 0.3 * prob.M.L;
  EXPECT_LE((build_k_matrix(prob) - oracle).norm(), 1e-10 * oracle.norm());
}

TEST(RpcaObjective, TrivialCases) {
  const MatrixXd a = gaussian_matrix(4, 3, 4);
  const MatrixXd l = MatrixXd::Zero(4, 4);
  const MatrixXd m = MatrixXd::Zero(3, 3);
  const MatrixXd q = MatrixXd::Identity(3, 2);
  EXPECT_DOUBLE_EQ(rpca_objective(a, MatrixXd(MatrixXd::Zero(4, 2)), q, 0.0, 0.0, l, m), frobenius_norm_sq(a));
  const MatrixXd p = gaussian_matrix(4, 2, 5);
  const MatrixXd exact = p * q.transpose();
  EXPECT_NEAR(rpca_objective(exact, p, q, 0.0, 0.0, l, m), 0.0, 1e-24);
}

TEST(RpcaObjective, MatchesLoopOracle) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd a = gaussian_matrix(5, 4, rng);
    const MatrixXd p = gaussian_matrix(5, 2, rng);
    const MatrixXd q = regfact::testing::householder_orthonormal(4, 2, rng);
    const auto prob = make_problem(a, 2, 0.4, 0.9);
    const double got = rpca_objective(a, p, q, 0.4, 0.9, prob.L.L, prob.M.L);
    const double want = objective_by_loops(a, p, q, 0.4, 0.9, prob.L.L, prob.M.L);
    EXPECT_NEAR(got, want, 1e-12 * want);
  }
}

TEST(RpcaObjective, RejectsDimensionMismatch) {
  const MatrixXd a = gaussian_matrix(4, 3, 4);
  EXPECT_THROW(rpca_objective(a, MatrixXd(MatrixXd::Zero(3, 2)), MatrixXd(MatrixXd::Identity(3, 2)), 0.0, 0.0,
                              MatrixXd(MatrixXd::Zero(4, 4)), MatrixXd(MatrixXd::Zero(3, 3))),
               std::invalid_argument);
}

TEST(SolveRpca, UnregularisedMatchesTruncatedSvd) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const MatrixXd a = gaussian_matrix(7, 5, 10 + seed);
    const auto sol = solve_rpca(make_problem(a, 2, 0.0, 0.0));
    EXPECT_LE((sol.P * sol.Q.transpose() - truncate_svd(svd(a), 2)).norm(), 1e-8 * a.norm());
  }
}

TEST(SolveRpca, IdentityRegulariserRankOne) {
  const MatrixXd a = gaussian_matrix(6, 4, 12);
  const auto base = svd(a);
  for (double lambda : {0.5, 1.0, 2.0}) {
    const auto sol = solve_rpca(make_problem(a, 1, lambda, 0.0, RegularizerKind::identity, false));
    const double align = sol.Q.col(0).dot(base.V.col(0));
    EXPECT_GE(std::abs(align), 1 - 1e-10);
    const VectorXd expected = (align > 0 ? 1.0 : -1.0) * base.sigma(0) / (1 + lambda) * base.U.col(0);
    EXPECT_LE((sol.P.col(0) - expected).norm(), 1e-8 * base.sigma(0));
  }
}

TEST(SolveRpca, SolutionInvariants) {
  const MatrixXd a = gaussian_matrix(6, 5, 13);
  const auto prob = make_problem(a, 3, 0.5, 0.2);
  const auto sol = solve_rpca(prob);
  EXPECT_LE(orthonormality_residual(sol.Q), 1e-10);
  const MatrixXd c = MatrixXd::Identity(6, 6) + 0.5 * prob.L.L;
  EXPECT_LE((c * sol.P - a * sol.Q).norm(), 1e-8 * (a * sol.Q).norm());
  EXPECT_NEAR(sol.objective, frobenius_norm_sq(a) - sol.k_spectrum.sum(), 1e-8 * frobenius_norm_sq(a));
  for (Eigen::Index i = 1; i < sol.k_spectrum.size(); ++i) EXPECT_GE(sol.k_spectrum(i - 1), sol.k_spectrum(i));
}

TEST(SolveRpca, BeatsRandomFeasibleCandidates) {
  std::mt19937_64 rng(14);
  const MatrixXd a = gaussian_matrix(6, 5, rng);
  const auto prob = make_problem(a, 2, 0.5, 0.2);
  const auto sol = solve_rpca(prob);
  for (int trial = 0; trial < 1000; ++trial) {
    const MatrixXd q = regfact::testing::householder_orthonormal(5, 2, rng);
    const MatrixXd p = stationary_p(a, q, prob.L.L, prob.lambda);
    EXPECT_LE(sol.objective, rpca_objective(a, p, q, 0.5, 0.2, prob.L.L, prob.M.L) + 1e-10);
  }
}

TEST(SolveRpca, FiniteDifferenceGradientInPVanishes) {
  const MatrixXd a = gaussian_matrix(6, 5, 15);
  const auto prob = make_problem(a, 2, 0.5, 0.2);
  const auto sol = solve_rpca(prob);
  const double h = 1e-5;
  MatrixXd grad(sol.P.rows(), sol.P.cols());
  for (Eigen::Index i = 0; i < sol.P.rows(); ++i) {
    for (Eigen::Index j = 0; j < sol.P.cols(); ++j) {
      MatrixXd plus = sol.P, minus = sol.P;
      plus(i, j) += h;
      minus(i, j) -= h;
      grad(i, j) = (rpca_objective(a, plus, sol.Q, 0.5, 0.2, prob.L.L, prob.M.L) -
                    rpca_objective(a, minus, sol.Q, 0.5, 0.2, prob.L.L, prob.M.L)) /
                   (2 * h);
    }
  }
  // Scale: the gradient of the fit term alone, 2‖AQ‖.
  const double scale = 2 * (a * sol.Q).norm();
  EXPECT_LE(grad.norm(), 1e-4 * scale);
}

TEST(SolveRpca, TraceIdentityForStationaryP) {
  std::mt19937_64 rng(16);
  const MatrixXd a = gaussian_matrix(6, 5, rng);
  const auto prob = make_problem(a, 2, 0.9, 0.4);
  const MatrixXd k = build_k_matrix(prob);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd q = regfact::testing::householder_orthonormal(5, 2, rng);
    const MatrixXd p = stationary_p(a, q, prob.L.L, prob.lambda);
    const double f = rpca_objective(a, p, q, 0.9, 0.4, prob.L.L, prob.M.L);
    const double want = frobenius_norm_sq(a) - (q.transpose() * k * q).trace();
    EXPECT_NEAR(f, want, 1e-8 * frobenius_norm_sq(a));
  }
}

TEST(SolveRpca, ResidualGrowsWithLambda) {
  const MatrixXd a = gaussian_matrix(8, 6, 17);
  double previous = -1;
  for (double lambda : {0.0, 0.5, 1.0, 2.0}) {
    const auto sol = solve_rpca(make_problem(a, 2, lambda, 0.0));
    const double residual = frobenius_norm_sq(MatrixXd(a - sol.P * sol.Q.transpose()));
    EXPECT_GE(residual, previous - 1e-12);
    previous = residual;
  }
}

TEST(SolveRpca, UncorrectedFactorRuleIsWorse) {
  // P = AQ ignores the smoothing system; it must lose to P = (I + λL)⁻¹AQ.
  const MatrixXd a = gaussian_matrix(6, 5, 18);
  const auto prob = make_problem(a, 2, 1.0, 0.0, RegularizerKind::second_difference, false);
  const auto sol = solve_rpca(prob);
  const MatrixXd naive_p = a * sol.Q;
  const double naive = rpca_objective(a, naive_p, sol.Q, 1.0, 0.0, prob.L.L, prob.M.L);
  EXPECT_GT(naive - sol.objective, 1e-6);
}

TEST(SolveRpca, RejectsBadProblems) {
  const MatrixXd a = gaussian_matrix(4, 3, 19);
  EXPECT_THROW(solve_rpca(make_problem(a, 4, 0.1, 0.1)), std::invalid_argument);
  EXPECT_THROW(solve_rpca(make_problem(a, 1, -0.1, 0.1)), std::invalid_argument);
  auto prob = make_problem(a, 1, 0.1, 0.1);
  prob.M = make_regularizer<double>(RegularizerKind::identity, 4);
  EXPECT_THROW(solve_rpca(prob), std::invalid_argument);
}

TEST(SolveRpca, FlagsTiedEigenvalues) {
  // Identity data: K = I has a fully degenerate spectrum.
  const auto sol = solve_rpca(make_problem(MatrixXd::Identity(4, 4), 2, 0.0, 0.0,
                                           RegularizerKind::none, false));
  EXPECT_TRUE(sol.degenerate);
  EXPECT_LE(orthonormality_residual(sol.Q), 1e-12);
}
