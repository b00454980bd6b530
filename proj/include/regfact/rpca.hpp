#pragma once

// Closed-form regularised PCA: minimise
//   F(P, Q) = ‖A − PQᵀ‖² + λ Tr(PᵀLP) + μ Tr(QᵀMQ)   subject to QᵀQ = I_k.
// Q spans the top-k eigenvectors of K = Aᵀ(I + λL)⁻¹A − μM and
// P = (I + λL)⁻¹AQ.

#include "regfact/matrix_core.hpp"
#include "regfact/regularizers.hpp"

#include <stdexcept>
#include <string>

namespace regfact {

template <typename Scalar>
struct PcaProblem {
  Matrix<Scalar> A;
  Eigen::Index k = 1;
  Scalar lambda = 0;
  Scalar mu = 0;
  RegularizerMatrix<Scalar> L;  // n x n
  RegularizerMatrix<Scalar> M;  // m x m
};

template <typename Scalar>
struct PcaSolution {
  Matrix<Scalar> P;
  Matrix<Scalar> Q;
  Scalar objective = 0;
  Vector<Scalar> k_spectrum;  // selected eigenvalues of K, descending
  bool degenerate = false;    // k-th and (k+1)-th eigenvalues of K coincide
};

template <typename Scalar>
void validate(const PcaProblem<Scalar>& prob) {
  const Eigen::Index n = prob.A.rows();
  const Eigen::Index m = prob.A.cols();
  if (n < 1 || m < 1) throw std::invalid_argument("data matrix is empty");
  require_finite(prob.A, "data matrix");
  if (prob.k < 1 || prob.k > std::min(n, m)) {
    throw std::invalid_argument("rank k=" + std::to_string(prob.k) + " outside [1, " +
                                std::to_string(std::min(n, m)) + "]");
  }
  if (!(prob.lambda >= 0) || !(prob.mu >= 0)) {
    throw std::invalid_argument("weights lambda and mu must be nonnegative");
  }
  if (prob.L.L.rows() != n || prob.L.L.cols() != n) {
    throw std::invalid_argument("L must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  if (prob.M.L.rows() != m || prob.M.L.cols() != m) {
    throw std::invalid_argument("M must be " + std::to_string(m) + "x" + std::to_string(m));
  }
}

/// I + λL, the SPD system matrix shared by K and P.
template <typename Scalar>
Matrix<Scalar> smoothing_system(const Matrix<Scalar>& l, Scalar lambda) {
  Matrix<Scalar> c = lambda * l;
  c.diagonal().array() += Scalar(1);
  return c;
}

template <typename Scalar>
Matrix<Scalar> build_k_matrix(const PcaProblem<Scalar>& prob) {
  validate(prob);
  const Matrix<Scalar> c = smoothing_system(prob.L.L, prob.lambda);
  const Matrix<Scalar> solved = spd_solve(c, prob.A);
  Matrix<Scalar> k = prob.A.transpose() * solved - prob.mu * prob.M.L;
  return (k + k.transpose()) / Scalar(2);
}

/// The P that makes ∇_P F vanish for a given Q: (I + λL)P = AQ.
template <typename Scalar>
Matrix<Scalar> stationary_p(const Matrix<Scalar>& a, const Matrix<Scalar>& q,
                            const Matrix<Scalar>& l, Scalar lambda) {
  return spd_solve(smoothing_system(l, lambda), Matrix<Scalar>(a * q));
}

template <typename Scalar>
Scalar rpca_objective(const Matrix<Scalar>& a, const Matrix<Scalar>& p, const Matrix<Scalar>& q,
                      Scalar lambda, Scalar mu, const Matrix<Scalar>& l, const Matrix<Scalar>& m) {
  if (p.rows() != a.rows() || q.rows() != a.cols() || p.cols() != q.cols()) {
    throw std::invalid_argument("rpca_objective: P is " + std::to_string(p.rows()) + "x" +
                                std::to_string(p.cols()) + ", Q is " + std::to_string(q.rows()) +
                                "x" + std::to_string(q.cols()) + ", A is " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  if (l.rows() != a.rows() || l.cols() != a.rows() || m.rows() != a.cols() ||
      m.cols() != a.cols()) {
    throw std::invalid_argument("rpca_objective: regulariser dimensions do not match A");
  }
  const Scalar fit = frobenius_norm_sq(a - p * q.transpose());
  const Scalar smooth_p = (p.transpose() * l * p).trace();
  const Scalar smooth_q = (q.transpose() * m * q).trace();
  return fit + lambda * smooth_p + mu * smooth_q;
}

template <typename Scalar>
PcaSolution<Scalar> solve_rpca(const PcaProblem<Scalar>& prob) {
  const Matrix<Scalar> k_mat = build_k_matrix(prob);
  const SymEigen<Scalar> eig = sym_eigen(k_mat);
  const Eigen::Index m = k_mat.rows();
  const Eigen::Index k = prob.k;

  PcaSolution<Scalar> sol;
  sol.Q.resize(m, k);
  sol.k_spectrum.resize(k);
  // Algebraically largest first; eigenvalues are stored ascending.
  for (Eigen::Index i = 0; i < k; ++i) {
    sol.Q.col(i) = eig.vectors.col(m - 1 - i);
    sol.k_spectrum(i) = eig.values(m - 1 - i);
  }
  if (k < m) {
    const Scalar gap = eig.values(m - k) - eig.values(m - k - 1);
    const Scalar scale = std::max(Scalar(1), eig.values.cwiseAbs().maxCoeff());
    sol.degenerate = gap <= Scalar(1e-10) * scale;
  }
  sol.P = stationary_p(prob.A, sol.Q, prob.L.L, prob.lambda);
  sol.objective = rpca_objective(prob.A, sol.P, sol.Q, prob.lambda, prob.mu, prob.L.L, prob.M.L);
  return sol;
}

}  // namespace regfact
