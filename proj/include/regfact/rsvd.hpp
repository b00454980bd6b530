#pragma once

// Regularised SVD: minimise
//   F(P, B, Q) = ‖A − PBQᵀ‖² + λ Tr(PᵀLP) + μ Tr(QᵀMQ)
// over orthonormal-column Q, unit-norm columns of P and diagonal B.
//
// For fixed Q the optimal pᵢ is the eigenvector of S(qᵢ) = λL − (Aqᵢ)(Aqᵢ)ᵀ
// for its smallest eigenvalue and βᵢ = pᵢᵀAqᵢ, so the search reduces to
//   ψ(Q) = Σᵢ λ₁(S(qᵢ)) + μ qᵢᵀMqᵢ
// over the Stiefel manifold, handled by manifold_descent.

#include "regfact/manifold_descent.hpp"
#include "regfact/matrix_core.hpp"
#include "regfact/regularizers.hpp"

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace regfact {

enum class InitialQ { leading_singular_vectors, random_orthonormal };

template <typename Scalar>
struct RsvdProblem {
  Matrix<Scalar> A;
  Eigen::Index k = 1;
  Scalar lambda = 0;
  Scalar mu = 0;
  RegularizerMatrix<Scalar> L;  // n x n
  RegularizerMatrix<Scalar> M;  // m x m
  DescentConfig descent;
  InitialQ init = InitialQ::leading_singular_vectors;
};

template <typename Scalar>
struct RsvdSolution {
  Matrix<Scalar> P;
  Vector<Scalar> beta;
  Matrix<Scalar> Q;
  std::vector<Scalar> psi_trace;
  Scalar psi = 0;
  Scalar objective = 0;
  bool converged = false;
  int iterations = 0;
  long evaluations = 0;
  Scalar max_q_drift = 0;
  Scalar p_orthogonality = 0;  // ‖PᵀP − I‖, reported only
  bool degenerate = false;     // some S(qᵢ) had a repeated smallest eigenvalue
};

template <typename Scalar>
void validate(const RsvdProblem<Scalar>& prob) {
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
  validate(prob.descent);
}

template <typename Derived>
void require_unit(const Eigen::MatrixBase<Derived>& q, double tol, const char* what) {
  if (std::abs(q.norm() - 1) > tol) {
    throw std::invalid_argument(std::string(what) + ": vector is not unit-norm");
  }
}

template <typename Derived>
void require_orthonormal(const Eigen::MatrixBase<Derived>& q, double tol, const char* what) {
  if (orthonormality_residual(q) > tol) {
    throw std::invalid_argument(std::string(what) + ": Q does not have orthonormal columns");
  }
}

/// S(q) = λL − (Aq)(Aq)ᵀ.
template <typename Scalar>
Matrix<Scalar> s_matrix(const Vector<Scalar>& q, const Matrix<Scalar>& a, Scalar lambda,
                        const Matrix<Scalar>& l) {
  require_unit(q, 1e-10, "s_matrix");
  const Vector<Scalar> w = a * q;
  return lambda * l - w * w.transpose();
}

/// ψ(Q) assembled literally: one dense eigen-decomposition of S(qᵢ) per column.
template <typename Scalar>
Scalar psi(const Matrix<Scalar>& q, const Matrix<Scalar>& a, Scalar lambda, Scalar mu,
           const Matrix<Scalar>& l, const Matrix<Scalar>& m) {
  require_orthonormal(q, 1e-8, "psi");
  Scalar total = 0;
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    const Vector<Scalar> qi = q.col(i);
    total += sym_eigen(s_matrix(qi, a, lambda, l)).values(0) + mu * qi.dot(m * qi);
  }
  return total;
}

/// Smallest eigenvalue of diag(d) − zzᵀ for ascending d, by bisection on the
/// secular equation 1 = Σ zᵢ² / (dᵢ − x) below the first active pole.
template <typename Scalar>
Scalar smallest_eigenvalue_rank_one_downdate(const Vector<Scalar>& d, const Vector<Scalar>& z) {
  Eigen::Index first = 0;
  while (first < z.size() && z(first) == Scalar(0)) ++first;
  if (first == z.size()) return d(0);

  const Scalar pole = d(first);
  Scalar lo = pole - z.squaredNorm();
  Scalar hi = pole;
  auto secular = [&](Scalar x) {
    Scalar acc = 1;
    for (Eigen::Index i = first; i < z.size(); ++i) acc -= z(i) * z(i) / (d(i) - x);
    return acc;
  };
  for (;;) {
    const Scalar mid = lo + (hi - lo) / Scalar(2);
    if (mid <= lo || mid >= hi) break;
    if (secular(mid) > Scalar(0)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::min(d(0), lo + (hi - lo) / Scalar(2));
}

/// Evaluates ψ without a dense eigensolve per column.
///
/// L is diagonalised once as U·diag(ℓ)·Uᵀ, so S(q) = U(λ·diag(ℓ) − zzᵀ)Uᵀ
/// with z = UᵀAq, and λ₁(S(q)) comes from the rank-one secular equation.
template <typename Scalar>
class PsiEvaluator {
 public:
  PsiEvaluator(const Matrix<Scalar>& a, Scalar lambda, Scalar mu, const Matrix<Scalar>& l,
               const Matrix<Scalar>& m)
      : mu_(mu), m_(m) {
    const SymEigen<Scalar> eig = sym_eigen(l);
    shifts_ = lambda * eig.values;
    rotated_a_ = eig.vectors.transpose() * a;
  }

  Scalar operator()(const Matrix<Scalar>& q) const {
    Scalar total = 0;
    for (Eigen::Index i = 0; i < q.cols(); ++i) {
      const Vector<Scalar> z = rotated_a_ * q.col(i);
      total += smallest_eigenvalue_rank_one_downdate(shifts_, z);
      if (mu_ != Scalar(0)) total += mu_ * q.col(i).dot(m_ * q.col(i));
    }
    return total;
  }

 private:
  Scalar mu_;
  Matrix<Scalar> m_;
  Vector<Scalar> shifts_;
  Matrix<Scalar> rotated_a_;
};

template <typename Scalar>
struct ExtractedP {
  Matrix<Scalar> P;
  bool degenerate = false;
};

/// Unit eigenvectors of S(qᵢ) for the smallest eigenvalue, signed so that
/// pᵢᵀAqᵢ ≥ 0.
template <typename Scalar>
ExtractedP<Scalar> extract_p_with_diagnostics(const Matrix<Scalar>& q, const Matrix<Scalar>& a,
                                              Scalar lambda, const Matrix<Scalar>& l) {
  require_orthonormal(q, 1e-8, "extract_p");
  ExtractedP<Scalar> out;
  out.P.resize(a.rows(), q.cols());
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    const Vector<Scalar> qi = q.col(i);
    const SymEigen<Scalar> eig = sym_eigen(s_matrix(qi, a, lambda, l));
    Vector<Scalar> p = eig.vectors.col(0);
    p.normalize();
    if (p.dot(a * qi) < Scalar(0)) p = -p;
    out.P.col(i) = p;
    if (eig.values.size() > 1) {
      const Scalar scale = std::max(Scalar(1), eig.values.cwiseAbs().maxCoeff());
      if (eig.values(1) - eig.values(0) <= Scalar(1e-10) * scale) out.degenerate = true;
    }
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> extract_p(const Matrix<Scalar>& q, const Matrix<Scalar>& a, Scalar lambda,
                         const Matrix<Scalar>& l) {
  return extract_p_with_diagnostics(q, a, lambda, l).P;
}

/// βᵢ = (PᵀAQ)ᵢᵢ.
template <typename Scalar>
Vector<Scalar> extract_b(const Matrix<Scalar>& p, const Matrix<Scalar>& a,
                         const Matrix<Scalar>& q) {
  if (p.cols() != q.cols() || p.rows() != a.rows() || q.rows() != a.cols()) {
    throw std::invalid_argument("extract_b: P is " + std::to_string(p.rows()) + "x" +
                                std::to_string(p.cols()) + ", Q is " + std::to_string(q.rows()) +
                                "x" + std::to_string(q.cols()) + ", A is " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  Vector<Scalar> beta(p.cols());
  for (Eigen::Index i = 0; i < p.cols(); ++i) beta(i) = p.col(i).dot(a * q.col(i));
  return beta;
}

template <typename Scalar>
Matrix<Scalar> reconstruct(const Matrix<Scalar>& p, const Vector<Scalar>& beta,
                           const Matrix<Scalar>& q) {
  return p * beta.asDiagonal() * q.transpose();
}

template <typename Scalar>
Scalar rsvd_objective(const Matrix<Scalar>& a, const Matrix<Scalar>& p, const Vector<Scalar>& beta,
                      const Matrix<Scalar>& q, Scalar lambda, Scalar mu, const Matrix<Scalar>& l,
                      const Matrix<Scalar>& m) {
  return frobenius_norm_sq(a - reconstruct(p, beta, q)) + lambda * (p.transpose() * l * p).trace() +
         mu * (q.transpose() * m * q).trace();
}

/// Orthonormal m×k matrix from Gaussian draws.
template <typename Scalar = double>
Matrix<Scalar> random_orthonormal(Eigen::Index m, Eigen::Index k, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix<Scalar> q(m, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) q(i, j) = static_cast<Scalar>(normal(rng));
  }
  detail::gram_schmidt(q, k);
  detail::gram_schmidt(q, k);
  return q;
}

template <typename Scalar>
Matrix<Scalar> initial_q(const RsvdProblem<Scalar>& prob) {
  if (prob.init == InitialQ::random_orthonormal) {
    // Offset keeps the initial draw independent of the random-descent stream.
    std::mt19937_64 rng(prob.descent.seed ^ 0x9e3779b97f4a7c15ULL);
    return random_orthonormal<Scalar>(prob.A.cols(), prob.k, rng);
  }
  return svd(prob.A).V.leftCols(prob.k);
}

template <typename Scalar>
RsvdSolution<Scalar> solve_rsvd(const RsvdProblem<Scalar>& prob) {
  validate(prob);
  const PsiEvaluator<Scalar> evaluator(prob.A, prob.lambda, prob.mu, prob.L.L, prob.M.L);
  const Functional<Scalar> psi_fn = [&evaluator](const Matrix<Scalar>& q) { return evaluator(q); };

  DescentResult<Scalar> descent = minimize(psi_fn, initial_q(prob), prob.descent);

  RsvdSolution<Scalar> sol;
  sol.Q = std::move(descent.Q);
  const ExtractedP<Scalar> extracted = extract_p_with_diagnostics(sol.Q, prob.A, prob.lambda, prob.L.L);
  sol.P = extracted.P;
  sol.degenerate = extracted.degenerate;
  sol.beta = extract_b(sol.P, prob.A, sol.Q);
  sol.psi_trace = std::move(descent.trace);
  sol.psi = descent.psi;
  sol.objective = rsvd_objective(prob.A, sol.P, sol.beta, sol.Q, prob.lambda, prob.mu, prob.L.L, prob.M.L);
  sol.converged = descent.converged;
  sol.iterations = descent.iterations;
  sol.evaluations = descent.evaluations;
  sol.max_q_drift = descent.max_orthonormality_drift;
  sol.p_orthogonality = orthonormality_residual(sol.P);
  return sol;
}

}  // namespace regfact
