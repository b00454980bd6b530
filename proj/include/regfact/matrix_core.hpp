#pragma once

// Dense kernels shared by every solver: Frobenius norm, a cyclic Jacobi
// symmetric eigensolver, a Gram-matrix SVD and a Cholesky-backed SPD solve.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace regfact {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

/// Raised by spd_solve when the Cholesky factorisation meets a non-positive
/// pivot. `pivot()` is the zero-based index of the offending column.
class NotPositiveDefinite : public std::domain_error {
 public:
  explicit NotPositiveDefinite(Eigen::Index pivot)
      : std::domain_error("matrix is not positive-definite (Cholesky breakdown at pivot " +
                          std::to_string(pivot) + ")"),
        pivot_(pivot) {}

  Eigen::Index pivot() const noexcept { return pivot_; }

 private:
  Eigen::Index pivot_;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& x) {
  return x.allFinite();
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& x, const char* what) {
  if (!x.allFinite()) {
    throw std::invalid_argument(std::string(what) + " contains NaN or Inf entries");
  }
}

/// Sum of squared entries. The squares are added in ascending order, so the
/// result does not depend on storage layout: ‖X‖² and ‖Xᵀ‖² agree bit for bit.
template <typename Derived>
typename Derived::Scalar frobenius_norm_sq(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  std::vector<Scalar> squares;
  squares.reserve(static_cast<std::size_t>(x.size()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) squares.push_back(x(i, j) * x(i, j));
  }
  std::sort(squares.begin(), squares.end());
  Scalar acc = 0;
  for (Scalar s : squares) acc += s;
  return acc;
}

/// ‖QᵀQ − I‖_F, the departure of Q's columns from orthonormality.
template <typename Derived>
typename Derived::Scalar orthonormality_residual(const Eigen::MatrixBase<Derived>& q) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> gram = q.transpose() * q;
  gram.diagonal().array() -= Scalar(1);
  return gram.norm();
}

/// Flips each column so its largest-magnitude entry (first index on ties) is
/// nonnegative. Returns the per-column signs that were applied.
template <typename Scalar>
Vector<Scalar> canonicalize_column_signs(Matrix<Scalar>& vectors) {
  Vector<Scalar> signs = Vector<Scalar>::Ones(vectors.cols());
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index best = 0;
    Scalar best_abs = -1;
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      const Scalar a = std::abs(vectors(r, c));
      if (a > best_abs) {
        best_abs = a;
        best = r;
      }
    }
    if (vectors.rows() > 0 && vectors(best, c) < 0) {
      vectors.col(c) = -vectors.col(c);
      signs(c) = -1;
    }
  }
  return signs;
}

template <typename Scalar>
struct SymEigen {
  Vector<Scalar> values;   // ascending
  Matrix<Scalar> vectors;  // column i pairs with values(i)
};

struct JacobiOptions {
  double rel_tol = 1e-14;
  int max_sweeps = 64;
};

/// Symmetric eigen-decomposition by cyclic Jacobi sweeps.
///
/// The input is symmetrised as (S + Sᵀ)/2 after checking that the asymmetry
/// is at most 1e-8·‖S‖. Sweeps stop once the off-diagonal Frobenius mass drops
/// to rel_tol·‖S‖ or max_sweeps is reached. Eigenvalues come back ascending
/// and every eigenvector follows the largest-entry-nonnegative sign rule.
template <typename Derived>
SymEigen<typename Derived::Scalar> sym_eigen(const Eigen::MatrixBase<Derived>& s_in,
                                             const JacobiOptions& opts = {}) {
  using Scalar = typename Derived::Scalar;
  if (s_in.rows() != s_in.cols()) {
    throw std::invalid_argument("sym_eigen: matrix is " + std::to_string(s_in.rows()) + "x" +
                                std::to_string(s_in.cols()) + ", expected square");
  }
  require_finite(s_in, "sym_eigen input");
  const Eigen::Index n = s_in.rows();
  const Scalar norm = s_in.norm();
  if ((s_in - s_in.transpose()).norm() > Scalar(1e-8) * norm) {
    throw std::invalid_argument("sym_eigen: input asymmetry exceeds 1e-8 relative");
  }

  Matrix<Scalar> a = (s_in + s_in.transpose()) / Scalar(2);
  Matrix<Scalar> v = Matrix<Scalar>::Identity(n, n);
  const Scalar threshold = Scalar(opts.rel_tol) * norm;

  auto off_mass = [&a, n]() {
    Scalar acc = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < j; ++i) acc += Scalar(2) * a(i, j) * a(i, j);
    }
    return std::sqrt(acc);
  };

  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    if (off_mass() <= threshold) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        // Rotation angle that annihilates a(p,q) (Golub & Van Loan 8.5.2).
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) /
                         (std::abs(theta) + std::sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / std::sqrt(t * t + Scalar(1));
        const Scalar sn = t * c;

        for (Eigen::Index r = 0; r < n; ++r) {
          const Scalar arp = a(r, p);
          const Scalar arq = a(r, q);
          a(r, p) = c * arp - sn * arq;
          a(r, q) = sn * arp + c * arq;
        }
        for (Eigen::Index r = 0; r < n; ++r) {
          const Scalar apr = a(p, r);
          const Scalar aqr = a(q, r);
          a(p, r) = c * apr - sn * aqr;
          a(q, r) = sn * apr + c * aqr;
        }
        a(p, q) = 0;
        a(q, p) = 0;
        for (Eigen::Index r = 0; r < n; ++r) {
          const Scalar vrp = v(r, p);
          const Scalar vrq = v(r, q);
          v(r, p) = c * vrp - sn * vrq;
          v(r, q) = sn * vrp + c * vrq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&a](Eigen::Index l, Eigen::Index r) { return a(l, l) < a(r, r); });

  SymEigen<Scalar> out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  canonicalize_column_signs(out.vectors);
  return out;
}

template <typename Scalar>
struct SvdResult {
  Matrix<Scalar> U;      // n x p, p = min(n, m)
  Vector<Scalar> sigma;  // descending, zeros past the numerical rank
  Matrix<Scalar> V;      // m x p
  Eigen::Index rank = 0;
};

namespace detail {

// Completes columns [first, cols) of `basis` to an orthonormal set, using
// standard basis vectors orthogonalised (twice) against what is already there.
template <typename Scalar>
void complete_orthonormal(Matrix<Scalar>& basis, Eigen::Index first) {
  const Eigen::Index n = basis.rows();
  Eigen::Index candidate = 0;
  for (Eigen::Index c = first; c < basis.cols(); ++c) {
    for (; candidate < n; ++candidate) {
      Vector<Scalar> e = Vector<Scalar>::Unit(n, candidate);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index j = 0; j < c; ++j) e -= basis.col(j).dot(e) * basis.col(j);
      }
      const Scalar nrm = e.norm();
      if (nrm > Scalar(0.5)) {
        basis.col(c) = e / nrm;
        ++candidate;
        break;
      }
    }
  }
}

// Modified Gram-Schmidt on columns [0, cols), in place.
template <typename Scalar>
void gram_schmidt(Matrix<Scalar>& basis, Eigen::Index cols) {
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index j = 0; j < c; ++j) {
      basis.col(c) -= basis.col(j).dot(basis.col(c)) * basis.col(j);
    }
    basis.col(c).normalize();
  }
}

}  // namespace detail

/// Thin SVD through the eigen-decomposition of the smaller Gram matrix.
///
/// Singular values at or below 1e-12·σ₁ count as zero; the matching left (or
/// right) vectors are completed to an orthonormal set so U and V always have
/// min(n, m) orthonormal columns. Each column of V has its largest-magnitude
/// entry nonnegative, and U follows V.
template <typename Derived>
SvdResult<typename Derived::Scalar> svd(const Eigen::MatrixBase<Derived>& a_in) {
  using Scalar = typename Derived::Scalar;
  require_finite(a_in, "svd input");
  const Matrix<Scalar> a = a_in;
  const bool tall = a.rows() >= a.cols();
  // Work on the orientation whose Gram matrix is the smaller one.
  const Matrix<Scalar> work = tall ? a : Matrix<Scalar>(a.transpose());
  const Eigen::Index p = work.cols();

  const SymEigen<Scalar> eig = sym_eigen(Matrix<Scalar>(work.transpose() * work));

  Matrix<Scalar> right(p, p);
  Vector<Scalar> sigma(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const Eigen::Index src = p - 1 - i;
    right.col(i) = eig.vectors.col(src);
    // ‖A v‖ keeps absolute accuracy near eps·σ₁; √λ of the Gram matrix does not.
    sigma(i) = (work * right.col(i)).norm();
  }

  const Scalar cutoff = Scalar(1e-12) * (p > 0 ? sigma(0) : Scalar(0));
  Eigen::Index rank = 0;
  while (rank < p && sigma(rank) > cutoff) ++rank;

  Matrix<Scalar> left = Matrix<Scalar>::Zero(work.rows(), p);
  for (Eigen::Index i = 0; i < rank; ++i) left.col(i) = work * right.col(i) / sigma(i);
  detail::gram_schmidt(left, rank);
  detail::complete_orthonormal(left, rank);
  for (Eigen::Index i = rank; i < p; ++i) sigma(i) = 0;

  SvdResult<Scalar> out;
  out.sigma = sigma;
  out.rank = rank;
  if (tall) {
    out.U = left;
    out.V = right;
  } else {
    out.U = right;
    out.V = left;
  }
  const Vector<Scalar> signs = canonicalize_column_signs(out.V);
  for (Eigen::Index i = 0; i < p; ++i) out.U.col(i) *= signs(i);
  return out;
}

/// Rank-k truncation Σ_{i≤k} σᵢ Uᵢ Vᵢᵀ.
template <typename Scalar>
Matrix<Scalar> truncate_svd(const SvdResult<Scalar>& res, Eigen::Index k) {
  if (k < 1 || k > res.sigma.size()) {
    throw std::invalid_argument("truncate_svd: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(res.sigma.size()) + "]");
  }
  return res.U.leftCols(k) * res.sigma.head(k).asDiagonal() * res.V.leftCols(k).transpose();
}

/// Lower Cholesky factor of an SPD matrix. Throws NotPositiveDefinite with the
/// failing pivot index.
template <typename Derived>
Matrix<typename Derived::Scalar> cholesky_lower(const Eigen::MatrixBase<Derived>& c) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = c.rows();
  Matrix<Scalar> l = Matrix<Scalar>::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Scalar d = c(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > Scalar(0))) throw NotPositiveDefinite(j);
    const Scalar ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (c(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return l;
}

/// Solves C·X = B for symmetric positive-definite C by Cholesky factorisation
/// and two triangular solves.
template <typename DerivedC, typename DerivedB>
Matrix<typename DerivedC::Scalar> spd_solve(const Eigen::MatrixBase<DerivedC>& c,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedC::Scalar;
  if (c.rows() != c.cols()) throw std::invalid_argument("spd_solve: C is not square");
  if (b.rows() != c.rows()) {
    throw std::invalid_argument("spd_solve: B has " + std::to_string(b.rows()) +
                                " rows, C is " + std::to_string(c.rows()) + "x" +
                                std::to_string(c.cols()));
  }
  require_finite(c, "spd_solve C");
  require_finite(b, "spd_solve B");
  if ((c - c.transpose()).norm() > Scalar(1e-10) * c.norm()) {
    throw std::invalid_argument("spd_solve: C is not symmetric");
  }
  const Matrix<Scalar> l = cholesky_lower(c);
  Matrix<Scalar> x = l.template triangularView<Eigen::Lower>().solve(b);
  l.transpose().template triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

}  // namespace regfact
