#pragma once

// Regularisation Gram matrices L = DᵀD (and M = GᵀG) consumed by the solvers.

#include "regfact/matrix_core.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace regfact {

enum class RegularizerKind { none, identity, second_difference, graph_laplacian, custom };

inline std::string_view to_string(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::none: return "none";
    case RegularizerKind::identity: return "identity";
    case RegularizerKind::second_difference: return "second_difference";
    case RegularizerKind::graph_laplacian: return "graph_laplacian";
    case RegularizerKind::custom: return "custom";
  }
  return "unknown";
}

/// Accepts the canonical names plus the dashed spellings used on the command line.
inline RegularizerKind parse_regularizer_kind(std::string_view name) {
  if (name == "none") return RegularizerKind::none;
  if (name == "identity") return RegularizerKind::identity;
  if (name == "second_difference" || name == "second-difference" || name == "d2") {
    return RegularizerKind::second_difference;
  }
  if (name == "graph_laplacian" || name == "graph-laplacian" || name == "laplacian") {
    return RegularizerKind::graph_laplacian;
  }
  if (name == "custom") return RegularizerKind::custom;
  throw std::invalid_argument("unknown regulariser kind '" + std::string(name) +
                              "' (expected none, identity, second_difference, "
                              "graph_laplacian or custom)");
}

template <typename Scalar>
struct RegularizerSpec {
  RegularizerKind kind = RegularizerKind::none;
  Eigen::Index size = 0;
  std::optional<Matrix<Scalar>> adjacency;  // graph_laplacian only
  std::optional<Matrix<Scalar>> custom_L;   // custom only
};

template <typename Scalar>
struct RegularizerMatrix {
  Matrix<Scalar> L;
  RegularizerSpec<Scalar> provenance;
};

/// The n×n second-difference operator: interior rows (1, −2, 1), boundary
/// rows (−1, 1) and (1, −1) so that constants lie in its kernel.
template <typename Scalar = double>
Matrix<Scalar> build_second_difference(Eigen::Index n) {
  if (n < 3) {
    throw std::invalid_argument("second-difference operator needs n >= 3, got " +
                                std::to_string(n));
  }
  Matrix<Scalar> d = Matrix<Scalar>::Zero(n, n);
  d(0, 0) = -1;
  d(0, 1) = 1;
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    d(i, i - 1) = 1;
    d(i, i) = -2;
    d(i, i + 1) = 1;
  }
  d(n - 1, n - 2) = 1;
  d(n - 1, n - 1) = -1;
  return d;
}

template <typename Derived>
void validate_adjacency(const Eigen::MatrixBase<Derived>& w) {
  using Scalar = typename Derived::Scalar;
  if (w.rows() != w.cols()) throw std::invalid_argument("adjacency matrix must be square");
  require_finite(w, "adjacency matrix");
  if ((w - w.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12)) {
    throw std::invalid_argument("adjacency matrix must be symmetric");
  }
  if ((w.array() < Scalar(0)).any()) {
    throw std::invalid_argument("adjacency matrix has negative weights");
  }
  if ((w.diagonal().array() != Scalar(0)).any()) {
    throw std::invalid_argument("adjacency matrix must have a zero diagonal");
  }
}

/// Combinatorial Laplacian Degree − Adjacency.
template <typename Derived>
Matrix<typename Derived::Scalar> build_graph_laplacian(const Eigen::MatrixBase<Derived>& adjacency) {
  using Scalar = typename Derived::Scalar;
  validate_adjacency(adjacency);
  const Matrix<Scalar> w = (adjacency + adjacency.transpose()) / Scalar(2);
  Matrix<Scalar> lap = -w;
  lap.diagonal() = w.rowwise().sum();
  return lap;
}

/// Path graph 0-1-...-(n-1) with unit weights.
template <typename Scalar = double>
Matrix<Scalar> path_adjacency(Eigen::Index n) {
  Matrix<Scalar> w = Matrix<Scalar>::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    w(i, i + 1) = 1;
    w(i + 1, i) = 1;
  }
  return w;
}

/// True when L is symmetric within 1e-12 (absolute, scaled by ‖L‖ when it
/// exceeds one) and its smallest eigenvalue is at least −1e-8·‖L‖.
template <typename Derived>
bool is_symmetric_psd(const Eigen::MatrixBase<Derived>& l) {
  using Scalar = typename Derived::Scalar;
  if (l.rows() != l.cols() || !l.allFinite()) return false;
  const Scalar norm = l.norm();
  if ((l - l.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12) * std::max(Scalar(1), norm)) {
    return false;
  }
  if (l.rows() == 0 || norm == Scalar(0)) return true;
  return sym_eigen(l).values(0) >= Scalar(-1e-8) * norm;
}

template <typename Scalar>
RegularizerMatrix<Scalar> realize(const RegularizerSpec<Scalar>& spec) {
  const Eigen::Index n = spec.size;
  if (n < 1) throw std::invalid_argument("regulariser size must be positive");
  RegularizerMatrix<Scalar> out{Matrix<Scalar>(), spec};
  switch (spec.kind) {
    case RegularizerKind::none:
      out.L = Matrix<Scalar>::Zero(n, n);
      break;
    case RegularizerKind::identity:
      out.L = Matrix<Scalar>::Identity(n, n);
      break;
    case RegularizerKind::second_difference: {
      const Matrix<Scalar> d = build_second_difference<Scalar>(n);
      out.L = d.transpose() * d;
      break;
    }
    case RegularizerKind::graph_laplacian:
      if (!spec.adjacency) throw std::invalid_argument("graph_laplacian regulariser needs an adjacency matrix");
      if (spec.adjacency->rows() != n) {
        throw std::invalid_argument("adjacency matrix is " + std::to_string(spec.adjacency->rows()) +
                                    "x" + std::to_string(spec.adjacency->cols()) + ", expected " +
                                    std::to_string(n) + "x" + std::to_string(n));
      }
      out.L = build_graph_laplacian(*spec.adjacency);
      break;
    case RegularizerKind::custom:
      if (!spec.custom_L) throw std::invalid_argument("custom regulariser needs an explicit L matrix");
      if (spec.custom_L->rows() != n || spec.custom_L->cols() != n) {
        throw std::invalid_argument("custom L is " + std::to_string(spec.custom_L->rows()) + "x" +
                                    std::to_string(spec.custom_L->cols()) + ", expected " +
                                    std::to_string(n) + "x" + std::to_string(n));
      }
      if (!is_symmetric_psd(*spec.custom_L)) {
        throw std::invalid_argument("custom L is not symmetric positive semi-definite");
      }
      out.L = *spec.custom_L;
      break;
  }
  return out;
}

template <typename Scalar = double>
RegularizerMatrix<Scalar> make_regularizer(RegularizerKind kind, Eigen::Index n) {
  RegularizerSpec<Scalar> spec;
  spec.kind = kind;
  spec.size = n;
  return realize(spec);
}

}  // namespace regfact
