#pragma once

// Minimisation of a functional ψ over matrices with orthonormal columns.
// Every move left-multiplies Q by a plane rotation exp(t·K_ij) ∈ SO(m), where
// K_ij is the skew generator with +1 at (i, j) and −1 at (j, i), so QᵀQ = I
// is preserved exactly up to rounding.

#include "regfact/matrix_core.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace regfact {

enum class DescentStrategy { steepest, random };

inline DescentStrategy parse_strategy(const std::string& name) {
  if (name == "steepest") return DescentStrategy::steepest;
  if (name == "random") return DescentStrategy::random;
  throw std::invalid_argument("unknown descent strategy '" + name + "' (expected steepest or random)");
}

inline const char* to_string(DescentStrategy s) {
  return s == DescentStrategy::steepest ? "steepest" : "random";
}

struct DescentConfig {
  DescentStrategy strategy = DescentStrategy::steepest;
  double t0 = 0.5;
  double t_min = 1e-8;
  double fd_step = 1e-6;
  int max_iters = 2000;
  double tol_abs = 1e-12;
  double tol_rel = 1e-9;
  int random_trials_per_iter = 64;
  std::uint64_t seed = 0;
  int reorthonormalize_every = 50;
};

inline void validate(const DescentConfig& c) {
  if (!(c.t0 > 0) || !(c.t_min > 0) || !(c.t_min < c.t0)) {
    throw std::invalid_argument("descent step sizes need 0 < t_min < t0");
  }
  if (!(c.fd_step > 0)) throw std::invalid_argument("fd_step must be positive");
  if (c.max_iters < 1) throw std::invalid_argument("max_iters must be positive");
  if (!(c.tol_abs >= 0) || !(c.tol_rel >= 0)) {
    throw std::invalid_argument("descent tolerances must be nonnegative");
  }
  if (c.random_trials_per_iter < 1) {
    throw std::invalid_argument("random_trials_per_iter must be positive");
  }
  if (c.reorthonormalize_every < 1) {
    throw std::invalid_argument("reorthonormalize_every must be positive");
  }
}

/// A generator K_ij, 0 ≤ i < j < m. `alpha` enumerates the pairs row-major:
/// (0,1), (0,2), …, (0,m−1), (1,2), …, (m−2,m−1).
struct SkewIndex {
  Eigen::Index i = 0;
  Eigen::Index j = 1;
  Eigen::Index alpha = 0;

  static Eigen::Index count(Eigen::Index m) { return m * (m - 1) / 2; }

  static SkewIndex from_pair(Eigen::Index m, Eigen::Index i, Eigen::Index j) {
    if (!(0 <= i && i < j && j < m)) {
      throw std::invalid_argument("invalid skew index (" + std::to_string(i) + ", " +
                                  std::to_string(j) + ") for m=" + std::to_string(m));
    }
    return {i, j, i * m - i * (i + 1) / 2 + (j - i - 1)};
  }

  static SkewIndex from_alpha(Eigen::Index m, Eigen::Index alpha) {
    if (alpha < 0 || alpha >= count(m)) {
      throw std::invalid_argument("skew index alpha=" + std::to_string(alpha) +
                                  " outside [0, " + std::to_string(count(m)) + ")");
    }
    Eigen::Index i = 0;
    Eigen::Index rem = alpha;
    while (rem >= m - 1 - i) {
      rem -= m - 1 - i;
      ++i;
    }
    return {i, i + 1 + rem, alpha};
  }
};

/// exp(t·K_ij) in closed form.
template <typename Scalar = double>
Matrix<Scalar> givens_rotation(Eigen::Index m, const SkewIndex& idx, Scalar t) {
  if (!(0 <= idx.i && idx.i < idx.j && idx.j < m)) {
    throw std::invalid_argument("givens_rotation: index out of range for m=" + std::to_string(m));
  }
  Matrix<Scalar> r = Matrix<Scalar>::Identity(m, m);
  const Scalar c = std::cos(t);
  const Scalar s = std::sin(t);
  r(idx.i, idx.i) = c;
  r(idx.j, idx.j) = c;
  r(idx.i, idx.j) = s;
  r(idx.j, idx.i) = -s;
  return r;
}

/// Q ← exp(t·K_ij)·Q, touching only rows i and j.
template <typename Scalar>
void apply_rotation(Matrix<Scalar>& q, const SkewIndex& idx, Scalar t) {
  const Scalar c = std::cos(t);
  const Scalar s = std::sin(t);
  for (Eigen::Index col = 0; col < q.cols(); ++col) {
    const Scalar qi = q(idx.i, col);
    const Scalar qj = q(idx.j, col);
    q(idx.i, col) = c * qi + s * qj;
    q(idx.j, col) = -s * qi + c * qj;
  }
}

template <typename Scalar>
Matrix<Scalar> rotated(const Matrix<Scalar>& q, const SkewIndex& idx, Scalar t) {
  Matrix<Scalar> out = q;
  apply_rotation(out, idx, t);
  return out;
}

template <typename Scalar>
using Functional = std::function<Scalar(const Matrix<Scalar>&)>;

/// Forward difference (ψ(R(h)Q) − ψ(Q)) / h.
template <typename Scalar>
Scalar directional_derivative(const Functional<Scalar>& psi_fn, const Matrix<Scalar>& q,
                              Scalar psi_q, const SkewIndex& idx, Scalar fd_step) {
  return (psi_fn(rotated(q, idx, fd_step)) - psi_q) / fd_step;
}

template <typename Scalar>
Scalar directional_derivative(const Functional<Scalar>& psi_fn, const Matrix<Scalar>& q,
                              const SkewIndex& idx, Scalar fd_step) {
  return directional_derivative(psi_fn, q, psi_fn(q), idx, fd_step);
}

template <typename Scalar>
struct StepResult {
  Matrix<Scalar> Q;
  Scalar psi = 0;
  bool accepted = false;
  SkewIndex direction{};
  Scalar t = 0;
  long evaluations = 0;
};

/// Probes every generator, follows the one with the largest |∂ψ| in its
/// descent sense (lowest alpha on ties) and halves t from t0 until ψ drops by
/// more than `min_decrease` or t falls below t_min.
template <typename Scalar>
StepResult<Scalar> steepest_step(const Functional<Scalar>& psi_fn, const Matrix<Scalar>& q,
                                 Scalar psi_q, const DescentConfig& config,
                                 Scalar min_decrease = 0) {
  const Eigen::Index m = q.rows();
  StepResult<Scalar> out{q, psi_q, false, {}, 0, 0};
  if (m < 2) return out;

  const Eigen::Index directions = SkewIndex::count(m);
  const Scalar h = static_cast<Scalar>(config.fd_step);
  Eigen::Index best = -1;
  Scalar best_slope = 0;
  Matrix<Scalar> probe = q;
  for (Eigen::Index alpha = 0; alpha < directions; ++alpha) {
    const SkewIndex idx = SkewIndex::from_alpha(m, alpha);
    apply_rotation(probe, idx, h);
    const Scalar slope = (psi_fn(probe) - psi_q) / h;
    probe.row(idx.i) = q.row(idx.i);
    probe.row(idx.j) = q.row(idx.j);
    ++out.evaluations;
    if (std::abs(slope) > std::abs(best_slope)) {
      best_slope = slope;
      best = alpha;
    }
  }
  if (best < 0 || best_slope == Scalar(0)) return out;

  const SkewIndex idx = SkewIndex::from_alpha(m, best);
  const Scalar sign = best_slope < 0 ? Scalar(1) : Scalar(-1);
  for (Scalar t = static_cast<Scalar>(config.t0); t >= static_cast<Scalar>(config.t_min);
       t /= Scalar(2)) {
    Matrix<Scalar> candidate = rotated(q, idx, sign * t);
    const Scalar value = psi_fn(candidate);
    ++out.evaluations;
    if (psi_q - value > min_decrease) {
      out.Q = std::move(candidate);
      out.psi = value;
      out.accepted = true;
      out.direction = idx;
      out.t = sign * t;
      return out;
    }
  }
  return out;
}

/// Tries up to random_trials_per_iter random rotations (uniform generator,
/// log-uniform |t| in [t_min, t0], random sign) and takes the first one that
/// lowers ψ by more than `min_decrease`.
template <typename Scalar>
StepResult<Scalar> random_step(const Functional<Scalar>& psi_fn, const Matrix<Scalar>& q,
                               Scalar psi_q, const DescentConfig& config, std::mt19937_64& rng,
                               Scalar min_decrease = 0) {
  const Eigen::Index m = q.rows();
  StepResult<Scalar> out{q, psi_q, false, {}, 0, 0};
  if (m < 2) return out;

  std::uniform_int_distribution<Eigen::Index> pick(0, SkewIndex::count(m) - 1);
  std::uniform_real_distribution<double> log_mag(std::log(config.t_min), std::log(config.t0));
  std::bernoulli_distribution flip(0.5);
  for (int trial = 0; trial < config.random_trials_per_iter; ++trial) {
    const SkewIndex idx = SkewIndex::from_alpha(m, pick(rng));
    const Scalar t = static_cast<Scalar>(std::exp(log_mag(rng))) * (flip(rng) ? Scalar(-1) : Scalar(1));
    Matrix<Scalar> candidate = rotated(q, idx, t);
    const Scalar value = psi_fn(candidate);
    ++out.evaluations;
    if (psi_q - value > min_decrease) {
      out.Q = std::move(candidate);
      out.psi = value;
      out.accepted = true;
      out.direction = idx;
      out.t = t;
      return out;
    }
  }
  return out;
}

/// Deterministic sweep over every generator, both senses and every halved step
/// from t0 down to t_min; returns the first move lowering ψ by more than
/// `min_decrease`. The random strategy uses it to certify convergence, since a
/// finite batch of random trials can miss the few improving moves near an optimum.
template <typename Scalar>
StepResult<Scalar> exhaustive_pass(const Functional<Scalar>& psi_fn, const Matrix<Scalar>& q,
                                   Scalar psi_q, const DescentConfig& config,
                                   Scalar min_decrease = 0) {
  const Eigen::Index m = q.rows();
  StepResult<Scalar> out{q, psi_q, false, {}, 0, 0};
  Matrix<Scalar> probe = q;
  for (Eigen::Index alpha = 0; alpha < SkewIndex::count(m); ++alpha) {
    const SkewIndex idx = SkewIndex::from_alpha(m, alpha);
    for (Scalar t = static_cast<Scalar>(config.t0); t >= static_cast<Scalar>(config.t_min);
         t /= Scalar(2)) {
      for (Scalar sign : {Scalar(1), Scalar(-1)}) {
        apply_rotation(probe, idx, sign * t);
        const Scalar value = psi_fn(probe);
        ++out.evaluations;
        if (psi_q - value > min_decrease) {
          out.Q = std::move(probe);
          out.psi = value;
          out.accepted = true;
          out.direction = idx;
          out.t = sign * t;
          return out;
        }
        probe.row(idx.i) = q.row(idx.i);
        probe.row(idx.j) = q.row(idx.j);
      }
    }
  }
  return out;
}

template <typename Scalar>
struct DescentResult {
  Matrix<Scalar> Q;
  Scalar psi = 0;
  std::vector<Scalar> trace;  // ψ(Q0) followed by ψ after each accepted step
  bool converged = false;
  int iterations = 0;  // accepted steps
  long evaluations = 0;
  Scalar max_orthonormality_drift = 0;
};

/// Minimal decrease a step must achieve to count as progress.
inline double progress_threshold(const DescentConfig& c, double psi) {
  return c.tol_abs + c.tol_rel * std::abs(psi);
}

/// Repeats the configured step until one fails to improve ψ by more than
/// tol_abs + tol_rel·|ψ| (converged) or max_iters steps have been accepted.
/// A failed random step is followed by an exhaustive pass before convergence
/// is declared.
/// Q is re-orthonormalised every `reorthonormalize_every` accepted steps.
template <typename Scalar>
DescentResult<Scalar> minimize(const Functional<Scalar>& psi_fn, const Matrix<Scalar>& q0,
                               const DescentConfig& config) {
  validate(config);
  if (orthonormality_residual(q0) > Scalar(1e-8)) {
    throw std::invalid_argument("minimize: initial Q does not have orthonormal columns");
  }
  DescentResult<Scalar> res;
  res.Q = q0;
  res.psi = psi_fn(q0);
  res.evaluations = 1;
  res.trace.push_back(res.psi);
  res.max_orthonormality_drift = orthonormality_residual(q0);

  std::mt19937_64 rng(config.seed);
  while (res.iterations < config.max_iters) {
    const Scalar threshold = static_cast<Scalar>(progress_threshold(config, res.psi));
    StepResult<Scalar> step =
        config.strategy == DescentStrategy::steepest
            ? steepest_step(psi_fn, res.Q, res.psi, config, threshold)
            : random_step(psi_fn, res.Q, res.psi, config, rng, threshold);
    res.evaluations += step.evaluations;
    if (!step.accepted && config.strategy == DescentStrategy::random) {
      step = exhaustive_pass(psi_fn, res.Q, res.psi, config, threshold);
      res.evaluations += step.evaluations;
    }
    if (!step.accepted) {
      res.converged = true;
      break;
    }
    res.Q = std::move(step.Q);
    res.psi = step.psi;
    res.trace.push_back(res.psi);
    ++res.iterations;
    if (res.iterations % config.reorthonormalize_every == 0) {
      detail::gram_schmidt(res.Q, res.Q.cols());
    }
    res.max_orthonormality_drift =
        std::max(res.max_orthonormality_drift, orthonormality_residual(res.Q));
  }
  return res;
}

}  // namespace regfact
