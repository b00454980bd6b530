#include "regfact/experiment.hpp"

#include "regfact/io.hpp"
#include "regfact/rsvd.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace regfact {

SignalShape parse_signal_shape(const std::string& name) {
  if (name == "gaussian_bump" || name == "gaussian-bump") return SignalShape::gaussian_bump;
  if (name == "sine") return SignalShape::sine;
  if (name == "custom_csv" || name == "custom-csv") return SignalShape::custom_csv;
  throw std::invalid_argument("unknown signal '" + name +
                              "' (expected gaussian_bump, sine or custom_csv)");
}

const char* to_string(SignalShape shape) {
  switch (shape) {
    case SignalShape::gaussian_bump: return "gaussian_bump";
    case SignalShape::sine: return "sine";
    case SignalShape::custom_csv: return "custom_csv";
  }
  return "unknown";
}

VectorXd make_signal(SignalShape shape, Eigen::Index length) {
  if (length < 1) throw std::invalid_argument("signal length must be positive");
  VectorXd s(length);
  const double centre = 0.5 * static_cast<double>(length - 1);
  const double width = static_cast<double>(length) / 8.0;
  for (Eigen::Index i = 0; i < length; ++i) {
    const double x = static_cast<double>(i);
    switch (shape) {
      case SignalShape::gaussian_bump:
        s(i) = std::exp(-0.5 * ((x - centre) / width) * ((x - centre) / width));
        break;
      case SignalShape::sine:
        s(i) = std::sin(std::numbers::pi * (x + 1.0) / static_cast<double>(length + 1));
        break;
      case SignalShape::custom_csv:
        throw std::invalid_argument("custom_csv signals must be supplied explicitly");
    }
  }
  return s / s.norm();
}

namespace {

VectorXd resolve_signal(SignalShape shape, const std::optional<VectorXd>& custom, Eigen::Index length,
                        const char* name) {
  if (shape != SignalShape::custom_csv) return make_signal(shape, length);
  if (!custom) throw std::invalid_argument(std::string("custom_csv signal needs a ") + name + " vector");
  if (custom->size() != length) {
    throw std::invalid_argument(std::string("custom ") + name + " has length " +
                                std::to_string(custom->size()) + ", expected " +
                                std::to_string(length));
  }
  const double norm = custom->norm();
  if (!(norm > 0) || !custom->allFinite()) {
    throw std::invalid_argument(std::string("custom ") + name + " must be finite and nonzero");
  }
  return *custom / norm;
}

// Flips the pair (left, right) so that left·reference ≥ 0; the product
// left·rightᵀ is unchanged.
void align_pair(MatrixXd& left, MatrixXd& right, const VectorXd& reference) {
  if (left.col(0).dot(reference) < 0) {
    left.col(0) = -left.col(0);
    right.col(0) = -right.col(0);
  }
}

}  // namespace

NoisyMatrix gen_noisy(const ExperimentSpec& spec) {
  if (spec.n < 1 || spec.m < 1) throw std::invalid_argument("experiment dimensions must be positive");
  if (!(spec.tau >= 0)) throw std::invalid_argument("noise scale tau must be nonnegative");
  NoisyMatrix out;
  out.u = resolve_signal(spec.signal, spec.custom_u, spec.n, "u");
  out.v = resolve_signal(spec.signal, spec.custom_v, spec.m, "v");
  out.A = out.u * out.v.transpose();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    for (Eigen::Index j = 0; j < spec.m; ++j) out.A(i, j) += spec.tau * normal(rng);
  }
  return out;
}

double relative_error(const MatrixXd& x, const MatrixXd& reference) {
  return (x - reference).norm() / reference.norm();
}

DenoiseResult run_denoise_demo(const ExperimentSpec& spec, const DenoiseOptions& options) {
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();

  DenoiseResult res;
  res.data = gen_noisy(spec);
  const MatrixXd truth = res.data.u * res.data.v.transpose();

  const auto t_svd = clock::now();
  SvdResult<double> base = svd(res.data.A);
  if (options.k > base.sigma.size()) {
    throw std::invalid_argument("rank k=" + std::to_string(options.k) + " exceeds min(n, m)");
  }
  res.svd_reconstruction = truncate_svd(base, options.k);
  const auto t_rsvd = clock::now();

  RsvdProblem<double> prob;
  prob.A = res.data.A;
  prob.k = options.k;
  prob.lambda = options.lambda;
  prob.mu = options.mu;
  prob.L = make_regularizer<double>(options.reg_d, spec.n);
  prob.M = make_regularizer<double>(options.reg_g, spec.m);
  prob.descent = options.descent;
  RsvdSolution<double> sol = solve_rsvd(prob);
  const auto t_end = clock::now();

  res.P = sol.P;
  res.Q = sol.Q;
  res.beta = sol.beta;
  res.rsvd_reconstruction = reconstruct(sol.P, sol.beta, sol.Q);
  res.err_svd = relative_error(res.svd_reconstruction, truth);
  res.err_rsvd = relative_error(res.rsvd_reconstruction, truth);

  auto ms = [](auto a, auto b) { return std::chrono::duration<double, std::milli>(b - a).count(); };

  nlohmann::json& j = res.manifest;
  j["solver"] = "rsvd";
  j["command"] = "denoise-demo";
  j["k"] = options.k;
  j["lambda"] = options.lambda;
  j["mu"] = options.mu;
  j["reg_d"] = std::string(to_string(options.reg_d));
  j["reg_g"] = std::string(to_string(options.reg_g));
  j["seed"] = spec.seed;
  j["experiment"] = {{"n", spec.n}, {"m", spec.m}, {"signal", to_string(spec.signal)}, {"tau", spec.tau}};
  j["descent"] = {{"strategy", to_string(options.descent.strategy)},
                  {"t0", options.descent.t0},
                  {"t_min", options.descent.t_min},
                  {"fd_step", options.descent.fd_step},
                  {"max_iters", options.descent.max_iters},
                  {"tol_abs", options.descent.tol_abs},
                  {"tol_rel", options.descent.tol_rel},
                  {"random_trials_per_iter", options.descent.random_trials_per_iter},
                  {"reorthonormalize_every", options.descent.reorthonormalize_every},
                  {"seed", options.descent.seed}};
  j["metrics"] = {{"err_svd", res.err_svd},
                  {"err_rsvd", res.err_rsvd},
                  {"err_svd_vs_input", relative_error(res.svd_reconstruction, res.data.A)},
                  {"err_rsvd_vs_input", relative_error(res.rsvd_reconstruction, res.data.A)},
                  {"psi_final", sol.psi},
                  {"objective", sol.objective},
                  {"iters", sol.iterations},
                  {"evaluations", sol.evaluations},
                  {"converged", sol.converged},
                  {"p_orthogonality", sol.p_orthogonality},
                  {"q_drift_max", sol.max_q_drift}};
  j["psi_trace"] = sol.psi_trace;
  j["timings_ms"] = {{"generate", ms(t_start, t_svd)},
                     {"svd", ms(t_svd, t_rsvd)},
                     {"rsvd", ms(t_rsvd, t_end)},
                     {"total", ms(t_start, t_end)}};

  if (options.output_dir) {
    const std::filesystem::path& dir = *options.output_dir;
    std::filesystem::create_directories(dir);
    io::write_matrix_csv(truth, dir / "truth.csv");
    io::write_matrix_csv(res.data.A, dir / "noisy.csv");
    io::write_matrix_csv(res.svd_reconstruction, dir / "svd.csv");
    io::write_matrix_csv(res.rsvd_reconstruction, dir / "rsvd.csv");
    io::write_pgm(truth, dir / "truth.pgm");
    io::write_pgm(res.data.A, dir / "noisy.pgm");
    io::write_pgm(res.svd_reconstruction, dir / "svd.pgm");
    io::write_pgm(res.rsvd_reconstruction, dir / "rsvd.pgm");

    MatrixXd svd_u = base.U.leftCols(1);
    MatrixXd svd_v = base.V.leftCols(1);
    align_pair(svd_u, svd_v, res.data.u);
    MatrixXd p1 = sol.P.leftCols(1);
    MatrixXd q1 = sol.Q.leftCols(1);
    align_pair(p1, q1, res.data.u);
    MatrixXd u_prof(spec.n, 3);
    u_prof << res.data.u, svd_u, p1;
    MatrixXd v_prof(spec.m, 3);
    v_prof << res.data.v, svd_v, q1;
    io::write_matrix_csv(u_prof, dir / "u_profiles.csv");
    io::write_matrix_csv(v_prof, dir / "v_profiles.csv");
    j["outputs"] = {"truth.csv", "noisy.csv", "svd.csv", "rsvd.csv", "truth.pgm", "noisy.pgm",
                    "svd.pgm", "rsvd.pgm", "u_profiles.csv", "v_profiles.csv"};
    io::write_text(dir / "manifest.json", j.dump(2) + "\n");
  }
  return res;
}

}  // namespace regfact
