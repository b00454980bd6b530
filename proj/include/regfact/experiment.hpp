#pragma once

// Rank-one denoising experiment: A = uvᵀ + τZ with smooth unit-norm u, v and
// i.i.d. standard normal Z, recovered by truncated SVD and by regularised SVD.

#include "regfact/manifold_descent.hpp"
#include "regfact/matrix_core.hpp"
#include "regfact/regularizers.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace regfact {

enum class SignalShape { gaussian_bump, sine, custom_csv };

SignalShape parse_signal_shape(const std::string& name);
const char* to_string(SignalShape shape);

struct ExperimentSpec {
  Eigen::Index n = 60;
  Eigen::Index m = 60;
  SignalShape signal = SignalShape::gaussian_bump;
  double tau = 0.05;
  std::uint64_t seed = 0;
  std::optional<VectorXd> custom_u;  // custom_csv only, normalised on use
  std::optional<VectorXd> custom_v;
};

struct NoisyMatrix {
  MatrixXd A;
  VectorXd u;
  VectorXd v;
};

/// Unit-norm profile of the given length. gaussian_bump is centred mid-vector
/// with standard deviation length/8; sine is one half period.
VectorXd make_signal(SignalShape shape, Eigen::Index length);

NoisyMatrix gen_noisy(const ExperimentSpec& spec);

struct DenoiseOptions {
  Eigen::Index k = 1;
  double lambda = 1.5;
  double mu = 1.5;
  RegularizerKind reg_d = RegularizerKind::second_difference;
  RegularizerKind reg_g = RegularizerKind::second_difference;
  DescentConfig descent{};
  std::optional<std::filesystem::path> output_dir;  // nothing written when empty
};

struct DenoiseResult {
  NoisyMatrix data;
  MatrixXd svd_reconstruction;
  MatrixXd rsvd_reconstruction;
  MatrixXd P;
  MatrixXd Q;
  VectorXd beta;
  double err_svd = 0;
  double err_rsvd = 0;
  nlohmann::json manifest;
};

/// ‖X − Y‖ / ‖Y‖.
double relative_error(const MatrixXd& x, const MatrixXd& reference);

/// Runs rank-k truncated SVD and regularised SVD on a generated noisy matrix.
/// With an output directory it writes truth/noisy/svd/rsvd matrices (CSV and
/// PGM), profile tables u_profiles.csv (columns u, svd U₁, P₁) and
/// v_profiles.csv (columns v, svd V₁, Q₁), and manifest.json.
DenoiseResult run_denoise_demo(const ExperimentSpec& spec, const DenoiseOptions& options);

}  // namespace regfact
