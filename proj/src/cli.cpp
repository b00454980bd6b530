#include "regfact/cli.hpp"

#include "regfact/experiment.hpp"
#include "regfact/io.hpp"
#include "regfact/rpca.hpp"
#include "regfact/rsvd.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace regfact {

namespace {

constexpr const char* kVersion = "1.0.0";

struct RunOptions {
  std::string input;
  std::string truth;
  std::string output_dir = ".";
  int rank = 1;
  double lambda = 0;
  double mu = 0;
  std::string reg_d = "none";
  std::string reg_g = "none";
  std::string strategy = "steepest";
  std::string init = "svd";
  int max_iters = 2000;
  double tol = 1e-9;
  double step = 0.5;
  std::uint64_t seed = 0;
  // experiment only
  int n = 60;
  int m = 60;
  double tau = 0.05;
  std::string signal = "gaussian_bump";
  std::string u_csv;
  std::string v_csv;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void add_output_options(CLI::App& cmd, RunOptions& o) {
  cmd.add_option("--output-dir", o.output_dir, "Directory for results and manifest.json")
      ->capture_default_str();
  cmd.add_option("--seed", o.seed, "Seed for every random draw")->capture_default_str();
}

void add_solver_options(CLI::App& cmd, RunOptions& o, bool needs_regularisers) {
  cmd.add_option("--input", o.input, "Data matrix A as CSV")->required();
  cmd.add_option("--truth", o.truth, "Optional ground-truth matrix for error metrics");
  cmd.add_option("--rank", o.rank, "Target rank k")->capture_default_str()->check(CLI::PositiveNumber);
  add_output_options(cmd, o);
  if (!needs_regularisers) return;
  cmd.add_option("--lambda", o.lambda, "Weight of the row-side penalty")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  cmd.add_option("--mu", o.mu, "Weight of the column-side penalty")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  cmd.add_option("--reg-d", o.reg_d, "Row-side regulariser KIND[:PATH]")->capture_default_str();
  cmd.add_option("--reg-g", o.reg_g, "Column-side regulariser KIND[:PATH]")->capture_default_str();
}

void add_descent_options(CLI::App& cmd, RunOptions& o) {
  cmd.add_option("--strategy", o.strategy, "steepest or random")
      ->capture_default_str()
      ->check(CLI::IsMember({"steepest", "random"}));
  cmd.add_option("--init", o.init, "Initial Q: svd (leading right singular vectors) or random")
      ->capture_default_str()
      ->check(CLI::IsMember({"svd", "random"}));
  cmd.add_option("--max-iters", o.max_iters, "Accepted-step budget")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd.add_option("--tol", o.tol, "Relative improvement tolerance")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  cmd.add_option("--step", o.step, "Initial rotation angle t0")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

void add_experiment_options(CLI::App& cmd, RunOptions& o) {
  cmd.add_option("--n", o.n, "Rows of the generated matrix")->capture_default_str()->check(CLI::PositiveNumber);
  cmd.add_option("--m", o.m, "Columns of the generated matrix")->capture_default_str()->check(CLI::PositiveNumber);
  cmd.add_option("--tau", o.tau, "Noise scale")->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd.add_option("--signal", o.signal, "gaussian_bump, sine or custom_csv")
      ->capture_default_str()
      ->check(CLI::IsMember({"gaussian_bump", "sine", "custom_csv"}));
  cmd.add_option("--u-csv", o.u_csv, "Column vector u for custom_csv signals");
  cmd.add_option("--v-csv", o.v_csv, "Column vector v for custom_csv signals");
}

struct ParsedRegularizer {
  RegularizerKind kind;
  std::string path;
  std::string text;
};

ParsedRegularizer parse_reg_flag(const std::string& flag) {
  const std::size_t colon = flag.find(':');
  ParsedRegularizer r{};
  try {
    r.kind = parse_regularizer_kind(flag.substr(0, colon));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (colon != std::string::npos) r.path = flag.substr(colon + 1);
  const bool needs_path = r.kind == RegularizerKind::graph_laplacian || r.kind == RegularizerKind::custom;
  if (needs_path && r.path.empty()) {
    throw UsageError("regulariser '" + flag + "' needs a matrix file: use " +
                     std::string(to_string(r.kind)) + ":PATH");
  }
  if (!needs_path && !r.path.empty()) {
    throw UsageError("regulariser kind " + std::string(to_string(r.kind)) + " takes no file");
  }
  r.text = flag;
  return r;
}

RegularizerMatrix<double> load_regularizer(const ParsedRegularizer& r, Eigen::Index size) {
  RegularizerSpec<double> spec;
  spec.kind = r.kind;
  spec.size = size;
  if (r.kind == RegularizerKind::graph_laplacian) spec.adjacency = io::read_matrix_csv(r.path);
  if (r.kind == RegularizerKind::custom) spec.custom_L = io::read_matrix_csv(r.path);
  return realize(spec);
}

DescentConfig descent_from(const RunOptions& o) {
  DescentConfig c;
  c.strategy = parse_strategy(o.strategy);
  c.max_iters = o.max_iters;
  c.tol_rel = o.tol;
  c.t0 = o.step;
  c.seed = o.seed;
  if (!(c.t_min < c.t0)) throw UsageError("--step must exceed the minimal step " + std::to_string(c.t_min));
  return c;
}

nlohmann::json descent_json(const DescentConfig& c) {
  return {{"strategy", to_string(c.strategy)}, {"t0", c.t0},
          {"t_min", c.t_min},                   {"fd_step", c.fd_step},
          {"max_iters", c.max_iters},           {"tol_abs", c.tol_abs},
          {"tol_rel", c.tol_rel},               {"random_trials_per_iter", c.random_trials_per_iter},
          {"reorthonormalize_every", c.reorthonormalize_every}, {"seed", c.seed}};
}

VectorXd load_vector(const std::string& path) {
  const MatrixXd x = io::read_matrix_csv(path);
  if (x.cols() != 1 && x.rows() != 1) {
    throw std::invalid_argument(path + ": expected a single row or column, got " +
                                std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
  }
  return Eigen::Map<const VectorXd>(x.data(), x.size());
}

ExperimentSpec experiment_from(const RunOptions& o) {
  ExperimentSpec spec;
  spec.n = o.n;
  spec.m = o.m;
  spec.tau = o.tau;
  spec.seed = o.seed;
  spec.signal = parse_signal_shape(o.signal);
  if (spec.signal == SignalShape::custom_csv) {
    if (o.u_csv.empty() || o.v_csv.empty()) {
      throw UsageError("--signal custom_csv needs both --u-csv and --v-csv");
    }
    spec.custom_u = load_vector(o.u_csv);
    spec.custom_v = load_vector(o.v_csv);
  }
  return spec;
}

nlohmann::json base_manifest(const std::string& command, const RunOptions& o,
                             const std::vector<std::string>& args) {
  nlohmann::json j;
  j["command"] = command;
  j["argv"] = args;
  j["version"] = kVersion;
  j["seed"] = o.seed;
  j["output_dir"] = o.output_dir;
  if (!o.input.empty()) j["input"] = o.input;
  if (!o.truth.empty()) j["truth"] = o.truth;
  return j;
}

void fill_errors(nlohmann::json& metrics, const MatrixXd& a, const MatrixXd& recon,
                 const std::optional<MatrixXd>& truth, const char* truth_key) {
  metrics["rel_err_input"] = relative_error(recon, a);
  metrics["err_svd"] = nullptr;
  metrics["err_rsvd"] = nullptr;
  if (truth) metrics[truth_key] = relative_error(recon, *truth);
}

std::optional<MatrixXd> load_truth(const RunOptions& o, const MatrixXd& a) {
  if (o.truth.empty()) return std::nullopt;
  MatrixXd t = io::read_matrix_csv(o.truth);
  if (t.rows() != a.rows() || t.cols() != a.cols()) {
    throw std::invalid_argument("--truth is " + std::to_string(t.rows()) + "x" +
                                std::to_string(t.cols()) + " but --input is " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  return t;
}

void check_rank(int rank, const MatrixXd& a) {
  if (rank > std::min(a.rows(), a.cols())) {
    throw std::invalid_argument("--rank " + std::to_string(rank) + " exceeds min(rows, cols) = " +
                                std::to_string(std::min(a.rows(), a.cols())) + " of the input");
  }
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

void write_manifest(const std::filesystem::path& dir, const nlohmann::json& j, std::ostream& out) {
  io::write_text(dir / "manifest.json", j.dump(2) + "\n");
  out << "wrote " << (dir / "manifest.json").string() << "\n";
}

int run_svd(const RunOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const MatrixXd a = io::read_matrix_csv(o.input);
  check_rank(o.rank, a);
  const std::optional<MatrixXd> truth = load_truth(o, a);
  const SvdResult<double> res = svd(a);
  const MatrixXd recon = truncate_svd(res, o.rank);
  const std::filesystem::path dir = o.output_dir;
  io::write_matrix_csv(res.U.leftCols(o.rank), dir / "U.csv");
  io::write_matrix_csv(res.sigma.head(o.rank), dir / "sigma.csv");
  io::write_matrix_csv(res.V.leftCols(o.rank), dir / "V.csv");
  io::write_matrix_csv(recon, dir / "reconstruction.csv");

  nlohmann::json j = base_manifest("svd", o, args);
  j["solver"] = "svd";
  j["k"] = o.rank;
  j["lambda"] = 0.0;
  j["mu"] = 0.0;
  j["reg_d"] = "none";
  j["reg_g"] = "none";
  nlohmann::json metrics;
  fill_errors(metrics, a, recon, truth, "err_svd");
  metrics["psi_final"] = nullptr;
  metrics["iters"] = nullptr;
  metrics["numerical_rank"] = res.rank;
  j["metrics"] = metrics;
  j["sigma"] = std::vector<double>(res.sigma.data(), res.sigma.data() + res.sigma.size());
  j["outputs"] = {"U.csv", "sigma.csv", "V.csv", "reconstruction.csv"};
  j["timings_ms"] = {{"total", elapsed_ms(start)}};
  write_manifest(dir, j, out);
  return 0;
}

int run_rpca(const RunOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const ParsedRegularizer rd = parse_reg_flag(o.reg_d);
  const ParsedRegularizer rg = parse_reg_flag(o.reg_g);
  const MatrixXd a = io::read_matrix_csv(o.input);
  check_rank(o.rank, a);
  const std::optional<MatrixXd> truth = load_truth(o, a);

  PcaProblem<double> prob;
  prob.A = a;
  prob.k = o.rank;
  prob.lambda = o.lambda;
  prob.mu = o.mu;
  prob.L = load_regularizer(rd, a.rows());
  prob.M = load_regularizer(rg, a.cols());
  const PcaSolution<double> sol = solve_rpca(prob);
  const MatrixXd recon = sol.P * sol.Q.transpose();

  const std::filesystem::path dir = o.output_dir;
  io::write_matrix_csv(sol.P, dir / "P.csv");
  io::write_matrix_csv(sol.Q, dir / "Q.csv");
  io::write_matrix_csv(recon, dir / "reconstruction.csv");

  nlohmann::json j = base_manifest("rpca", o, args);
  j["solver"] = "rpca";
  j["k"] = o.rank;
  j["lambda"] = o.lambda;
  j["mu"] = o.mu;
  j["reg_d"] = rd.text;
  j["reg_g"] = rg.text;
  nlohmann::json metrics;
  fill_errors(metrics, a, recon, truth, "err_rsvd");
  metrics["objective"] = sol.objective;
  metrics["psi_final"] = nullptr;
  metrics["iters"] = nullptr;
  metrics["degenerate"] = sol.degenerate;
  j["metrics"] = metrics;
  j["k_spectrum"] = std::vector<double>(sol.k_spectrum.data(), sol.k_spectrum.data() + sol.k_spectrum.size());
  j["outputs"] = {"P.csv", "Q.csv", "reconstruction.csv"};
  j["timings_ms"] = {{"total", elapsed_ms(start)}};
  write_manifest(dir, j, out);
  return 0;
}

int run_rsvd(const RunOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const ParsedRegularizer rd = parse_reg_flag(o.reg_d);
  const ParsedRegularizer rg = parse_reg_flag(o.reg_g);
  const DescentConfig descent = descent_from(o);
  const MatrixXd a = io::read_matrix_csv(o.input);
  check_rank(o.rank, a);
  const std::optional<MatrixXd> truth = load_truth(o, a);

  RsvdProblem<double> prob;
  prob.A = a;
  prob.k = o.rank;
  prob.lambda = o.lambda;
  prob.mu = o.mu;
  prob.L = load_regularizer(rd, a.rows());
  prob.M = load_regularizer(rg, a.cols());
  prob.descent = descent;
  prob.init = o.init == "random" ? InitialQ::random_orthonormal : InitialQ::leading_singular_vectors;
  const RsvdSolution<double> sol = solve_rsvd(prob);
  const MatrixXd recon = reconstruct(sol.P, sol.beta, sol.Q);

  const std::filesystem::path dir = o.output_dir;
  io::write_matrix_csv(sol.P, dir / "P.csv");
  io::write_matrix_csv(sol.beta, dir / "B.csv");
  io::write_matrix_csv(sol.Q, dir / "Q.csv");
  io::write_matrix_csv(recon, dir / "reconstruction.csv");
  io::write_matrix_csv(Eigen::Map<const VectorXd>(sol.psi_trace.data(),
                                                   static_cast<Eigen::Index>(sol.psi_trace.size())),
                       dir / "psi_trace.csv");

  nlohmann::json j = base_manifest("rsvd", o, args);
  j["solver"] = "rsvd";
  j["k"] = o.rank;
  j["lambda"] = o.lambda;
  j["mu"] = o.mu;
  j["reg_d"] = rd.text;
  j["reg_g"] = rg.text;
  j["init"] = o.init;
  j["descent"] = descent_json(descent);
  nlohmann::json metrics;
  fill_errors(metrics, a, recon, truth, "err_rsvd");
  metrics["objective"] = sol.objective;
  metrics["psi_final"] = sol.psi;
  metrics["iters"] = sol.iterations;
  metrics["evaluations"] = sol.evaluations;
  metrics["converged"] = sol.converged;
  metrics["p_orthogonality"] = sol.p_orthogonality;
  metrics["q_drift_max"] = sol.max_q_drift;
  metrics["degenerate"] = sol.degenerate;
  j["metrics"] = metrics;
  j["beta"] = std::vector<double>(sol.beta.data(), sol.beta.data() + sol.beta.size());
  j["outputs"] = {"P.csv", "B.csv", "Q.csv", "reconstruction.csv", "psi_trace.csv"};
  j["timings_ms"] = {{"total", elapsed_ms(start)}};
  write_manifest(dir, j, out);
  return 0;
}

int run_gen_noisy(const RunOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const ExperimentSpec spec = experiment_from(o);
  const NoisyMatrix data = gen_noisy(spec);
  const std::filesystem::path dir = o.output_dir;
  io::write_matrix_csv(data.A, dir / "A.csv");
  io::write_matrix_csv(data.u, dir / "u.csv");
  io::write_matrix_csv(data.v, dir / "v.csv");
  io::write_matrix_csv(data.u * data.v.transpose(), dir / "truth.csv");

  nlohmann::json j = base_manifest("gen-noisy", o, args);
  j["solver"] = nullptr;
  j["experiment"] = {{"n", spec.n}, {"m", spec.m}, {"signal", to_string(spec.signal)}, {"tau", spec.tau}};
  j["metrics"] = {{"noise_energy_per_entry",
                   frobenius_norm_sq(MatrixXd(data.A - data.u * data.v.transpose())) /
                       static_cast<double>(spec.n * spec.m)}};
  j["outputs"] = {"A.csv", "u.csv", "v.csv", "truth.csv"};
  write_manifest(dir, j, out);
  return 0;
}

int run_denoise(const RunOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const ParsedRegularizer rd = parse_reg_flag(o.reg_d);
  const ParsedRegularizer rg = parse_reg_flag(o.reg_g);
  if (rd.kind == RegularizerKind::graph_laplacian || rd.kind == RegularizerKind::custom ||
      rg.kind == RegularizerKind::graph_laplacian || rg.kind == RegularizerKind::custom) {
    throw UsageError("denoise-demo supports none, identity and second_difference regularisers");
  }
  const ExperimentSpec spec = experiment_from(o);
  DenoiseOptions opts;
  opts.k = o.rank;
  opts.lambda = o.lambda;
  opts.mu = o.mu;
  opts.reg_d = rd.kind;
  opts.reg_g = rg.kind;
  opts.descent = descent_from(o);
  opts.output_dir = std::filesystem::path(o.output_dir);
  DenoiseResult res = run_denoise_demo(spec, opts);
  // Rewrite the manifest with the invocation details.
  nlohmann::json j = base_manifest("denoise-demo", o, args);
  j.update(res.manifest);
  j["argv"] = args;
  j["version"] = kVersion;
  write_manifest(o.output_dir, j, out);
  out << "err_svd=" << res.err_svd << " err_rsvd=" << res.err_rsvd << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Regularised low-rank factorisations (PCA- and SVD-type)", "regfact"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  RunOptions svd_o, rpca_o, rsvd_o, gen_o, demo_o;
  demo_o.lambda = 1.5;
  demo_o.mu = 1.5;
  demo_o.reg_d = "second_difference";
  demo_o.reg_g = "second_difference";

  CLI::App* svd_cmd = app.add_subcommand("svd", "Truncated SVD baseline");
  add_solver_options(*svd_cmd, svd_o, false);

  CLI::App* rpca_cmd = app.add_subcommand("rpca", "Closed-form regularised PCA (A ~ P Q^T)");
  add_solver_options(*rpca_cmd, rpca_o, true);

  CLI::App* rsvd_cmd = app.add_subcommand("rsvd", "Regularised SVD by rotation descent (A ~ P B Q^T)");
  add_solver_options(*rsvd_cmd, rsvd_o, true);
  add_descent_options(*rsvd_cmd, rsvd_o);

  CLI::App* gen_cmd = app.add_subcommand("gen-noisy", "Generate A = u v^T + tau Z");
  add_experiment_options(*gen_cmd, gen_o);
  add_output_options(*gen_cmd, gen_o);

  CLI::App* demo_cmd = app.add_subcommand("denoise-demo", "Compare rank-k SVD and RSVD on a noisy rank-1 matrix");
  add_experiment_options(*demo_cmd, demo_o);
  add_output_options(*demo_cmd, demo_o);
  demo_cmd->add_option("--rank", demo_o.rank, "Target rank k")->capture_default_str()->check(CLI::PositiveNumber);
  demo_cmd->add_option("--lambda", demo_o.lambda, "Row-side weight")->capture_default_str()->check(CLI::NonNegativeNumber);
  demo_cmd->add_option("--mu", demo_o.mu, "Column-side weight")->capture_default_str()->check(CLI::NonNegativeNumber);
  demo_cmd->add_option("--reg-d", demo_o.reg_d, "Row-side regulariser KIND")->capture_default_str();
  demo_cmd->add_option("--reg-g", demo_o.reg_g, "Column-side regulariser KIND")->capture_default_str();
  add_descent_options(*demo_cmd, demo_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "regfact: " << e.what() << "\n";
    err << "run 'regfact --help' or 'regfact <command> --help' for usage\n";
    return 2;
  }

  const std::vector<std::string> args(argv + 1, argv + argc);
  try {
    if (svd_cmd->parsed()) return run_svd(svd_o, args, out);
    if (rpca_cmd->parsed()) return run_rpca(rpca_o, args, out);
    if (rsvd_cmd->parsed()) return run_rsvd(rsvd_o, args, out);
    if (gen_cmd->parsed()) return run_gen_noisy(gen_o, args, out);
    if (demo_cmd->parsed()) return run_denoise(demo_o, args, out);
  } catch (const UsageError& e) {
    err << "regfact: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "regfact: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace regfact
