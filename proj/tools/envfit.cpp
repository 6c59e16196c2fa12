// envfit: response-envelope fits, cross-validated dimension selection and
// simulation tables from the command line.
//
// Exit status: 0 success, 2 input error, 3 numerical failure.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "envelope/csv_io.hpp"
#include "envelope/envelope_api.hpp"
#include "envelope/parallel.hpp"
#include "envelope/simlab.hpp"

namespace fs = std::filesystem;
using namespace envelope;

namespace {

constexpr int kInputError = 2;
constexpr int kNumericalError = 3;

void log(const std::string& msg) { std::cerr << "envfit: " << msg << '\n'; }

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::FoldTooSmall:
      return kInputError;
    default:
      return kNumericalError;
  }
}

struct SolverFlags {
  std::string mode = "row";
  int max_sweeps = SolverOptions{}.max_sweeps;
  double rel_tol = SolverOptions{}.rel_tol;
  int inner_max_iter = SolverOptions{}.inner_max_iter;
  double inner_grad_tol = SolverOptions{}.inner_grad_tol;

  void attach(CLI::App* app) {
    app->add_option("--mode", mode, "row (cyclic row updates) or direct (joint quasi-Newton)")
        ->check(CLI::IsMember({"row", "direct"}));
    app->add_option("--max-sweeps", max_sweeps, "maximum descent sweeps")->check(CLI::PositiveNumber);
    app->add_option("--rel-tol", rel_tol, "relative objective decrease that ends the descent")
        ->check(CLI::PositiveNumber);
    app->add_option("--inner-max-iter", inner_max_iter, "Newton iterations per row")
        ->check(CLI::PositiveNumber);
    app->add_option("--inner-grad-tol", inner_grad_tol, "gradient norm that ends a row update")
        ->check(CLI::PositiveNumber);
  }

  SolverOptions options() const {
    SolverOptions o;
    o.mode = mode == "direct" ? SolverMode::DirectFull : SolverMode::RowCyclic;
    o.max_sweeps = max_sweeps;
    o.rel_tol = rel_tol;
    o.inner_max_iter = inner_max_iter;
    o.inner_grad_tol = inner_grad_tol;
    o.validate();
    return o;
  }
};

struct DataFlags {
  std::string x_path;
  std::string y_path;
  bool header = false;

  void attach(CLI::App* app) {
    app->add_option("--x", x_path, "predictor CSV (n rows, p columns)")->required()->check(CLI::ExistingFile);
    app->add_option("--y", y_path, "response CSV (n rows, r columns)")->required()->check(CLI::ExistingFile);
    app->add_flag("--header", header, "skip the first line of each CSV");
  }

  RegressionData load() const {
    Matrix x = read_matrix_csv(x_path, header);
    Matrix y = read_matrix_csv(y_path, header);
    return RegressionData(std::move(x), std::move(y));
  }
};

// Writes to `path`, or stdout for an empty path or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::InvalidInput, "cannot write " + path);
  out << text;
}

void write_matrix(const fs::path& dir, const std::string& name, const Matrix& m) {
  write_matrix_csv((dir / name).string(), m);
}

struct FitCommand {
  DataFlags data;
  SolverFlags solver;
  int u = -1;
  bool ols = false;
  std::string out_dir;

  void attach(CLI::App* app) {
    data.attach(app);
    solver.attach(app);
    app->add_option("--u", u, "envelope dimension (0..r)");
    app->add_flag("--ols", ols, "report ordinary least squares instead of an envelope fit");
    app->add_option("--out", out_dir, "directory for gamma.csv, beta.csv, alpha.csv, sigma.csv");
  }

  int run() {
    const RegressionData d = data.load();
    const ResponseMoments moments = response_moments(d);
    std::ostringstream report;
    report << "key,value\n";
    report << "n," << d.n() << "\np," << d.p() << "\nr," << d.r() << '\n';

    Matrix beta;
    Vector alpha;
    std::optional<ResponseEnvelopeFit> fit;
    if (ols) {
      beta = moments.b;
      alpha = moments.y_mean - beta * moments.x_mean;
      report << "method,ols\n";
    } else {
      if (u < 0) fail(ErrorCode::InvalidInput, "--u is required unless --ols is given");
      if (u > d.r()) {
        fail(ErrorCode::InvalidInput, "--u " + std::to_string(u) + " exceeds r = " + std::to_string(d.r()));
      }
      fit = fit_response_envelope(moments, u, solver.options());
      beta = fit->beta_hat;
      alpha = fit->alpha_hat;
      const EnvelopeFit& f = fit->fit;
      report << "method,envelope\nu," << u << "\nobjective," << num(f.objective) << '\n';
      if (f.start) {
        report << "start_criterion," << to_string(f.start->criterion) << '\n';
        report << "start_objective," << num(f.start->score) << '\n';
        report << "angle_start_final_deg," << num(subspace_angle_deg(f.start->basis, f.gamma_hat)) << '\n';
      } else {
        report << "start_criterion,none\nstart_objective,NA\nangle_start_final_deg,NA\n";
      }
      report << "sweeps," << f.sweeps << "\nconverged," << (f.converged ? 1 : 0) << '\n';
      report << "warnings," << f.warnings.size() << '\n';
      for (const std::string& w : f.warnings) log("warning: " + w);
      log("fitted u = " + std::to_string(u) + ", objective " + num(f.objective) + ", " +
          std::to_string(f.sweeps) + " sweeps" + (f.converged ? "" : " (not converged)"));
    }
    report << "beta_frobenius," << num(beta.norm()) << '\n';

    if (!out_dir.empty()) {
      const fs::path dir(out_dir);
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) fail(ErrorCode::InvalidInput, "cannot create " + out_dir + ": " + ec.message());
      write_matrix(dir, "beta.csv", beta);
      write_matrix(dir, "alpha.csv", alpha);
      if (fit) {
        write_matrix(dir, "gamma.csv", fit->gamma_hat.matrix());
        write_matrix(dir, "sigma.csv", fit->sigma_hat);
      }
      log("wrote matrices to " + out_dir);
    }
    emit("", report.str());
    return 0;
  }
};

struct SelectCommand {
  DataFlags data;
  SolverFlags solver;
  int u_min = 0;
  int u_max = -1;
  int folds = 5;
  int reps = 1;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out;

  void attach(CLI::App* app) {
    data.attach(app);
    solver.attach(app);
    app->add_option("--u-min", u_min, "smallest dimension tried")->check(CLI::NonNegativeNumber);
    app->add_option("--u-max", u_max, "largest dimension tried (default r)");
    app->add_option("--folds", folds, "cross-validation folds")->check(CLI::Range(2, 1000000));
    app->add_option("--reps", reps, "repetitions of the fold partition")->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "partition seed");
    app->add_option("--threads", threads, "worker threads (default ENVFIT_THREADS or all cores)");
    app->add_option("--out", out, "output CSV (default stdout)");
  }

  int run() {
    const RegressionData d = data.load();
    const int hi = u_max < 0 ? static_cast<int>(d.r()) : u_max;
    if (hi < u_min) fail(ErrorCode::InvalidInput, "--u-max is below --u-min");
    std::vector<Index> range(static_cast<std::size_t>(hi - u_min + 1));
    std::iota(range.begin(), range.end(), Index{u_min});
    const CvReport rep = cv_select_u(d, range, folds, reps, seed, solver.options(), threads);
    std::ostringstream os;
    os << "u,mean_error,std_error,selected\n";
    for (const CvEntry& e : rep.per_u) {
      os << e.u << ',' << num(e.mean_error) << ',' << num(e.std_error) << ','
         << (e.u == rep.selected_u ? 1 : 0) << '\n';
    }
    emit(out, os.str());
    log("selected u = " + std::to_string(rep.selected_u) + " (" + std::to_string(folds) + " folds, " +
        std::to_string(reps) + " reps)");
    return 0;
  }
};

struct SimulateCommand {
  SolverFlags solver;
  std::string scenario;
  int reps = 50;
  std::uint64_t seed = 0;
  int u = -1;
  int r = -1;
  int n = -1;
  double eta_max = 0.0;
  std::string format = "csv";
  std::string configs = "default";
  int threads = 0;
  std::string out;
  std::string dump_dir;

  void attach(CLI::App* app) {
    solver.attach(app);
    app->add_option("--scenario", scenario, "scenario I..VII (or 1..7)")->required();
    app->add_option("--reps", reps, "replications")->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "seed of the first replicate; replicate i uses seed + i");
    app->add_option("--u", u, "override the envelope dimension");
    app->add_option("--r", r, "override the number of responses");
    app->add_option("--n", n, "override the sample size");
    app->add_option("--eta-max", eta_max, "override the upper end of the uniform range of eta")
        ->check(CLI::PositiveNumber);
    app->add_option("--format", format, "csv or markdown")->check(CLI::IsMember({"csv", "markdown"}));
    app->add_option("--configs", configs, "default, criteria (four start criteria) or selected")
        ->check(CLI::IsMember({"default", "criteria", "selected"}));
    app->add_option("--threads", threads, "worker threads (default ENVFIT_THREADS or all cores)");
    app->add_option("--out", out, "output file (default stdout)");
    app->add_option("--dump", dump_dir, "write x.csv, y.csv, gamma.csv, beta.csv of the first replicate and stop");
  }

  int run() {
    const auto id = parse_scenario(scenario);
    if (!id) fail(ErrorCode::InvalidInput, "unknown scenario '" + scenario + "' (expected I..VII)");
    ScenarioSpec spec = ScenarioSpec::standard(*id, seed);
    if (r > 0) spec.r = r;
    if (u >= 0) spec.u = u;
    if (n > 0) spec.n = n;
    if (eta_max > 0.0) spec.eta_max = eta_max;
    spec.validate();

    if (!dump_dir.empty()) {
      const SimReplicate rep = gen_scenario(spec);
      const fs::path dir(dump_dir);
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) fail(ErrorCode::InvalidInput, "cannot create " + dump_dir + ": " + ec.message());
      write_matrix(dir, "x.csv", rep.data.x());
      write_matrix(dir, "y.csv", rep.data.y());
      write_matrix(dir, "gamma.csv", rep.true_gamma.matrix());
      write_matrix(dir, "beta.csv", rep.true_beta);
      log("wrote scenario " + std::string(to_string(*id)) + " replicate to " + dump_dir);
      return 0;
    }

    RunOptions opts;
    opts.solver = solver.options();
    opts.threads = static_cast<int>(resolve_threads(threads));
    if (configs == "criteria") opts.configurations = criterion_configurations();
    if (configs == "selected") opts.configurations = selected_configuration();
    log("scenario " + std::string(to_string(*id)) + ": r = " + std::to_string(spec.r) + ", p = " +
        std::to_string(spec.p) + ", n = " + std::to_string(spec.n) + ", u = " + std::to_string(spec.u) +
        ", " + std::to_string(reps) + " reps on " + std::to_string(opts.threads) + " threads");
    const ReplicationReport rep = run_replications(spec, reps, opts);
    for (const std::string& m : rep.failure_messages) log("failed " + m);
    if (rep.failures == reps) fail(ErrorCode::NumericalFailure, "every replicate failed");
    emit(out, emit_table(rep.rows, format == "markdown" ? TableFormat::Markdown : TableFormat::Csv));
    if (rep.failures > 0) log(std::to_string(rep.failures) + " replicate(s) excluded from the averages");
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Envelope estimation for multivariate linear regression"};
  app.require_subcommand(1);
  FitCommand fit;
  SelectCommand select;
  SimulateCommand simulate;
  fit.attach(app.add_subcommand("fit", "fit a response envelope to CSV data"));
  select.attach(app.add_subcommand("select", "choose the envelope dimension by cross-validation"));
  simulate.attach(app.add_subcommand("simulate", "run a simulation scenario and print its table"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (app.got_subcommand("fit")) return fit.run();
    if (app.got_subcommand("select")) return select.run();
    return simulate.run();
  } catch (const EnvelopeError& e) {
    log(std::string("error: ") + e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return kNumericalError;
  }
}
