#pragma once

// Command-line front end: eig1 | solve | scan | sweep-beta | check.
// Exit codes: 0 ok, 1 failed self-check, 2 usage/validation, 3 non-convergence, 4 infeasible lambda.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dphase/eigen.hpp"
#include "dphase/energy.hpp"
#include "dphase/errors.hpp"
#include "dphase/mesh.hpp"
#include "dphase/nehari.hpp"
#include "dphase/spectrum.hpp"

namespace dphase::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kUsage = 2,
  kNonConvergence = 3,
  kInfeasible = 4,
};

struct RunConfig {
  std::string subcommand;
  double alpha = 1.0;
  double beta = 1.0;
  double p = 2.0;
  double q = 4.0;
  double lambda = 0.0;
  double r = 2.0;
  int dim = 1;
  std::vector<int> n{1};
  std::vector<double> extent{1.0};
  double tol = 1e-10;
  int max_iter = 50000;
  double eps_reg = 1e-8;
  unsigned long long seed = 0;
  int restarts = 1;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  int lambda_steps = 0;
  std::vector<double> betas;
  int K = 0;
  std::string format = "csv";
  std::string out;   // empty -> stdout
  std::string dump;  // optional nodal-function CSV

  Mesh mesh() const {
    if (n.empty() || extent.empty()) throw InvalidArgument("--n and --extent need a value");
    if (n.size() > 2 || extent.size() > 2) throw InvalidArgument("at most two axes");
    const auto axis = [](const auto& v, int a) { return v.size() > std::size_t(a) ? v[a] : v[0]; };
    return build_mesh(dim, {axis(n, 0), axis(n, 1)}, {axis(extent, 0), axis(extent, 1)});
  }

  SolverOptions options() const {
    SolverOptions o;
    o.tol = tol;
    o.max_iter = max_iter;
    o.eps_reg = eps_reg;
    o.seed = seed;
    o.restarts = restarts;
    o.validate();
    return o;
  }

  EnergyParams energy_params() const {
    EnergyParams prm{alpha, beta, p, q, lambda, eps_reg};
    prm.validate();
    return prm;
  }

  OperatorParams operator_params() const {
    OperatorParams op{alpha, beta, p, q, eps_reg};
    op.with_lambda(1.0).validate();
    return op;
  }
};

/// Fixed float formatting: 17 significant digits, '.' decimal separator.
inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& x) { return x ? fmt(*x) : std::string(); }

inline std::string mesh_label(const Mesh& m) {
  return m.dim() == 1 ? std::to_string(m.n(0)) : std::to_string(m.n(0)) + "x" + std::to_string(m.n(1));
}

inline nlohmann::json mesh_json(const Mesh& m) {
  nlohmann::json j;
  j["dim"] = m.dim();
  j["n"] = m.dim() == 1 ? nlohmann::json::array({m.n(0)}) : nlohmann::json::array({m.n(0), m.n(1)});
  j["extent"] = m.dim() == 1 ? nlohmann::json::array({m.extent(0)})
                             : nlohmann::json::array({m.extent(0), m.extent(1)});
  return j;
}

inline std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

/// `index,x[,y],value` rows of a nodal function.
inline void write_function_csv(std::ostream& os, const DiscreteFunction& u) {
  os << (u.mesh.dim() == 1 ? "index,x,value\n" : "index,x,y,value\n");
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto x = u.mesh.coordinates(i);
    os << i << ',' << fmt(x[0]);
    if (u.mesh.dim() == 2) os << ',' << fmt(x[1]);
    os << ',' << fmt(u.values[Eigen::Index(i)]) << '\n';
  }
}

namespace detail {

inline std::string csv_field(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

/// Writes `text` to cfg.out, or to `out` when no path was given.
inline void emit(const RunConfig& cfg, std::ostream& out, const std::string& text) {
  if (cfg.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(cfg.out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file " + cfg.out);
  f << text;
}

inline void emit_dump(const RunConfig& cfg, const DiscreteFunction& u) {
  if (cfg.dump.empty()) return;
  std::ofstream f(cfg.dump, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open dump file " + cfg.dump);
  write_function_csv(f, u);
}

inline std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace detail

inline int cmd_eig1(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Mesh mesh = cfg.mesh();
  const EigenPair e = principal_eigenpair(mesh, cfg.r, cfg.options());
  std::ostringstream os;
  if (cfg.format == "json") {
    nlohmann::json j;
    j["r"] = e.r;
    j["mesh"] = mesh_json(mesh);
    j["lam1"] = e.lam1;
    j["residual"] = e.residual;
    j["iterations"] = e.iterations;
    j["converged"] = e.converged;
    j["positive"] = e.positive;
    j["u1"] = to_vector(e.u1.values);
    os << detail::dump_json(j);
  } else {
    os << "r,n,dim,lam1,residual,iters\n"
       << fmt(e.r) << ',' << mesh_label(mesh) << ',' << mesh.dim() << ',' << fmt(e.lam1) << ','
       << fmt(e.residual) << ',' << e.iterations << '\n';
  }
  detail::emit(cfg, out, os.str());
  detail::emit_dump(cfg, e.u1);
  if (!e.converged) {
    err << "eig1: principal eigenpair did not converge (residual " << fmt(e.residual) << ")\n";
    return kNonConvergence;
  }
  return kOk;
}

inline nlohmann::json solve_json(const SolveResult& r) {
  nlohmann::json j;
  j["branch"] = to_string(r.branch);
  j["params"] = {{"alpha", r.params.alpha}, {"beta", r.params.beta}, {"p", r.params.p},
                 {"q", r.params.q},         {"lambda", r.params.lambda}, {"eps_reg", r.params.eps_reg}};
  j["mesh"] = mesh_json(r.u_hat.mesh);
  j["m_lambda"] = r.m_lambda;
  j["constraint_residual"] = r.constraint_residual;
  j["weak_residual"] = r.weak_residual;
  j["threshold"] = r.threshold;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["sign_changes"] = r.sign_changes;
  j["trace"] = r.trace;
  j["phi_trace"] = r.phi_trace;
  j["u_hat"] = to_vector(r.u_hat.values);
  return j;
}

inline int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Mesh mesh = cfg.mesh();
  const EnergyParams prm = cfg.energy_params();
  SolveResult r;
  try {
    r = solve_any(prm, mesh, cfg.options());
  } catch (const InfeasibleLambda& ex) {
    err << "solve: infeasible lambda: " << ex.what() << "\nthreshold=" << fmt(ex.threshold()) << '\n';
    return kInfeasible;
  }
  std::ostringstream os;
  if (cfg.format == "json") {
    os << detail::dump_json(solve_json(r));
  } else {
    os << "branch,alpha,beta,p,q,lambda,m_lambda,constraint_residual,weak_residual,threshold,"
          "iterations,converged,sign_changes\n"
       << to_string(r.branch) << ',' << fmt(prm.alpha) << ',' << fmt(prm.beta) << ',' << fmt(prm.p)
       << ',' << fmt(prm.q) << ',' << fmt(prm.lambda) << ',' << fmt(r.m_lambda) << ','
       << fmt(r.constraint_residual) << ',' << fmt(r.weak_residual) << ',' << fmt(r.threshold) << ','
       << r.iterations << ',' << (r.converged ? "true" : "false") << ',' << r.sign_changes << '\n';
  }
  detail::emit(cfg, out, os.str());
  detail::emit_dump(cfg, r.u_hat);
  if (!r.converged) {
    err << "solve: did not converge (weak residual " << fmt(r.weak_residual) << ")\n";
    return kNonConvergence;
  }
  return kOk;
}

inline std::vector<double> lambda_grid(const RunConfig& cfg) {
  if (cfg.lambda_steps < 1) throw InvalidArgument("--lambda-steps must be >= 1");
  if (!(cfg.lambda_min > 0.0)) throw InvalidArgument("--lambda-min must be positive");
  if (cfg.lambda_steps == 1) return {cfg.lambda_min};
  if (!(cfg.lambda_max > cfg.lambda_min))
    throw InvalidArgument("--lambda-max must exceed --lambda-min");
  std::vector<double> grid;
  for (int i = 0; i < cfg.lambda_steps; ++i)
    grid.push_back(cfg.lambda_min + (cfg.lambda_max - cfg.lambda_min) * i / (cfg.lambda_steps - 1));
  return grid;
}

inline std::string scan_csv(const SpectrumScan& s) {
  std::ostringstream os;
  os << "lambda,feasible,m_lambda,weak_residual,error\n";
  for (const auto& row : s.rows)
    os << fmt(row.lambda) << ',' << (row.feasible ? "true" : "false") << ',' << fmt_opt(row.m_lambda)
       << ',' << fmt_opt(row.weak_residual) << ',' << detail::csv_field(row.error) << '\n';
  os << "# threshold_estimate," << fmt_opt(s.threshold_estimate) << '\n'
     << "# threshold_predicted," << fmt(s.threshold_predicted) << '\n'
     << "# lam1," << fmt(s.lam1) << '\n'
     << "# monotone," << (s.monotone ? "true" : "false") << '\n';
  if (!s.note.empty()) os << "# note," << detail::csv_field(s.note) << '\n';
  return os.str();
}

inline nlohmann::json scan_json(const SpectrumScan& s) {
  nlohmann::json j;
  j["params"] = {{"alpha", s.op.alpha}, {"beta", s.op.beta}, {"p", s.op.p}, {"q", s.op.q},
                 {"eps_reg", s.op.eps_reg}};
  j["mesh"] = mesh_json(s.mesh);
  j["lam1"] = s.lam1;
  j["threshold_predicted"] = s.threshold_predicted;
  j["threshold_estimate"] = s.threshold_estimate ? nlohmann::json(*s.threshold_estimate) : nlohmann::json();
  j["monotone"] = s.monotone;
  j["note"] = s.note;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : s.rows) {
    j["rows"].push_back({{"lambda", row.lambda},
                         {"feasible", row.feasible},
                         {"m_lambda", row.m_lambda ? nlohmann::json(*row.m_lambda) : nlohmann::json()},
                         {"weak_residual", row.weak_residual ? nlohmann::json(*row.weak_residual)
                                                             : nlohmann::json()},
                         {"error", row.error}});
  }
  return j;
}

inline int cmd_scan(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Mesh mesh = cfg.mesh();
  const SpectrumScan s = scan_lambda(cfg.operator_params(), mesh, lambda_grid(cfg), cfg.options());
  detail::emit(cfg, out, cfg.format == "json" ? detail::dump_json(scan_json(s)) : scan_csv(s));
  bool all_failed = true;
  for (const auto& row : s.rows)
    if (row.feasible || row.error == "InfeasibleLambda") all_failed = false;
  if (!s.monotone) err << "scan: " << s.note << '\n';
  if (all_failed) {
    err << "scan: every row failed\n";
    return kNonConvergence;
  }
  return kOk;
}

inline std::string sweep_csv(const BetaSweep& s) {
  std::ostringstream os;
  os << "beta,alpha,endpoint\n";
  for (const auto& e : s.entries) os << fmt(e.beta) << ',' << fmt(e.alpha) << ',' << fmt(e.endpoint) << '\n';
  os << "# lam1," << fmt(s.lam1) << '\n';
  if (!s.linear_spectrum_at_one.empty()) {
    os << "# beta=1 spectrum of -Laplacian: k,lambda_k\n";
    for (std::size_t k = 0; k < s.linear_spectrum_at_one.size(); ++k)
      os << "# " << k + 1 << ',' << fmt(s.linear_spectrum_at_one[k]) << '\n';
  }
  return os.str();
}

inline nlohmann::json sweep_json(const BetaSweep& s) {
  nlohmann::json j;
  j["p"] = s.p;
  j["q"] = s.q;
  j["mesh"] = mesh_json(s.mesh);
  j["lam1"] = s.lam1;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : s.entries)
    j["entries"].push_back({{"beta", e.beta}, {"alpha", e.alpha}, {"endpoint", e.endpoint}});
  j["linear_spectrum_at_one"] = s.linear_spectrum_at_one;
  return j;
}

inline int cmd_sweep_beta(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const Mesh mesh = cfg.mesh();
  const BetaSweep s = sweep_beta(cfg.p, cfg.q, mesh, cfg.betas, cfg.K, cfg.options());
  detail::emit(cfg, out, cfg.format == "json" ? detail::dump_json(sweep_json(s)) : sweep_csv(s));
  return kOk;
}

/// Runs the invariant suite on one configuration and prints PASS/FAIL lines.
inline int cmd_check(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const Mesh mesh = cfg.mesh();
  const EnergyParams prm = cfg.energy_params();
  const SolverOptions opts = cfg.options();
  std::ostringstream os;
  int failures = 0;
  const auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    os << (ok ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
    if (!ok) ++failures;
  };
  const auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const auto random_function = [&] {
    DiscreteFunction u(mesh);
    for (Eigen::Index i = 0; i < u.values.size(); ++i) u.values[i] = unif(rng);
    return u;
  };

  {
    const DiscreteFunction u = random_function();
    double worst = 0.0;
    for (double r : {prm.p, prm.q}) {
      worst = std::max(worst, rel(grad_rnorm(u.scaled(2.5), r), std::pow(2.5, r) * grad_rnorm(u, r)));
      worst = std::max(worst, rel(lr_norm(u.scaled(2.5), r), std::pow(2.5, r) * lr_norm(u, r)));
    }
    report("homogeneity", worst <= 1e-12, "max rel err " + fmt(worst));
  }
  {
    const DiscreteFunction u = random_function();
    double worst = 0.0;
    for (double r : {prm.p, prm.q})
      worst = std::max(worst, rel(inner(apply_r_operator(u, r, 0.0), u), grad_rnorm(u, r)));
    report("green_identity", worst <= 1e-12, "max rel err " + fmt(worst));
  }
  if (prm.p >= 2.0 && prm.q >= 2.0) {
    EnergyParams exact = prm;
    exact.eps_reg = 0.0;
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      const DiscreteFunction u = random_function();
      const DiscreteFunction h = random_function();
      const double delta = 1e-6 * std::max(1.0, u.values.cwiseAbs().maxCoeff());
      const double fd = (phi(DiscreteFunction(mesh, Eigen::VectorXd(u.values + delta * h.values)), exact) -
                         phi(DiscreteFunction(mesh, Eigen::VectorXd(u.values - delta * h.values)), exact)) /
                        (2.0 * delta);
      const double an = inner(phi_grad(u, exact), h);
      worst = std::max(worst, std::abs(an - fd) / (1.0 + std::abs(phi(u, exact))));
    }
    report("gradient_fd", worst <= 1e-6, "max scaled err " + fmt(worst));
  } else {
    os << "SKIP gradient_fd: needs p, q >= 2\n";
  }

  const EigenPair eig = principal_eigenpair(mesh, prm.q, opts);
  report("eigen_converged", eig.converged,
         "lam1 " + fmt(eig.lam1) + ", residual " + fmt(eig.residual) + ", positive " +
             (eig.positive ? "yes" : "no"));
  {
    double worst_gap = 0.0;
    for (int k = 0; k < 20; ++k) {
      DiscreteFunction v = random_function();
      v.values += 2.0 * eig.u1.values;
      worst_gap = std::min(worst_gap, (rayleigh_quotient(v, prm.q) - eig.lam1) / eig.lam1);
    }
    report("rayleigh_lower_bound", worst_gap >= -1e-8, "min rel gap " + fmt(worst_gap));
  }

  const double thr = prm.beta * eig.lam1;
  if (prm.p < prm.q) {
    double worst = 0.0;
    int projected = 0;
    for (int k = 0; k < 100; ++k) {
      DiscreteFunction v = eig.u1;
      for (Eigen::Index i = 0; i < v.values.size(); ++i) v.values[i] *= 1.0 + 0.2 * unif(rng);
      try {
        const DiscreteFunction w = project(v, prm);
        const double scale = prm.alpha * grad_rnorm(w, prm.p) + prm.beta * grad_rnorm(w, prm.q);
        worst = std::max(worst, std::abs(phi_pairing(w, prm)) / scale);
        ++projected;
      } catch (const NotProjectable&) {
      }
    }
    if (projected > 0)
      report("projection_root", worst <= 1e-12,
             std::to_string(projected) + " directions, max rel pairing " + fmt(worst));
    else
      os << "SKIP projection_root: no projectable direction (lambda at or below threshold)\n";
  }

  if (prm.lambda > thr) {
    try {
      const SolveResult r = solve_any(prm, mesh, opts, &eig);
      report("solve_converged", r.converged,
             std::string(to_string(r.branch)) + ", m_lambda " + fmt(r.m_lambda) + ", weak residual " +
                 fmt(r.weak_residual));
      if (r.branch == Branch::nehari) {
        const double gap = std::abs(r.m_lambda - reduced_energy(r.u_hat, prm));
        report("reduced_energy_identity", gap <= 1e-8 * std::abs(r.m_lambda), "abs gap " + fmt(gap));
        report("m_lambda_positive", r.m_lambda > 0.0, fmt(r.m_lambda));
        report("constraint_residual",
               r.constraint_residual <= 1e-8, fmt(r.constraint_residual));
      } else {
        report("m_lambda_negative", r.m_lambda < 0.0, fmt(r.m_lambda));
      }
    } catch (const std::exception& ex) {
      report("solve_converged", false, ex.what());
    }
  } else {
    bool raised = false;
    try {
      solve_any(prm, mesh, opts, &eig);
    } catch (const InfeasibleLambda&) {
      raised = true;
    }
    report("infeasible_below_threshold", raised, "lambda " + fmt(prm.lambda) + " <= threshold " + fmt(thr));
  }

  out << os.str();
  return failures == 0 ? kOk : kCheckFailed;
}

/// Parses argv and dispatches; all output goes to `out` / `err`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Double-phase (p,q)-Laplacian eigenvalue solver"};
  app.require_subcommand(1);
  RunConfig cfg;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--dim", cfg.dim, "spatial dimension (1 or 2)")->check(CLI::IsMember({1, 2}));
    sub->add_option("--n", cfg.n, "interior nodes per axis, e.g. 31 or 15,15")->delimiter(',')->required();
    sub->add_option("--extent", cfg.extent, "domain length per axis")->delimiter(',');
    sub->add_option("--tol", cfg.tol, "relative objective decrease counted as stalled");
    sub->add_option("--max-iter", cfg.max_iter, "iteration cap");
    sub->add_option("--eps-reg", cfg.eps_reg, "gradient regularization width");
    sub->add_option("--seed", cfg.seed, "seed for randomized restarts / checks");
    sub->add_option("--restarts", cfg.restarts, "number of initializations (best kept)");
    sub->add_option("--format", cfg.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--out", cfg.out, "output path (default stdout)");
  };
  const auto add_coefficients = [&](CLI::App* sub, bool with_lambda) {
    sub->add_option("--alpha", cfg.alpha, "coefficient of -Delta_p")->required();
    sub->add_option("--beta", cfg.beta, "coefficient of -Delta_q")->required();
    sub->add_option("--p", cfg.p, "exponent p")->required();
    sub->add_option("--q", cfg.q, "exponent q")->required();
    if (with_lambda) sub->add_option("--lambda", cfg.lambda, "eigenvalue parameter")->required();
  };

  auto* eig1 = app.add_subcommand("eig1", "principal eigenpair of the discrete r-Laplacian");
  add_common(eig1);
  auto* r_opt = eig1->add_option("--r", cfg.r, "exponent r");
  eig1->add_option("--q", cfg.r, "alias for --r")->excludes(r_opt);
  eig1->add_option("--dump", cfg.dump, "write the eigenfunction as CSV");

  auto* solve_cmd = app.add_subcommand("solve", "solve for a nontrivial eigenfunction at lambda");
  add_common(solve_cmd);
  add_coefficients(solve_cmd, true);
  solve_cmd->add_option("--dump", cfg.dump, "write the minimizer as CSV");

  auto* scan = app.add_subcommand("scan", "feasibility scan over a lambda grid");
  add_common(scan);
  add_coefficients(scan, false);
  scan->add_option("--lambda-min", cfg.lambda_min)->required();
  scan->add_option("--lambda-max", cfg.lambda_max)->required();
  scan->add_option("--lambda-steps", cfg.lambda_steps)->required();

  auto* sweep = app.add_subcommand("sweep-beta", "spectrum endpoints for alpha = 1 - beta");
  add_common(sweep);
  sweep->add_option("--p", cfg.p)->required();
  sweep->add_option("--q", cfg.q)->required();
  sweep->add_option("--betas", cfg.betas, "comma-separated betas in (0,1)")->delimiter(',')->required();
  sweep->add_option("--K", cfg.K, "number of beta = 1 eigenvalues (q = 2 only)");

  auto* check = app.add_subcommand("check", "run the invariant suite on one configuration");
  add_common(check);
  add_coefficients(check, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*eig1) return cmd_eig1(cfg, out, err);
    if (*solve_cmd) return cmd_solve(cfg, out, err);
    if (*scan) return cmd_scan(cfg, out, err);
    if (*sweep) return cmd_sweep_beta(cfg, out, err);
    if (*check) return cmd_check(cfg, out, err);
  } catch (const InvalidArgument& ex) {
    err << "error: " << ex.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const NonConvergence& ex) {
    err << "error: " << ex.what() << '\n';
    return kNonConvergence;
  } catch (const InfeasibleLambda& ex) {
    err << "error: " << ex.what() << "\nthreshold=" << fmt(ex.threshold()) << '\n';
    return kInfeasible;
  }
  return kUsage;
}

}  // namespace dphase::cli
