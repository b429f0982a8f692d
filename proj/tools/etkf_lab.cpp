// Command-line front end for the twin-experiment harness.
#include <cstdio>
#include <exception>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "etkf/harness.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& out_path) {
  const etkf::RunConfig cfg = etkf::load_config(config_path);
  const etkf::ErrorTrace trace = etkf::run_filter(cfg, 0);
  etkf::export_trace(trace, cfg, out_path);
  if (!trace.completed) {
    std::fprintf(stderr, "run diverged: %s\n", trace.failure.c_str());
    return 1;
  }
  std::printf("wrote %zu steps to %s\n", trace.steps.size() - 1,
              out_path.c_str());
  return 0;
}

int cmd_montecarlo(const std::string& config_path, int replicates,
                   const std::string& out_path) {
  etkf::RunConfig cfg = etkf::load_config(config_path);
  if (replicates > 0) cfg.replicates = replicates;
  const etkf::MonteCarloSummary summary = etkf::run_monte_carlo(cfg);
  etkf::export_summary(summary, out_path);
  std::printf("wrote summary of %d replicates to %s\n", summary.replicates,
              out_path.c_str());
  return 0;
}

int cmd_bounds(const std::string& config_path, double e0_sq,
               double ens_err0_sq, const std::string& out_path) {
  const etkf::RunConfig cfg = etkf::load_config(config_path);
  etkf::export_bound_table(cfg, cfg.cycles, e0_sq, ens_err0_sq, out_path);
  std::printf("wrote bound table to %s\n", out_path.c_str());
  return 0;
}

int cmd_verify(std::uint64_t seed, int trials) {
  const etkf::IdentityReport report = etkf::verify_identities(seed, trials);
  for (const auto& c : report.checks) {
    std::printf("%-36s max residual %.3e (tol %.1e) %s\n", c.name.c_str(),
                c.max_residual, c.tolerance, c.pass() ? "ok" : "FAIL");
  }
  return report.all_pass() ? 0 : 1;
}

int cmd_scaling(const std::string& config_path, const std::string& gamma_list) {
  const etkf::RunConfig cfg = etkf::load_config(config_path);
  std::vector<double> gammas;
  std::stringstream ss(gamma_list);
  std::string tok;
  while (std::getline(ss, tok, ',')) gammas.push_back(std::stod(tok));
  const etkf::BoundParams p = cfg.bound_params();
  const double slope = etkf::gamma_scaling_exponent(p, gammas);
  for (double g : gammas) {
    etkf::BoundParams q = p;
    q.gamma = g;
    const etkf::DerivedConstants c = etkf::derive_constants(q);
    std::printf("gamma %.6g  asymptotic bound %.6g\n", g,
                etkf::asymptotic_bound(q, c));
  }
  std::printf("log-log slope %.6f\n", slope);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ETKF twin-experiment lab"};
  app.require_subcommand(1);

  std::string config_path, out_path = "out.csv", gamma_list;
  int replicates = 0;
  int trials = 1000;
  std::uint64_t seed = 42;
  double e0_sq = 1.0, ens_err0_sq = 1.0;

  auto* run = app.add_subcommand("run", "single replicate trace -> CSV");
  run->add_option("--config", config_path)->required();
  run->add_option("--out", out_path);

  auto* mc = app.add_subcommand("montecarlo", "replicate summary -> CSV");
  mc->add_option("--config", config_path)->required();
  mc->add_option("--replicates", replicates);
  mc->add_option("--out", out_path);

  auto* bounds = app.add_subcommand("bounds", "bound tables, no simulation");
  bounds->add_option("--config", config_path)->required();
  bounds->add_option("--e0-sq", e0_sq, "initial mean-error magnitude");
  bounds->add_option("--ens-err0-sq", ens_err0_sq,
                     "initial ensemble-error magnitude");
  bounds->add_option("--out", out_path);

  auto* verify = app.add_subcommand("verify", "randomized identity battery");
  verify->add_option("--trials", trials);
  verify->add_option("--seed", seed);

  auto* scaling =
      app.add_subcommand("scaling", "asymptotic bound vs noise scale");
  scaling->add_option("--config", config_path)->required();
  scaling->add_option("--gammas", gamma_list)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_path);
    if (mc->parsed()) return cmd_montecarlo(config_path, replicates, out_path);
    if (bounds->parsed())
      return cmd_bounds(config_path, e0_sq, ens_err0_sq, out_path);
    if (verify->parsed()) return cmd_verify(seed, trials);
    if (scaling->parsed()) return cmd_scaling(config_path, gamma_list);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
