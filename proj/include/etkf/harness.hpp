#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "etkf/analysis.hpp"
#include "etkf/bounds.hpp"
#include "etkf/dynamics.hpp"
#include "etkf/ensemble.hpp"
#include "etkf/observation.hpp"

namespace etkf {

enum class AnalysisForm { Transform, Covariance };

/// Twin-experiment configuration. Mirrors the JSON config schema 1:1
/// (snake_case keys, unknown keys rejected).
struct RunConfig {
  ModelSystem model = ModelSystem::lorenz63();
  double h = 0.1;
  double dt = 0.01;
  int ensemble_size = 10;
  double alpha = 1.0;
  double gamma = 0.1;
  int cycles = 100;
  std::uint64_t run_seed = 0;
  int replicates = 1;

  /// Truth initialization: explicit state, or spin-up from truth_start
  /// (default: all ones) to land on the attractor.
  std::optional<StateVector> initial_truth;
  int spin_up_steps = 0;
  std::optional<StateVector> truth_start;

  /// Initial ensemble = truth + mean_offset + spread * N(0, I) per member.
  double ensemble_spread = 1.0;
  double ensemble_mean_offset = 0.0;

  /// Bound-evaluation constants; NaN = not supplied.
  double rho = std::numeric_limits<double>::quiet_NaN();
  double beta = std::numeric_limits<double>::quiet_NaN();
  double epsilon = std::numeric_limits<double>::quiet_NaN();
  double lambda0 = std::numeric_limits<double>::quiet_NaN();

  AnalysisForm form = AnalysisForm::Transform;

  void validate() const;
  BoundParams bound_params() const;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

struct TraceStep {
  long step = 0;
  double time = 0.0;
  double e_sq = 0.0;             // |vbar_j - u_j|^2
  double spread_sq = 0.0;        // ||dV_j||^2
  double ensemble_err_sq = 0.0;  // ||V_j - u_j 1||^2, computed directly
  double lambda_min_forecast = std::numeric_limits<double>::quiet_NaN();
  double lambda_min_analysis = std::numeric_limits<double>::quiet_NaN();
  bool in_ball = true;
};

/// Per-step diagnostics of one filtering run; steps[0] describes the initial
/// ensemble, steps[j] the state after assimilation cycle j.
struct ErrorTrace {
  std::vector<TraceStep> steps;
  bool completed = true;
  std::string failure;
};

struct MonteCarloSummary {
  int replicates = 0;
  int failed_replicates = 0;
  double h = 0.0;
  // all indexed by step j = 0..J
  std::vector<double> mean_e_sq;
  std::vector<double> se_e_sq;  // standard error of the replicate mean
  std::vector<double> mean_ensemble_err_sq;
  std::vector<double> se_ensemble_err_sq;
  std::vector<double> min_lambda_min_forecast;  // min over replicates
  std::vector<long> ball_exits;                 // replicates outside B(rho)
};

/// The deterministic initial ensemble of one replicate (exposed so callers
/// can measure lambda_min(C_0) before choosing the inflation factor).
Ensemble initial_ensemble(const RunConfig& cfg, std::uint64_t replicate_id);

/// The truth trajectory start shared by all replicates of a run.
StateVector initial_truth_state(const RunConfig& cfg);

/// One replicate: J cycles of predict -> inflate -> analysis against a
/// simultaneously evolved truth, fully determined by (run_seed, replicate_id).
ErrorTrace run_filter(const RunConfig& cfg, std::uint64_t replicate_id);

/// Independent replicates (parallel, capped by ETKF_LAB_THREADS), aggregated
/// in replicate order so the result is independent of scheduling.
MonteCarloSummary run_monte_carlo(const RunConfig& cfg);

struct BoundCheckRow {
  long j = 0;
  double mean = 0.0;
  double bound = 0.0;
  double halfwidth = 0.0;  // 3 sigma, normal approximation
  bool violated = false;
};

struct WellposednessReport {
  std::vector<BoundCheckRow> rows;
  int violations = 0;
  bool passed() const { return violations == 0; }
};

/// Per-step comparison of the Monte Carlo mean ensemble error against the
/// finite-time bound without inflation. Requires a fully observed run and a
/// configured beta.
WellposednessReport check_wellposedness(const RunConfig& cfg,
                                        const MonteCarloSummary& summary);

struct UniformBoundReport {
  bool floor_exists = false;
  double lambda_star_value = 0.0;
  double theta_value = 0.0;
  double alpha0 = 0.0;
  double theta_cap_variant = 0.0;  // Theta built from alpha0 (reported only)
  int floor_violations = 0;
  std::vector<BoundCheckRow> mean_error_rows;
  int mean_error_violations = 0;
  double tail_mean = 0.0;
  double tail_bound = 0.0;
  double tail_halfwidth = 0.0;
  bool tail_ok = true;
  long ball_exit_steps = 0;
  bool passed() const {
    return floor_violations == 0 && mean_error_violations == 0 && tail_ok;
  }
};

/// Eigenvalue-floor, finite-time and asymptotic checks of the inflated
/// filter. tail_steps is the window of the long-run average.
UniformBoundReport check_uniform_bound(const RunConfig& cfg,
                                       const MonteCarloSummary& summary,
                                       int tail_steps = 50);

struct IdentityCheck {
  std::string name;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool pass() const { return max_residual <= tolerance; }
};

struct IdentityReport {
  std::vector<IdentityCheck> checks;
  bool all_pass() const;
};

/// Randomized verification of the algebraic identities behind the analysis
/// step: norm decomposition, transform consistency, gain and mean-update
/// identities, T*1 = 1, the transform representation, the fully observed
/// eigenvalue map, and the operator identities of the appendix.
IdentityReport verify_identities(std::uint64_t seed, int trials);

void export_trace(const ErrorTrace& trace, const RunConfig& cfg,
                  const std::string& path);
void export_summary(const MonteCarloSummary& summary, const std::string& path);

/// Bound tables without simulation: j,bound_wellposed,bound_thm37,asymptote.
void export_bound_table(const RunConfig& cfg, long cycles, double e0_sq,
                        double ensemble_err0_sq, const std::string& path);

}  // namespace etkf
