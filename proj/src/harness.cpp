#include "etkf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace etkf {

void RunConfig::validate() const {
  if (cycles < 1) throw ConfigError("cycles must be >= 1");
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  if (ensemble_size < 2) throw ConfigError("ensemble_size must be >= 2");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
  if (!(alpha >= 1.0)) throw ConfigError("alpha must be >= 1");
  FlowConfig check(h, dt);  // validates h, dt
  if (initial_truth && initial_truth->size() != model.dim()) {
    throw ConfigError("initial_truth dimension does not match the model");
  }
  if (truth_start && truth_start->size() != model.dim()) {
    throw ConfigError("truth_start dimension does not match the model");
  }
  if (spin_up_steps < 0) throw ConfigError("spin_up_steps must be >= 0");
}

BoundParams RunConfig::bound_params() const {
  BoundParams p;
  p.beta = beta;
  p.epsilon = std::isfinite(epsilon) ? epsilon
                                     : (std::isfinite(beta) ? beta / 10.0 : epsilon);
  p.rho = rho;
  p.h = h;
  p.gamma = gamma;
  p.N = ensemble_size;
  p.m = model.dim();
  p.alpha = alpha;
  p.lambda0 = lambda0;
  return p;
}

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("unknown config key '" + it.key() + "' in " + where);
  }
}

StateVector parse_vector(const json& arr) {
  StateVector v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v(i) = arr[i].get<double>();
  return v;
}

ModelSystem parse_model(const json& m) {
  const std::string kind = m.at("kind").get<std::string>();
  if (kind == "lorenz63") {
    reject_unknown_keys(m, {"kind", "sigma", "rho", "beta"}, "model");
    return ModelSystem::lorenz63(m.value("sigma", 10.0), m.value("rho", 28.0),
                                 m.value("beta", 8.0 / 3.0));
  }
  if (kind == "lorenz96") {
    reject_unknown_keys(m, {"kind", "forcing", "dim"}, "model");
    return ModelSystem::lorenz96(m.value("forcing", 8.0), m.at("dim").get<int>());
  }
  if (kind == "linear") {
    reject_unknown_keys(m, {"kind", "scale", "dim", "matrix"}, "model");
    if (m.contains("matrix")) {
      const auto& rows = m.at("matrix");
      const int n = static_cast<int>(rows.size());
      Eigen::MatrixXd A(n, n);
      for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[i].size()) != n) {
          throw ConfigError("model.matrix must be square");
        }
        for (int j = 0; j < n; ++j) A(i, j) = rows[i][j].get<double>();
      }
      return ModelSystem::linear(A);
    }
    const int dim = m.at("dim").get<int>();
    const double scale = m.at("scale").get<double>();
    return ModelSystem::linear(scale *
                               Eigen::MatrixXd::Identity(dim, dim));
  }
  throw ConfigError("unknown model kind '" + kind + "'");
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json root = json::parse(json_text);
  reject_unknown_keys(root,
                      {"model", "h", "dt", "ensemble_size", "alpha", "gamma",
                       "cycles", "run_seed", "replicates", "initial_truth",
                       "spin_up_steps", "truth_start", "ensemble_spread",
                       "ensemble_mean_offset", "rho", "beta", "epsilon",
                       "lambda0", "analysis_form"},
                      "config");
  RunConfig cfg;
  cfg.model = parse_model(root.at("model"));
  cfg.h = root.at("h").get<double>();
  cfg.dt = root.value("dt", cfg.h / 10.0);
  cfg.ensemble_size = root.at("ensemble_size").get<int>();
  cfg.alpha = root.value("alpha", 1.0);
  cfg.gamma = root.at("gamma").get<double>();
  cfg.cycles = root.at("cycles").get<int>();
  cfg.run_seed = root.value("run_seed", std::uint64_t(0));
  cfg.replicates = root.value("replicates", 1);
  if (root.contains("initial_truth")) {
    cfg.initial_truth = parse_vector(root.at("initial_truth"));
  }
  cfg.spin_up_steps = root.value("spin_up_steps", 0);
  if (root.contains("truth_start")) {
    cfg.truth_start = parse_vector(root.at("truth_start"));
  }
  cfg.ensemble_spread = root.value("ensemble_spread", 1.0);
  cfg.ensemble_mean_offset = root.value("ensemble_mean_offset", 0.0);
  cfg.rho = root.value("rho", cfg.rho);
  cfg.beta = root.value("beta", cfg.beta);
  cfg.epsilon = root.value("epsilon", cfg.epsilon);
  cfg.lambda0 = root.value("lambda0", cfg.lambda0);
  const std::string form = root.value("analysis_form", std::string("transform"));
  if (form == "transform") {
    cfg.form = AnalysisForm::Transform;
  } else if (form == "covariance") {
    cfg.form = AnalysisForm::Covariance;
  } else {
    throw ConfigError("analysis_form must be 'transform' or 'covariance'");
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

StateVector initial_truth_state(const RunConfig& cfg) {
  if (cfg.initial_truth) return *cfg.initial_truth;
  StateVector u = cfg.truth_start ? *cfg.truth_start
                                  : StateVector::Ones(cfg.model.dim());
  const FlowConfig fcfg(cfg.h, cfg.dt);
  for (int s = 0; s < cfg.spin_up_steps; ++s) u = flow(cfg.model, fcfg, u);
  return u;
}

Ensemble initial_ensemble(const RunConfig& cfg, std::uint64_t replicate_id) {
  const StateVector truth = initial_truth_state(cfg);
  const NoiseStream stream{cfg.run_seed, replicate_id};
  const int m = cfg.model.dim();
  Eigen::MatrixXd members(m, cfg.ensemble_size);
  for (int n = 0; n < cfg.ensemble_size; ++n) {
    const Eigen::VectorXd z = standard_normal_draw(
        stream, std::uint64_t(n), NoiseChannel::EnsembleInit, m);
    members.col(n) = truth.array() + cfg.ensemble_mean_offset +
                     cfg.ensemble_spread * z.array();
  }
  return Ensemble(std::move(members));
}

namespace {

bool members_in_ball(const Ensemble& v, double rho) {
  if (!std::isfinite(rho)) return true;
  for (int n = 0; n < v.size(); ++n) {
    if (v.member(n).norm() > rho) return false;
  }
  return true;
}

double ensemble_error_sq(const Ensemble& v, const StateVector& u) {
  return (v.data().colwise() - u).squaredNorm() / double(v.size());
}

}  // namespace

ErrorTrace run_filter(const RunConfig& cfg, std::uint64_t replicate_id) {
  cfg.validate();
  const FlowConfig fcfg(cfg.h, cfg.dt);
  const ObservationOperator H = ObservationOperator::identity(cfg.model.dim());
  const NoiseCovariance Gamma =
      NoiseCovariance::scaled_identity(cfg.gamma, cfg.model.dim());
  const NoiseStream stream{cfg.run_seed, replicate_id};
  const InflationFactor alpha(cfg.alpha);

  StateVector truth = initial_truth_state(cfg);
  Ensemble v = initial_ensemble(cfg, replicate_id);

  ErrorTrace trace;
  trace.steps.reserve(cfg.cycles + 1);
  {
    TraceStep s0;
    s0.step = 0;
    s0.time = 0.0;
    s0.e_sq = (v.mean() - truth).squaredNorm();
    s0.spread_sq = v.deviations().l2_norm() * v.deviations().l2_norm();
    s0.ensemble_err_sq = ensemble_error_sq(v, truth);
    s0.lambda_min_analysis = min_eigenvalue(v.covariance());
    s0.in_ball = members_in_ball(v, cfg.rho);
    trace.steps.push_back(s0);
  }

  for (long j = 1; j <= cfg.cycles; ++j) {
    try {
      truth = flow(cfg.model, fcfg, truth);
      const ObservationRecord obs =
          observe(truth, H, Gamma, stream, std::uint64_t(j));
      const Ensemble forecast = predict_ensemble(cfg.model, fcfg, v);
      AnalysisOutput out =
          cfg.form == AnalysisForm::Transform
              ? analysis_step_transform_form(forecast, obs.value, H, Gamma,
                                             alpha)
              : analysis_step_covariance_form(forecast, obs.value, H, Gamma,
                                              alpha);
      v = out.analysis;

      TraceStep s;
      s.step = j;
      s.time = double(j) * cfg.h;
      s.e_sq = (v.mean() - truth).squaredNorm();
      const Ensemble dev = v.deviations();
      s.spread_sq = dev.l2_norm() * dev.l2_norm();
      s.ensemble_err_sq = ensemble_error_sq(v, truth);
      s.lambda_min_forecast = out.diagnostics.forecast_min_eigenvalue;
      s.lambda_min_analysis = out.diagnostics.analysis_min_eigenvalue;
      s.in_ball = members_in_ball(v, cfg.rho);
      trace.steps.push_back(s);
    } catch (const NonFiniteState& e) {
      trace.completed = false;
      trace.failure = "cycle " + std::to_string(j) + ": " + e.what();
      break;
    }
  }
  return trace;
}

namespace {

int replicate_thread_count(int replicates) {
  int cap = static_cast<int>(std::thread::hardware_concurrency());
  if (cap < 1) cap = 1;
  if (const char* env = std::getenv("ETKF_LAB_THREADS")) {
    const int requested = std::atoi(env);
    if (requested >= 1) cap = requested;
  }
  return std::min(cap, replicates);
}

}  // namespace

MonteCarloSummary run_monte_carlo(const RunConfig& cfg) {
  cfg.validate();
  const int R = cfg.replicates;
  std::vector<ErrorTrace> traces(R);
  std::vector<std::exception_ptr> errors(R);

  const int workers = replicate_thread_count(R);
  std::atomic<int> next{0};
  auto work = [&]() {
    for (int i = next.fetch_add(1); i < R; i = next.fetch_add(1)) {
      try {
        traces[i] = run_filter(cfg, std::uint64_t(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  MonteCarloSummary s;
  s.replicates = R;
  s.h = cfg.h;
  const size_t J1 = size_t(cfg.cycles) + 1;
  s.mean_e_sq.assign(J1, 0.0);
  s.se_e_sq.assign(J1, 0.0);
  s.mean_ensemble_err_sq.assign(J1, 0.0);
  s.se_ensemble_err_sq.assign(J1, 0.0);
  s.min_lambda_min_forecast.assign(J1, std::numeric_limits<double>::infinity());
  s.ball_exits.assign(J1, 0);

  for (const auto& t : traces) {
    if (!t.completed) ++s.failed_replicates;
  }
  if (s.failed_replicates > 0) {
    throw NonFiniteState(std::to_string(s.failed_replicates) + " of " +
                         std::to_string(R) + " replicates diverged");
  }

  // aggregate in replicate order (deterministic, order-independent result)
  for (size_t j = 0; j < J1; ++j) {
    double sum_e = 0.0, sum_e2 = 0.0, sum_E = 0.0, sum_E2 = 0.0;
    for (const auto& t : traces) {
      const TraceStep& st = t.steps[j];
      sum_e += st.e_sq;
      sum_e2 += st.e_sq * st.e_sq;
      sum_E += st.ensemble_err_sq;
      sum_E2 += st.ensemble_err_sq * st.ensemble_err_sq;
      if (std::isfinite(st.lambda_min_forecast)) {
        s.min_lambda_min_forecast[j] =
            std::min(s.min_lambda_min_forecast[j], st.lambda_min_forecast);
      }
      if (!st.in_ball) ++s.ball_exits[j];
    }
    const double n = double(R);
    s.mean_e_sq[j] = sum_e / n;
    s.mean_ensemble_err_sq[j] = sum_E / n;
    if (R > 1) {
      const double var_e =
          std::max(0.0, (sum_e2 - sum_e * sum_e / n) / (n - 1.0));
      const double var_E =
          std::max(0.0, (sum_E2 - sum_E * sum_E / n) / (n - 1.0));
      s.se_e_sq[j] = std::sqrt(var_e / n);
      s.se_ensemble_err_sq[j] = std::sqrt(var_E / n);
    }
  }
  return s;
}

WellposednessReport check_wellposedness(const RunConfig& cfg,
                                        const MonteCarloSummary& summary) {
  if (!std::isfinite(cfg.beta)) {
    throw ConfigMismatch("check_wellposedness needs a configured beta");
  }
  const BoundParams p = cfg.bound_params();
  const double E0 = summary.mean_ensemble_err_sq.at(0);
  WellposednessReport report;
  for (size_t j = 0; j < summary.mean_ensemble_err_sq.size(); ++j) {
    BoundCheckRow row;
    row.j = long(j);
    row.mean = summary.mean_ensemble_err_sq[j];
    row.bound = wellposed_bound(long(j), E0, p);
    row.halfwidth = 3.0 * summary.se_ensemble_err_sq[j];
    row.violated = row.mean > row.bound + row.halfwidth;
    if (row.violated) ++report.violations;
    report.rows.push_back(row);
  }
  return report;
}

UniformBoundReport check_uniform_bound(const RunConfig& cfg,
                                       const MonteCarloSummary& summary,
                                       int tail_steps) {
  if (!std::isfinite(cfg.beta) || !std::isfinite(cfg.rho) ||
      !std::isfinite(cfg.lambda0) || !(cfg.lambda0 > 0.0)) {
    throw ConfigMismatch(
        "check_uniform_bound needs configured beta, rho and lambda0 > 0");
  }
  const BoundParams p = cfg.bound_params();
  const DerivedConstants c = derive_constants(p);

  UniformBoundReport report;
  report.alpha0 = c.alpha0;
  report.theta_value = c.theta;
  report.theta_cap_variant = c.Theta_cap;
  report.floor_exists = c.lambda_star.has_value();

  const size_t J1 = summary.mean_e_sq.size();
  if (report.floor_exists) {
    report.lambda_star_value = *c.lambda_star;
    for (size_t j = 1; j < J1; ++j) {
      if (summary.min_lambda_min_forecast[j] <
          report.lambda_star_value - 1e-8) {
        ++report.floor_violations;
      }
    }
  }

  const double e0 = summary.mean_e_sq.at(0);
  for (size_t j = 0; j < J1; ++j) {
    BoundCheckRow row;
    row.j = long(j);
    row.mean = summary.mean_e_sq[j];
    row.bound = finite_time_bound(long(j), e0, p, c);
    row.halfwidth = 3.0 * summary.se_e_sq[j];
    row.violated = row.mean > row.bound + row.halfwidth;
    if (row.violated) ++report.mean_error_violations;
    report.mean_error_rows.push_back(row);
  }

  const int tail = std::min<long>(tail_steps, long(J1) - 1);
  if (tail > 0 && c.theta < 1.0) {
    double sum = 0.0, var_sum = 0.0;
    for (size_t j = J1 - size_t(tail); j < J1; ++j) {
      sum += summary.mean_e_sq[j];
      var_sum += summary.se_e_sq[j] * summary.se_e_sq[j];
    }
    report.tail_mean = sum / double(tail);
    report.tail_bound = asymptotic_bound(p, c);
    report.tail_halfwidth = 3.0 * std::sqrt(var_sum) / double(tail);
    report.tail_ok =
        report.tail_mean <= report.tail_bound + report.tail_halfwidth;
  }

  for (long exits : summary.ball_exits) report.ball_exit_steps += exits > 0;
  return report;
}

bool IdentityReport::all_pass() const {
  for (const auto& c : checks) {
    if (!c.pass()) return false;
  }
  return true;
}

namespace {

void write_csv_value(std::ofstream& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

}  // namespace

void export_trace(const ErrorTrace& trace, const RunConfig& cfg,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "step,time,e_sq,spread_sq,ensemble_err_sq,lambda_min_forecast,"
         "lambda_min_analysis,bound_wellposed,bound_thm37,in_ball\n";

  const BoundParams p = cfg.bound_params();
  const bool have_wellposed = std::isfinite(p.beta);
  bool have_thm37 = false;
  DerivedConstants c;
  if (std::isfinite(p.beta) && std::isfinite(p.rho) && p.lambda0 > 0.0) {
    c = derive_constants(p);
    have_thm37 = true;
  }
  const double E0 = trace.steps.empty() ? 0.0 : trace.steps[0].ensemble_err_sq;
  const double e0 = trace.steps.empty() ? 0.0 : trace.steps[0].e_sq;

  for (size_t j = 1; j < trace.steps.size(); ++j) {
    const TraceStep& s = trace.steps[j];
    out << s.step << ',';
    write_csv_value(out, s.time);
    out << ',';
    write_csv_value(out, s.e_sq);
    out << ',';
    write_csv_value(out, s.spread_sq);
    out << ',';
    write_csv_value(out, s.ensemble_err_sq);
    out << ',';
    write_csv_value(out, s.lambda_min_forecast);
    out << ',';
    write_csv_value(out, s.lambda_min_analysis);
    out << ',';
    write_csv_value(out, have_wellposed
                             ? wellposed_bound(s.step, E0, p)
                             : std::numeric_limits<double>::quiet_NaN());
    out << ',';
    write_csv_value(out, have_thm37
                             ? finite_time_bound(s.step, e0, p, c)
                             : std::numeric_limits<double>::quiet_NaN());
    out << ',' << (s.in_ball ? 1 : 0) << "\n";
  }
  if (!out) throw IoError("write failed for " + path);
}

void export_summary(const MonteCarloSummary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "step,time,mean_e_sq,se_e_sq,mean_ensemble_err_sq,"
         "se_ensemble_err_sq,min_lambda_min_forecast,ball_exits\n";
  for (size_t j = 0; j < summary.mean_e_sq.size(); ++j) {
    out << j << ',';
    write_csv_value(out, double(j) * summary.h);
    out << ',';
    write_csv_value(out, summary.mean_e_sq[j]);
    out << ',';
    write_csv_value(out, summary.se_e_sq[j]);
    out << ',';
    write_csv_value(out, summary.mean_ensemble_err_sq[j]);
    out << ',';
    write_csv_value(out, summary.se_ensemble_err_sq[j]);
    out << ',';
    write_csv_value(out, summary.min_lambda_min_forecast[j]);
    out << ',' << summary.ball_exits[j] << "\n";
  }
  if (!out) throw IoError("write failed for " + path);
}

void export_bound_table(const RunConfig& cfg, long cycles, double e0_sq,
                        double ensemble_err0_sq, const std::string& path) {
  const BoundParams p = cfg.bound_params();
  const DerivedConstants c = derive_constants(p);
  const double asym = c.theta < 1.0
                          ? asymptotic_bound(p, c)
                          : std::numeric_limits<double>::quiet_NaN();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "j,bound_wellposed,bound_thm37,asymptote\n";
  for (long j = 0; j <= cycles; ++j) {
    out << j << ',';
    write_csv_value(out, wellposed_bound(j, ensemble_err0_sq, p));
    out << ',';
    write_csv_value(out, finite_time_bound(j, e0_sq, p, c));
    out << ',';
    write_csv_value(out, asym);
    out << "\n";
  }
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace etkf
