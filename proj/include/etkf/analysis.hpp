#pragma once

#include <Eigen/Dense>
#include <optional>

#include "etkf/ensemble.hpp"
#include "etkf/errors.hpp"

namespace etkf {

/// Linear observation operator H, either the identity on the state space or
/// a general d x m matrix.
class ObservationOperator {
 public:
  static ObservationOperator identity(int m);
  static ObservationOperator matrix(Eigen::MatrixXd H);

  bool is_identity() const { return is_identity_; }
  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& u) const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& columns) const;
  Eigen::MatrixXd dense() const;

 private:
  ObservationOperator() = default;
  bool is_identity_ = true;
  int in_dim_ = 0;
  int out_dim_ = 0;
  Eigen::MatrixXd H_;  // empty for the identity kind
};

/// Observation noise covariance Gamma > 0, either gamma^2 I or a general
/// symmetric positive-definite matrix (factorized once for solves).
class NoiseCovariance {
 public:
  static NoiseCovariance scaled_identity(double gamma, int d);
  static NoiseCovariance matrix(const Eigen::MatrixXd& G);

  bool is_scaled_identity() const { return is_scaled_; }
  double gamma() const { return gamma_; }
  int dim() const { return d_; }

  Eigen::MatrixXd dense() const;
  Eigen::VectorXd apply_inverse(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd apply_inverse(const Eigen::MatrixXd& M) const;
  /// L from Gamma = L L^T, used to sample correlated noise.
  Eigen::MatrixXd cholesky_factor() const;

 private:
  NoiseCovariance() = default;
  bool is_scaled_ = true;
  double gamma_ = 1.0;
  int d_ = 0;
  Eigen::MatrixXd G_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// Multiplicative inflation factor alpha >= 1.
struct InflationFactor {
  double alpha;
  explicit InflationFactor(double a) : alpha(a) {
    if (!(a >= 1.0)) {
      throw InvalidInflation("inflation factor must be >= 1, got " +
                             std::to_string(a));
    }
  }
};

/// Symmetric positive-definite N x N transform with T*1 = 1.
struct TransformMatrix {
  Eigen::MatrixXd entries;
};

struct AnalysisDiagnostics {
  std::optional<Eigen::MatrixXd> analysis_covariance;
  double forecast_min_eigenvalue = 0.0;  // of the uninflated forecast covariance
  double analysis_min_eigenvalue = 0.0;
};

struct AnalysisOutput {
  Ensemble analysis;
  bool kalman_gain_applied = false;
  AnalysisDiagnostics diagnostics;
};

/// Mean kept, deviations scaled by alpha.
Ensemble inflate(const Ensemble& vhat, InflationFactor alpha);

/// K = C H^T (H C H^T + Gamma)^{-1}, innovation covariance solved by LLT.
Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& c_hat,
                            const ObservationOperator& H,
                            const NoiseCovariance& gamma);

/// vbar = vbar_hat + K (y - H vbar_hat).
StateVector mean_update(const StateVector& vbar_hat, const Eigen::VectorXd& y,
                        const Eigen::MatrixXd& K, const ObservationOperator& H);

/// (I_N + S)^{-1/2} for symmetric positive-semidefinite S, by symmetric
/// eigendecomposition. Eigenvalues of I + S are clamped at 1e-14 before the
/// -1/2 power; they are >= 1 in exact arithmetic so the clamp only guards
/// rounding.
Eigen::MatrixXd symmetric_inverse_sqrt(const Eigen::MatrixXd& s_arg);

/// T = (I_N + (alpha^2/(N-1)) (H dV)^T Gamma^{-1} (H dV))^{-1/2} for a
/// deviation ensemble dV.
TransformMatrix transform_matrix(const Ensemble& dvhat,
                                 const ObservationOperator& H,
                                 const NoiseCovariance& gamma,
                                 InflationFactor alpha);

/// Analysis step that materializes the m x m forecast covariance (step III).
/// Rejects m above max_covariance_dim; use the transform form instead.
AnalysisOutput analysis_step_covariance_form(const Ensemble& vhat,
                                             const Eigen::VectorXd& y,
                                             const ObservationOperator& H,
                                             const NoiseCovariance& gamma,
                                             InflationFactor alpha,
                                             int max_covariance_dim = 512);

/// Covariance-free analysis step (III'): V = vbar_hat 1 + dVhat^alpha Ttilde
/// with Ttilde = (1/(N-1)) T^2 (dVhat^alpha)^T H^T Gamma^{-1} (y - H vbar_hat) 1 + T.
AnalysisOutput analysis_step_transform_form(const Ensemble& vhat,
                                            const Eigen::VectorXd& y,
                                            const ObservationOperator& H,
                                            const NoiseCovariance& gamma,
                                            InflationFactor alpha,
                                            bool with_diagnostics = true);

/// Minimum-eigenvalue update of the fully observed analysis step:
/// lambda -> alpha^2 lambda / (1 + (alpha^2/gamma^2) lambda).
double analysis_min_eigenvalue_map(double lambda_hat, double alpha,
                                   double gamma);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& sym);

}  // namespace etkf
