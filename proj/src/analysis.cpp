#include "etkf/analysis.hpp"

#include <cmath>

namespace etkf {

namespace {

double sym_residual(const Eigen::MatrixXd& A) {
  return (A - A.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace

ObservationOperator ObservationOperator::identity(int m) {
  if (m < 1) throw DimensionMismatch("identity operator needs m >= 1");
  ObservationOperator op;
  op.is_identity_ = true;
  op.in_dim_ = m;
  op.out_dim_ = m;
  return op;
}

ObservationOperator ObservationOperator::matrix(Eigen::MatrixXd H) {
  if (H.rows() < 1 || H.cols() < 1) {
    throw DimensionMismatch("observation matrix must be non-empty");
  }
  ObservationOperator op;
  op.is_identity_ = false;
  op.in_dim_ = static_cast<int>(H.cols());
  op.out_dim_ = static_cast<int>(H.rows());
  op.H_ = std::move(H);
  return op;
}

Eigen::VectorXd ObservationOperator::apply(const Eigen::VectorXd& u) const {
  if (u.size() != in_dim_) {
    throw DimensionMismatch("observation operator: state dimension mismatch");
  }
  return is_identity_ ? u : Eigen::VectorXd(H_ * u);
}

Eigen::MatrixXd ObservationOperator::apply(const Eigen::MatrixXd& columns) const {
  if (columns.rows() != in_dim_) {
    throw DimensionMismatch("observation operator: state dimension mismatch");
  }
  return is_identity_ ? columns : Eigen::MatrixXd(H_ * columns);
}

Eigen::MatrixXd ObservationOperator::dense() const {
  return is_identity_ ? Eigen::MatrixXd::Identity(out_dim_, in_dim_) : H_;
}

NoiseCovariance NoiseCovariance::scaled_identity(double gamma, int d) {
  if (!(gamma > 0.0)) {
    throw SingularError("noise scale gamma must be > 0");
  }
  NoiseCovariance g;
  g.is_scaled_ = true;
  g.gamma_ = gamma;
  g.d_ = d;
  return g;
}

NoiseCovariance NoiseCovariance::matrix(const Eigen::MatrixXd& G) {
  if (G.rows() != G.cols()) {
    throw DimensionMismatch("noise covariance must be square");
  }
  const double scale = std::max(G.cwiseAbs().maxCoeff(), 1e-300);
  if (sym_residual(G) > 1e-12 * scale) {
    throw NotSymmetric("noise covariance is not symmetric");
  }
  NoiseCovariance g;
  g.is_scaled_ = false;
  g.d_ = static_cast<int>(G.rows());
  g.G_ = 0.5 * (G + G.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.G_);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
    throw SingularError("noise covariance is not positive definite");
  }
  g.llt_.compute(g.G_);
  if (g.llt_.info() != Eigen::Success) {
    throw SingularError("noise covariance factorization failed");
  }
  return g;
}

Eigen::MatrixXd NoiseCovariance::dense() const {
  if (is_scaled_) {
    return gamma_ * gamma_ * Eigen::MatrixXd::Identity(d_, d_);
  }
  return G_;
}

Eigen::VectorXd NoiseCovariance::apply_inverse(const Eigen::VectorXd& v) const {
  if (v.size() != d_) throw DimensionMismatch("Gamma^{-1}: dimension mismatch");
  if (is_scaled_) return v / (gamma_ * gamma_);
  return llt_.solve(v);
}

Eigen::MatrixXd NoiseCovariance::apply_inverse(const Eigen::MatrixXd& M) const {
  if (M.rows() != d_) throw DimensionMismatch("Gamma^{-1}: dimension mismatch");
  if (is_scaled_) return M / (gamma_ * gamma_);
  return llt_.solve(M);
}

Eigen::MatrixXd NoiseCovariance::cholesky_factor() const {
  if (is_scaled_) {
    return gamma_ * Eigen::MatrixXd::Identity(d_, d_);
  }
  return llt_.matrixL();
}

Ensemble inflate(const Ensemble& vhat, InflationFactor alpha) {
  const StateVector vbar = vhat.mean();
  Eigen::MatrixXd out =
      (vhat.data().colwise() - vbar) * alpha.alpha;
  out.colwise() += vbar;
  return Ensemble(out);
}

Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& c_hat,
                            const ObservationOperator& H,
                            const NoiseCovariance& gamma) {
  if (c_hat.rows() != c_hat.cols() || c_hat.rows() != H.in_dim()) {
    throw DimensionMismatch("kalman_gain: covariance/operator mismatch");
  }
  if (gamma.dim() != H.out_dim()) {
    throw DimensionMismatch("kalman_gain: noise covariance dimension mismatch");
  }
  const Eigen::MatrixXd Ht = H.dense().transpose();  // m x d
  const Eigen::MatrixXd CHt = c_hat * Ht;            // m x d
  const Eigen::MatrixXd innovation_cov =
      H.apply(CHt) + gamma.dense();                  // d x d, SPD for Gamma > 0
  Eigen::LLT<Eigen::MatrixXd> llt(innovation_cov);
  if (llt.info() != Eigen::Success) {
    throw SingularError("kalman_gain: innovation covariance solve failed");
  }
  return llt.solve(CHt.transpose()).transpose();
}

StateVector mean_update(const StateVector& vbar_hat, const Eigen::VectorXd& y,
                        const Eigen::MatrixXd& K, const ObservationOperator& H) {
  if (y.size() != H.out_dim() || vbar_hat.size() != H.in_dim() ||
      K.rows() != H.in_dim() || K.cols() != H.out_dim()) {
    throw DimensionMismatch("mean_update: inconsistent dimensions");
  }
  return vbar_hat + K * (y - H.apply(vbar_hat));
}

Eigen::MatrixXd symmetric_inverse_sqrt(const Eigen::MatrixXd& s_arg) {
  if (s_arg.rows() != s_arg.cols()) {
    throw NotSymmetric("symmetric_inverse_sqrt: matrix is not square");
  }
  const double scale = std::max(s_arg.cwiseAbs().maxCoeff(), 1.0);
  if (sym_residual(s_arg) > 1e-10 * scale) {
    throw NotSymmetric("symmetric_inverse_sqrt: matrix is not symmetric");
  }
  const long n = s_arg.rows();
  const Eigen::MatrixXd A =
      Eigen::MatrixXd::Identity(n, n) + 0.5 * (s_arg + s_arg.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) {
    throw EigenFailure("symmetric_inverse_sqrt: eigendecomposition failed");
  }
  const Eigen::VectorXd inv_sqrt =
      es.eigenvalues().cwiseMax(1e-14).cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd out = es.eigenvectors() * inv_sqrt.asDiagonal() *
                        es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

TransformMatrix transform_matrix(const Ensemble& dvhat,
                                 const ObservationOperator& H,
                                 const NoiseCovariance& gamma,
                                 InflationFactor alpha) {
  const int N = dvhat.size();
  const double dv_scale = std::max(dvhat.data().cwiseAbs().maxCoeff(), 1e-300);
  const Eigen::VectorXd rowsums = dvhat.data().rowwise().sum();
  if (rowsums.cwiseAbs().maxCoeff() > 1e-8 * dv_scale * N) {
    throw DimensionMismatch("transform_matrix: input is not a deviation ensemble");
  }
  const Eigen::MatrixXd G = H.apply(dvhat.data());  // d x N
  const double a2 = alpha.alpha * alpha.alpha;
  Eigen::MatrixXd M =
      (a2 / double(N - 1)) * (G.transpose() * gamma.apply_inverse(G));
  TransformMatrix T{symmetric_inverse_sqrt(M)};

  // Lemma-level invariant: 1 is an eigenvector with eigenvalue 1.
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(N);
  if ((T.entries * ones - ones).cwiseAbs().maxCoeff() > 1e-8) {
    throw EigenFailure("transform_matrix: T*1 = 1 violated beyond tolerance");
  }
  return T;
}

namespace {

void fill_diagnostics(AnalysisOutput& out, const Ensemble& forecast,
                      bool keep_covariance) {
  out.diagnostics.forecast_min_eigenvalue =
      min_eigenvalue(forecast.covariance());
  Eigen::MatrixXd ca = out.analysis.covariance();
  out.diagnostics.analysis_min_eigenvalue = min_eigenvalue(ca);
  if (keep_covariance) {
    out.diagnostics.analysis_covariance = std::move(ca);
  }
}

}  // namespace

AnalysisOutput analysis_step_covariance_form(const Ensemble& vhat,
                                             const Eigen::VectorXd& y,
                                             const ObservationOperator& H,
                                             const NoiseCovariance& gamma,
                                             InflationFactor alpha,
                                             int max_covariance_dim) {
  if (vhat.dim() > max_covariance_dim) {
    throw CapacityError(
        "covariance form materializes an m x m matrix; m = " +
        std::to_string(vhat.dim()) + " exceeds the limit " +
        std::to_string(max_covariance_dim) + ", use the transform form");
  }
  const StateVector vbar_hat = vhat.mean();
  const Ensemble dev = vhat.deviations();
  const Eigen::MatrixXd c_alpha =
      alpha.alpha * alpha.alpha * vhat.covariance();
  const Eigen::MatrixXd K = kalman_gain(c_alpha, H, gamma);
  const StateVector vbar = mean_update(vbar_hat, y, K, H);
  const TransformMatrix T = transform_matrix(dev, H, gamma, alpha);
  Eigen::MatrixXd members = (alpha.alpha * dev.data()) * T.entries;
  members.colwise() += vbar;

  AnalysisOutput out{Ensemble(std::move(members)), true, {}};
  fill_diagnostics(out, vhat, /*keep_covariance=*/true);
  return out;
}

AnalysisOutput analysis_step_transform_form(const Ensemble& vhat,
                                            const Eigen::VectorXd& y,
                                            const ObservationOperator& H,
                                            const NoiseCovariance& gamma,
                                            InflationFactor alpha,
                                            bool with_diagnostics) {
  if (y.size() != H.out_dim() || vhat.dim() != H.in_dim()) {
    throw DimensionMismatch("analysis step: observation dimension mismatch");
  }
  const int N = vhat.size();
  const StateVector vbar_hat = vhat.mean();
  const Eigen::MatrixXd dev_a =
      alpha.alpha * (vhat.data().colwise() - vbar_hat);  // inflated deviations

  const Eigen::MatrixXd G = H.apply(dev_a);  // d x N
  Eigen::MatrixXd M =
      (G.transpose() * gamma.apply_inverse(G)) / double(N - 1);
  const Eigen::MatrixXd T = symmetric_inverse_sqrt(M);

  const Eigen::VectorXd innovation = y - H.apply(vbar_hat);
  const Eigen::VectorXd z = gamma.apply_inverse(innovation);
  const Eigen::VectorXd w = (T * (T * (G.transpose() * z))) / double(N - 1);

  // Ttilde = w 1^T + T applied to the inflated deviations
  Eigen::MatrixXd members = dev_a * T;
  members.colwise() += vbar_hat + dev_a * w;

  AnalysisOutput out{Ensemble(std::move(members)), false, {}};
  if (with_diagnostics) {
    fill_diagnostics(out, vhat, /*keep_covariance=*/false);
  }
  return out;
}

double analysis_min_eigenvalue_map(double lambda_hat, double alpha,
                                   double gamma) {
  const double a2 = alpha * alpha;
  return a2 * lambda_hat / (1.0 + a2 / (gamma * gamma) * lambda_hat);
}

double min_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym,
                                                    Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw EigenFailure("min_eigenvalue: eigendecomposition failed");
  }
  return es.eigenvalues().minCoeff();
}

}  // namespace etkf
