#include <algorithm>
#include <cmath>
#include <random>

#include "etkf/harness.hpp"

namespace etkf {

namespace {

double rel_residual(double lhs, double rhs) {
  const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-30});
  return std::abs(lhs - rhs) / scale;
}

double rel_residual(const Eigen::MatrixXd& lhs, const Eigen::MatrixXd& rhs) {
  const double scale = std::max({lhs.norm(), rhs.norm(), 1e-30});
  return (lhs - rhs).norm() / scale;
}

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd A(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) A(i, j) = normal(rng);
  }
  return A;
}

// Well-conditioned SPD matrix: B B^T shifted away from singularity.
Eigen::MatrixXd random_spd(std::mt19937_64& rng, int d) {
  const Eigen::MatrixXd B = random_matrix(rng, d, d);
  return B * B.transpose() + double(d) * Eigen::MatrixXd::Identity(d, d);
}

struct Accumulator {
  double max_residual = 0.0;
  void note(double r) { max_residual = std::max(max_residual, r); }
};

}  // namespace

IdentityReport verify_identities(std::uint64_t seed, int trials) {
  if (trials < 1) throw SizeError("trials must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim_draw(1, 20);
  std::uniform_int_distribution<int> size_draw(2, 10);
  std::uniform_real_distribution<double> alpha_draw(1.0, 2.0);
  std::uniform_real_distribution<double> gamma_draw(0.5, 2.0);

  Accumulator norm_decomp, trans_cov, gain_id, mean_eq, trans_ones,
      trans_repr, eig_map, lem_a1, lem_a2, lem_a3, lem_a4;

  for (int t = 0; t < trials; ++t) {
    const int m = dim_draw(rng);
    const int N = size_draw(rng);
    std::uniform_int_distribution<int> obs_draw(1, m);
    const int d = obs_draw(rng);
    const double alpha_value = alpha_draw(rng);

    const Ensemble V(random_matrix(rng, m, N));

    // norm decomposition ||V||^2 = |vbar|^2 + ||dV||^2, both sides
    // computed from scratch
    {
      const double lhs = V.data().squaredNorm() / double(N);
      const double rhs = V.mean().squaredNorm() +
                         V.deviations().data().squaredNorm() / double(N);
      norm_decomp.note(rel_residual(lhs, rhs));
    }

    const ObservationOperator H =
        ObservationOperator::matrix(random_matrix(rng, d, m));
    const NoiseCovariance Gamma = NoiseCovariance::matrix(random_spd(rng, d));
    const InflationFactor alpha(alpha_value);

    const Eigen::MatrixXd Hd = H.dense();
    const Eigen::MatrixXd Gd = Gamma.dense();
    const Eigen::MatrixXd Ginv = Gd.inverse();
    const Eigen::VectorXd y = random_matrix(rng, d, 1);

    const Eigen::MatrixXd C_alpha = alpha_value * alpha_value * V.covariance();
    const Eigen::MatrixXd K = kalman_gain(C_alpha, H, Gamma);

    // analysis covariance from the transform equals (I - KH) C^alpha
    {
      const TransformMatrix T = transform_matrix(V.deviations(), H, Gamma, alpha);
      const Eigen::MatrixXd dVT =
          alpha_value * V.deviations().data() * T.entries;
      const Eigen::MatrixXd lhs = dVT * dVT.transpose() / double(N - 1);
      const Eigen::MatrixXd rhs =
          (Eigen::MatrixXd::Identity(m, m) - K * Hd) * C_alpha;
      trans_cov.note(rel_residual(lhs, rhs));

      // T 1 = 1
      const Eigen::VectorXd ones = Eigen::VectorXd::Ones(N);
      trans_ones.note((T.entries * ones - ones).norm() / std::sqrt(double(N)));
    }

    // gain identity K = (I - KH) C H^* Gamma^{-1}
    {
      const Eigen::MatrixXd rhs = (Eigen::MatrixXd::Identity(m, m) - K * Hd) *
                                  C_alpha * Hd.transpose() * Ginv;
      gain_id.note(rel_residual(K, rhs));
    }

    // mean update solves (I + C H^* Gamma^{-1} H) vbar = vbar_hat + C H^* Gamma^{-1} y
    {
      const StateVector vbar_hat = V.mean();
      const StateVector vbar = mean_update(vbar_hat, y, K, H);
      const Eigen::MatrixXd CHG = C_alpha * Hd.transpose() * Ginv;
      const Eigen::VectorXd lhs =
          vbar + CHG * (Hd * vbar);
      const Eigen::VectorXd rhs = vbar_hat + CHG * y;
      mean_eq.note((lhs - rhs).norm() /
                   std::max({lhs.norm(), rhs.norm(), 1e-30}));
    }

    // transform representation (alpha = 1):
    // (I + C H^* Gamma^{-1} H) V_a = V T^{-1} + C H^* Gamma^{-1} y 1
    {
      const InflationFactor one(1.0);
      const AnalysisOutput out =
          analysis_step_transform_form(V, y, H, Gamma, one, false);
      const TransformMatrix T = transform_matrix(V.deviations(), H, Gamma, one);
      const Eigen::MatrixXd C = V.covariance();
      const Eigen::MatrixXd CHG = C * Hd.transpose() * Ginv;
      const Eigen::MatrixXd lhs =
          out.analysis.data() + CHG * (Hd * out.analysis.data());
      const Eigen::MatrixXd rhs =
          V.data() * T.entries.inverse() +
          (CHG * y) * Eigen::RowVectorXd::Ones(N);
      trans_repr.note(rel_residual(lhs, rhs));
    }

    // fully observed minimum-eigenvalue map, needs a full-rank covariance
    {
      const int m_eig = std::min(m, N - 1);
      if (m_eig >= 1) {
        const Ensemble W(random_matrix(rng, m_eig, N));
        const double gamma_value = gamma_draw(rng);
        const ObservationOperator Hi = ObservationOperator::identity(m_eig);
        const NoiseCovariance Gi =
            NoiseCovariance::scaled_identity(gamma_value, m_eig);
        const AnalysisOutput out = analysis_step_transform_form(
            W, random_matrix(rng, m_eig, 1), Hi, Gi, alpha);
        const double lam_hat = out.diagnostics.forecast_min_eigenvalue;
        const double predicted =
            analysis_min_eigenvalue_map(lam_hat, alpha_value, gamma_value);
        eig_map.note(
            rel_residual(out.diagnostics.analysis_min_eigenvalue, predicted));
      }
    }

    // (I + A)^{-1} = I - (I + A)^{-1} A, for A with ||A|| < 1
    {
      Eigen::MatrixXd A = random_matrix(rng, m, m);
      A *= 0.9 / std::max(A.norm(), 1e-30);  // Frobenius >= spectral norm
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
      const Eigen::MatrixXd inv = (I + A).inverse();
      lem_a1.note(rel_residual(inv, I - inv * A));
    }

    // 0 <= (A + I)^{-1} A <= I in the quadratic-form sense, A PSD
    {
      const Eigen::MatrixXd B = random_matrix(rng, m, m);
      const Eigen::MatrixXd A = B * B.transpose();
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
      const Eigen::MatrixXd P = (A + I).inverse() * A;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
          0.5 * (P + P.transpose()));
      const double lo = es.eigenvalues().minCoeff();
      const double hi = es.eigenvalues().maxCoeff();
      lem_a2.note(std::max(std::max(-lo, hi - 1.0), 0.0));
    }

    // (I + V^* Gamma^{-1} V)^{-1} = I - V^* (V V^* + Gamma)^{-1} V and
    // (I + V^* Gamma^{-1} V)^{-1} V^* Gamma^{-1} = V^* (V V^* + Gamma)^{-1}
    {
      const Eigen::MatrixXd Vm = random_matrix(rng, d, N);
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);
      const Eigen::MatrixXd lhs_inv =
          (I + Vm.transpose() * Ginv * Vm).inverse();
      const Eigen::MatrixXd outer_inv =
          (Vm * Vm.transpose() + Gd).inverse();
      lem_a3.note(
          rel_residual(lhs_inv, I - Vm.transpose() * outer_inv * Vm));
      lem_a4.note(rel_residual(lhs_inv * Vm.transpose() * Ginv,
                               Vm.transpose() * outer_inv));
    }
  }

  IdentityReport report;
  const double tol = 1e-9;
  report.checks = {
      {"norm_decomposition", norm_decomp.max_residual, tol},
      {"transform_covariance_consistency", trans_cov.max_residual, tol},
      {"kalman_gain_identity", gain_id.max_residual, tol},
      {"mean_update_equivalence", mean_eq.max_residual, tol},
      {"transform_preserves_ones", trans_ones.max_residual, tol},
      {"transform_representation", trans_repr.max_residual, tol},
      {"min_eigenvalue_map", eig_map.max_residual, 1e-8},
      {"resolvent_identity", lem_a1.max_residual, tol},
      {"resolvent_contraction", lem_a2.max_residual, tol},
      {"woodbury_inverse", lem_a3.max_residual, tol},
      {"woodbury_gain", lem_a4.max_residual, tol},
  };
  return report;
}

}  // namespace etkf
