#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "etkf/ensemble.hpp"
#include "etkf/errors.hpp"

namespace etkf {

/// Finite-dimensional right-hand sides du/dt = F(u).
class ModelSystem {
 public:
  enum class Kind { Lorenz63, Lorenz96, LinearTest };

  static ModelSystem lorenz63(double sigma = 10.0, double rho = 28.0,
                              double beta = 8.0 / 3.0);
  static ModelSystem lorenz96(double forcing, int dim);
  static ModelSystem linear(Eigen::MatrixXd A);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  const Eigen::MatrixXd& linear_matrix() const { return A_; }

  StateVector rhs(const StateVector& u) const;

 private:
  ModelSystem() = default;
  Kind kind_ = Kind::LinearTest;
  int dim_ = 0;
  double p1_ = 0.0, p2_ = 0.0, p3_ = 0.0;  // sigma/rho/beta or forcing
  Eigen::MatrixXd A_;
};

/// Assimilation interval h split into an integral number of RK4 substeps.
struct FlowConfig {
  double h;
  double dt;

  FlowConfig(double h_, double dt_);
  int substeps() const;
};

/// Classical fourth-order Runge-Kutta composition over h/dt substeps.
StateVector flow(const ModelSystem& model, const FlowConfig& cfg,
                 const StateVector& u0);

/// Member-wise flow, order preserved.
Ensemble predict_ensemble(const ModelSystem& model, const FlowConfig& cfg,
                          const Ensemble& v);

/// Sampled lower bound on the one-sided Lipschitz constant
/// sup <F(u)-F(v), u-v>/|u-v|^2 over pairs drawn from B(rho).
/// Deterministic given the seed.
double estimate_beta_one_sided(const ModelSystem& model, double rho,
                               int n_samples, std::uint64_t seed);

/// Max |u_t| along a spin-up trajectory of the discrete flow; a practical
/// absorbing-ball radius for the configured dynamics, not an exact one.
double estimate_radius(const ModelSystem& model, const FlowConfig& cfg,
                       const StateVector& u0, int steps, int discard = 0);

}  // namespace etkf
