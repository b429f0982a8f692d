#pragma once

#include <optional>
#include <vector>

#include "etkf/errors.hpp"

namespace etkf {

/// Inputs of the closed-form error bounds. beta is the Lipschitz-type growth
/// constant of the dynamics, epsilon the Young-inequality slack, rho the
/// absorbing-ball radius, lambda0 a lower bound on the minimum eigenvalue of
/// the initial ensemble covariance.
struct BoundParams {
  double beta = 0.0;
  double epsilon = 0.0;
  double rho = 0.0;
  double h = 0.0;
  double gamma = 0.0;
  int N = 2;
  int m = 1;
  double alpha = 1.0;
  double lambda0 = 0.0;
};

struct DerivedConstants {
  double D = 0.0;
  double a = 0.0;
  std::optional<double> lambda_star;  // empty = no uniform eigenvalue floor
  double theta = 0.0;
  double Theta_run = 0.0;   // (1 + (alpha^2/gamma^2) lambda*)^{-2}, run alpha
  double Theta_cap = 0.0;   // same with alpha0 in place of the run alpha
  double alpha0 = 0.0;
};

/// Finite-time bound without inflation:
/// e^{2 beta h j} E0 + (N-1) gamma^2 (e^{2 beta h j}-1)/(e^{2 beta h}-1),
/// with the j * (N-1) gamma^2 limit at beta = 0.
double wellposed_bound(long j, double e0_sq, const BoundParams& p);

/// D = 2 beta^2 rho^2 / (2 (beta+epsilon) epsilon).
double constant_D(const BoundParams& p);

/// a = 8 (N/(N-1)) beta rho^2.
double constant_a(const BoundParams& p);

/// Uniform eigenvalue floor min{e^{-a h} lambda0, (gamma^2/alpha^2)(e^{-a h} alpha^2 - 1)}.
/// Exists if and only if e^{-a h} alpha^2 > 1; empty otherwise.
std::optional<double> lambda_star(const BoundParams& p);

/// theta = (1 + (alpha^2/gamma^2) lambda*)^{-2} e^{2 (beta+epsilon) h}.
double theta(const BoundParams& p, double lam_star);

/// Smallest inflation factor guaranteeing theta < 1:
/// max{lambda0^{-1/2} gamma e^{a h} (e^{(beta+epsilon) h} - 1)^{1/2},
///     e^{(a+beta+epsilon) h / 2}}.
double alpha_zero(const BoundParams& p);

/// All derived constants for the given parameters.
DerivedConstants derive_constants(const BoundParams& p);

/// Uniform-in-time finite-j bound
/// theta^j (e0 + D) + m gamma^2 (1-theta^j)/(1-theta)
///   + ((1-theta^j)(1-Theta)/(1-theta) - 1) D,
/// using Theta_run (see derive_constants); theta = 1 uses the j-fold limit.
double finite_time_bound(long j, double e0_sq, const BoundParams& p,
                         const DerivedConstants& c);

/// j -> infinity limit m gamma^2/(1-theta) + ((1-Theta)/(1-theta) - 1) D.
/// Throws NotContracting if theta >= 1.
double asymptotic_bound(const BoundParams& p, const DerivedConstants& c);

/// One application of the eigenvalue-floor iteration
/// g(lambda) = e^{-a h} alpha^2 lambda / (1 + (alpha^2/gamma^2) lambda).
double eigenvalue_floor_iteration(double lambda, const BoundParams& p);

/// Least-squares slope of log(asymptotic_bound) against log(gamma) over the
/// given noise scales; approaches 2 in the accurate-observation limit.
double gamma_scaling_exponent(const BoundParams& p_template,
                              const std::vector<double>& gammas);

}  // namespace etkf
