#include "etkf/bounds.hpp"

#include <cmath>

namespace etkf {

double wellposed_bound(long j, double e0_sq, const BoundParams& p) {
  if (j < 0) throw SizeError("wellposed_bound: j >= 0 required");
  if (j == 0) return e0_sq;
  const double r = 2.0 * p.beta * p.h;
  const double growth = std::exp(r * double(j));
  double geometric;  // (e^{r j} - 1)/(e^{r} - 1)
  if (std::abs(r) < 1e-14) {
    geometric = double(j);
  } else {
    geometric = std::expm1(r * double(j)) / std::expm1(r);
  }
  return growth * e0_sq + double(p.N - 1) * p.gamma * p.gamma * geometric;
}

double constant_D(const BoundParams& p) {
  return 2.0 * p.beta * p.beta * p.rho * p.rho /
         (2.0 * (p.beta + p.epsilon) * p.epsilon);
}

double constant_a(const BoundParams& p) {
  return 8.0 * double(p.N) / double(p.N - 1) * p.beta * p.rho * p.rho;
}

std::optional<double> lambda_star(const BoundParams& p) {
  const double a = constant_a(p);
  const double decay = std::exp(-a * p.h);
  const double a2 = p.alpha * p.alpha;
  if (!(decay * a2 > 1.0)) return std::nullopt;
  const double branch1 = decay * p.lambda0;
  const double branch2 = p.gamma * p.gamma / a2 * (decay * a2 - 1.0);
  return std::min(branch1, branch2);
}

double theta(const BoundParams& p, double lam_star) {
  const double x = p.alpha * p.alpha / (p.gamma * p.gamma) * lam_star;
  const double shrink = 1.0 / ((1.0 + x) * (1.0 + x));
  return shrink * std::exp(2.0 * (p.beta + p.epsilon) * p.h);
}

double alpha_zero(const BoundParams& p) {
  if (!(p.lambda0 > 0.0)) throw SizeError("alpha_zero requires lambda0 > 0");
  const double a = constant_a(p);
  const double be = p.beta + p.epsilon;
  const double first = p.gamma / std::sqrt(p.lambda0) * std::exp(a * p.h) *
                       std::sqrt(std::expm1(be * p.h));
  const double second = std::exp(0.5 * (a + be) * p.h);
  return std::max(first, second);
}

DerivedConstants derive_constants(const BoundParams& p) {
  DerivedConstants c;
  c.D = constant_D(p);
  c.a = constant_a(p);
  c.alpha0 = alpha_zero(p);
  c.lambda_star = lambda_star(p);
  if (c.lambda_star) {
    const double ls = *c.lambda_star;
    c.theta = theta(p, ls);
    const double xr = p.alpha * p.alpha / (p.gamma * p.gamma) * ls;
    c.Theta_run = 1.0 / ((1.0 + xr) * (1.0 + xr));
    const double xc = c.alpha0 * c.alpha0 / (p.gamma * p.gamma) * ls;
    c.Theta_cap = 1.0 / ((1.0 + xc) * (1.0 + xc));
  } else {
    // no floor: the contraction estimate degenerates to lambda* = 0
    c.theta = theta(p, 0.0);
    c.Theta_run = 1.0;
    c.Theta_cap = 1.0;
  }
  return c;
}

double finite_time_bound(long j, double e0_sq, const BoundParams& p,
                         const DerivedConstants& c) {
  if (j < 0) throw SizeError("finite_time_bound: j >= 0 required");
  const double th = c.theta;
  const double thj = std::pow(th, double(j));
  double partial;  // (1 - theta^j)/(1 - theta)
  if (std::abs(1.0 - th) < 1e-14) {
    partial = double(j);
  } else {
    partial = (1.0 - thj) / (1.0 - th);
  }
  const double mg2 = double(p.m) * p.gamma * p.gamma;
  return thj * (e0_sq + c.D) + mg2 * partial +
         (partial * (1.0 - c.Theta_run) - 1.0) * c.D;
}

double asymptotic_bound(const BoundParams& p, const DerivedConstants& c) {
  if (!(c.theta < 1.0)) {
    throw NotContracting("asymptotic_bound requires theta < 1, got theta = " +
                         std::to_string(c.theta));
  }
  const double mg2 = double(p.m) * p.gamma * p.gamma;
  return mg2 / (1.0 - c.theta) +
         ((1.0 - c.Theta_run) / (1.0 - c.theta) - 1.0) * c.D;
}

double eigenvalue_floor_iteration(double lambda, const BoundParams& p) {
  const double a2 = p.alpha * p.alpha;
  const double decay = std::exp(-constant_a(p) * p.h);
  return decay * a2 * lambda / (1.0 + a2 / (p.gamma * p.gamma) * lambda);
}

double gamma_scaling_exponent(const BoundParams& p_template,
                              const std::vector<double>& gammas) {
  if (gammas.size() < 2) {
    throw SizeError("gamma_scaling_exponent needs at least 2 noise scales");
  }
  std::vector<double> xs, ys;
  for (double g : gammas) {
    BoundParams p = p_template;
    p.gamma = g;
    const DerivedConstants c = derive_constants(p);
    if (!(c.theta < 1.0)) {
      throw NotContracting("gamma_scaling_exponent: theta >= 1 at gamma = " +
                           std::to_string(g));
    }
    xs.push_back(std::log(g));
    ys.push_back(std::log(asymptotic_bound(p, c)));
  }
  const double n = double(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace etkf
