#include "etkf/dynamics.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace etkf {

ModelSystem ModelSystem::lorenz63(double sigma, double rho, double beta) {
  ModelSystem m;
  m.kind_ = Kind::Lorenz63;
  m.dim_ = 3;
  m.p1_ = sigma;
  m.p2_ = rho;
  m.p3_ = beta;
  return m;
}

ModelSystem ModelSystem::lorenz96(double forcing, int dim) {
  if (dim < 4) {
    throw DimensionMismatch("Lorenz96 needs dim >= 4 for the cyclic coupling");
  }
  ModelSystem m;
  m.kind_ = Kind::Lorenz96;
  m.dim_ = dim;
  m.p1_ = forcing;
  return m;
}

ModelSystem ModelSystem::linear(Eigen::MatrixXd A) {
  if (A.rows() != A.cols() || A.rows() < 1) {
    throw DimensionMismatch("LinearTest matrix must be square and non-empty");
  }
  ModelSystem m;
  m.kind_ = Kind::LinearTest;
  m.dim_ = static_cast<int>(A.rows());
  m.A_ = std::move(A);
  return m;
}

StateVector ModelSystem::rhs(const StateVector& u) const {
  if (u.size() != dim_) {
    throw DimensionMismatch("rhs: state dimension mismatch");
  }
  switch (kind_) {
    case Kind::Lorenz63: {
      StateVector f(3);
      f(0) = p1_ * (u(1) - u(0));
      f(1) = u(0) * (p2_ - u(2)) - u(1);
      f(2) = u(0) * u(1) - p3_ * u(2);
      return f;
    }
    case Kind::Lorenz96: {
      const int n = dim_;
      StateVector f(n);
      for (int i = 0; i < n; ++i) {
        const double xp1 = u((i + 1) % n);
        const double xm1 = u((i - 1 + n) % n);
        const double xm2 = u((i - 2 + n) % n);
        f(i) = (xp1 - xm2) * xm1 - u(i) + p1_;
      }
      return f;
    }
    case Kind::LinearTest:
      return A_ * u;
  }
  throw std::logic_error("unreachable");
}

FlowConfig::FlowConfig(double h_, double dt_) : h(h_), dt(dt_) {
  if (!(dt > 0.0) || !(h >= dt)) {
    throw ConfigError("flow config requires 0 < dt <= h");
  }
  const double ratio = h / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
    throw ConfigError("flow config requires h/dt to be an integer");
  }
}

int FlowConfig::substeps() const { return static_cast<int>(std::round(h / dt)); }

StateVector flow(const ModelSystem& model, const FlowConfig& cfg,
                 const StateVector& u0) {
  StateVector u = u0;
  const double dt = cfg.dt;
  const int steps = cfg.substeps();
  for (int s = 0; s < steps; ++s) {
    const StateVector k1 = model.rhs(u);
    const StateVector k2 = model.rhs(u + 0.5 * dt * k1);
    const StateVector k3 = model.rhs(u + 0.5 * dt * k2);
    const StateVector k4 = model.rhs(u + dt * k3);
    u += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!u.allFinite()) {
      throw NonFiniteState("flow diverged at substep " + std::to_string(s));
    }
  }
  return u;
}

Ensemble predict_ensemble(const ModelSystem& model, const FlowConfig& cfg,
                          const Ensemble& v) {
  Eigen::MatrixXd out(v.dim(), v.size());
  for (int n = 0; n < v.size(); ++n) {
    try {
      out.col(n) = flow(model, cfg, v.member(n));
    } catch (const NonFiniteState& e) {
      throw NonFiniteState("member " + std::to_string(n) + ": " + e.what());
    }
  }
  return Ensemble(std::move(out));
}

double estimate_beta_one_sided(const ModelSystem& model, double rho,
                               int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw SizeError("estimate_beta_one_sided: n_samples >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int m = model.dim();

  auto draw_in_ball = [&](double radius) {
    StateVector u(m);
    for (int i = 0; i < m; ++i) u(i) = normal(rng);
    const double r = radius * std::pow(unif(rng), 1.0 / m);
    return StateVector((r / std::max(u.norm(), 1e-300)) * u);
  };

  double best = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_samples; ++s) {
    const StateVector u = draw_in_ball(rho);
    const StateVector v = draw_in_ball(rho);
    const StateVector w = u - v;
    const double wn2 = w.squaredNorm();
    if (wn2 < 1e-20) continue;
    const double ratio = (model.rhs(u) - model.rhs(v)).dot(w) / wn2;
    best = std::max(best, ratio);
  }
  return best;
}

double estimate_radius(const ModelSystem& model, const FlowConfig& cfg,
                       const StateVector& u0, int steps, int discard) {
  StateVector u = u0;
  double radius = 0.0;
  for (int j = 0; j < steps; ++j) {
    u = flow(model, cfg, u);
    if (j >= discard) radius = std::max(radius, u.norm());
  }
  return radius;
}

}  // namespace etkf
