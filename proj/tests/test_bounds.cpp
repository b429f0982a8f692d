#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "etkf/bounds.hpp"

using namespace etkf;

namespace {

BoundParams base_params() {
  BoundParams p;
  p.beta = 1.0;
  p.epsilon = 0.1;
  p.rho = 2.0;
  p.h = 0.1;
  p.gamma = 0.5;
  p.N = 3;
  p.m = 3;
  p.alpha = 1.5;
  p.lambda0 = 0.1;
  return p;
}

}  // namespace

TEST_CASE("growth bound without inflation") {
  BoundParams p = base_params();
  CHECK(wellposed_bound(0, 1.7, p) == doctest::Approx(1.7));
  CHECK(wellposed_bound(1, 1.0, p) ==
        doctest::Approx(std::exp(0.2) + 2.0 * 0.25).epsilon(1e-13));

  // direct scalar evaluation at j = 2
  const double expected =
      std::exp(0.4) + 2.0 * 0.25 * (std::exp(0.4) - 1.0) / (std::exp(0.2) - 1.0);
  CHECK(wellposed_bound(2, 1.0, p) == doctest::Approx(expected).epsilon(1e-13));
  // sanity anchor against a hand-computed figure (rounded to ~3 decimals)
  CHECK(expected == doctest::Approx(2.603).epsilon(1e-3));

  // beta = 0 limit: E0 + j (N-1) gamma^2
  p.beta = 0.0;
  CHECK(wellposed_bound(5, 1.0, p) ==
        doctest::Approx(1.0 + 5.0 * 2.0 * 0.25).epsilon(1e-13));

  // geometric-sum oracle: bound(j) = e^{2bh} bound(j-1) + (N-1) gamma^2
  p.beta = 0.7;
  double track = 0.3;
  for (long j = 1; j <= 30; ++j) {
    track = std::exp(2.0 * p.beta * p.h) * track +
            double(p.N - 1) * p.gamma * p.gamma;
    CHECK(wellposed_bound(j, 0.3, p) ==
          doctest::Approx(track).epsilon(1e-10));
  }

  // monotone in j, E0, N, gamma
  p = base_params();
  CHECK(wellposed_bound(4, 1.0, p) >= wellposed_bound(3, 1.0, p));
  CHECK(wellposed_bound(3, 2.0, p) >= wellposed_bound(3, 1.0, p));
  BoundParams bigger = p;
  bigger.N = p.N + 2;
  CHECK(wellposed_bound(3, 1.0, bigger) >= wellposed_bound(3, 1.0, p));
  bigger = p;
  bigger.gamma = 2.0 * p.gamma;
  CHECK(wellposed_bound(3, 1.0, bigger) >= wellposed_bound(3, 1.0, p));
}

TEST_CASE("constants D and a") {
  BoundParams p = base_params();
  p.beta = p.rho = p.epsilon = 1.0;
  CHECK(constant_D(p) == doctest::Approx(0.5).epsilon(1e-14));

  p.beta = 0.0;
  CHECK(constant_D(p) == doctest::Approx(0.0));
  CHECK(constant_a(p) == doctest::Approx(0.0));

  p.beta = 1.0;
  BoundParams scaled = p;
  scaled.rho = 3.0 * p.rho;
  CHECK(constant_D(scaled) == doctest::Approx(9.0 * constant_D(p)));

  p.N = 2;
  p.rho = 1.0;
  CHECK(constant_a(p) == doctest::Approx(16.0).epsilon(1e-14));

  // N/(N-1) decreases toward 1
  double prev = constant_a(p);
  for (int N = 3; N <= 50; ++N) {
    p.N = N;
    CHECK(constant_a(p) < prev);
    CHECK(constant_a(p) > 8.0 * p.beta * p.rho * p.rho);
    prev = constant_a(p);
  }
}

TEST_CASE("eigenvalue floor existence and value") {
  BoundParams p = base_params();
  p.beta = 0.0;  // a = 0
  p.alpha = 2.0;
  p.lambda0 = 1e9;
  // a=0, huge lambda0: floor = gamma^2 (1 - alpha^{-2})
  auto ls = lambda_star(p);
  REQUIRE(ls.has_value());
  CHECK(*ls == doctest::Approx(p.gamma * p.gamma * (1.0 - 0.25)).epsilon(1e-13));

  p.lambda0 = 0.01;  // first branch now active: e^{-ah} lambda0 = lambda0
  ls = lambda_star(p);
  REQUIRE(ls.has_value());
  CHECK(*ls == doctest::Approx(0.01).epsilon(1e-13));

  // boundary alpha^2 = e^{ah} exactly: no floor
  BoundParams q = base_params();
  const double a = constant_a(q);
  q.alpha = std::exp(0.5 * a * q.h);
  CHECK_FALSE(lambda_star(q).has_value());
  q.alpha *= 0.9;
  CHECK_FALSE(lambda_star(q).has_value());
  q.alpha = std::exp(0.5 * a * q.h) * 1.05;
  CHECK(lambda_star(q).has_value());
}

TEST_CASE("contraction rate theta") {
  BoundParams p = base_params();
  CHECK(theta(p, 0.0) ==
        doctest::Approx(std::exp(2.0 * (p.beta + p.epsilon) * p.h))
            .epsilon(1e-14));

  // threshold: (alpha^2/gamma^2) lambda* = e^{(beta+eps)h} - 1 gives theta = 1
  const double lam = (std::exp((p.beta + p.epsilon) * p.h) - 1.0) *
                     p.gamma * p.gamma / (p.alpha * p.alpha);
  CHECK(theta(p, lam) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(theta(p, 2.0 * lam) < theta(p, lam));
}

TEST_CASE("inflation threshold alpha0") {
  // lambda0 chosen so the first branch equals 1
  BoundParams p = base_params();
  const double a = constant_a(p);
  const double be = p.beta + p.epsilon;
  p.lambda0 = p.gamma * p.gamma * std::exp(2.0 * a * p.h) *
              (std::exp(be * p.h) - 1.0);
  CHECK(alpha_zero(p) ==
        doctest::Approx(std::exp(0.5 * (a + be) * p.h)).epsilon(1e-12));

  // nothing grows: no inflation needed
  BoundParams q = base_params();
  q.beta = 0.0;
  q.epsilon = 1e-12;
  CHECK(alpha_zero(q) == doctest::Approx(1.0).epsilon(1e-6));

  // defining property over random draws: alpha slightly above alpha0 contracts
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    BoundParams r;
    r.beta = 2.0 * unit(rng);
    r.epsilon = 0.01 + unit(rng);
    r.rho = 0.2 + unit(rng);
    r.h = 0.01 + 0.05 * unit(rng);
    r.gamma = 0.05 + unit(rng);
    r.N = 2 + int(rng() % 9);
    r.m = 1 + int(rng() % 5);
    r.lambda0 = 0.01 + unit(rng);

    r.alpha = 1.01 * alpha_zero(r);
    const auto ls = lambda_star(r);
    REQUIRE(ls.has_value());
    CHECK(theta(r, *ls) < 1.0);

    // below the threshold with the first branch active, no contraction
    BoundParams s = r;
    s.alpha = 0.5 * alpha_zero(s);
    const double first = s.gamma / std::sqrt(s.lambda0) *
                         std::exp(constant_a(s) * s.h) *
                         std::sqrt(std::exp((s.beta + s.epsilon) * s.h) - 1.0);
    if (s.alpha >= 1.0 && first >= std::exp(0.5 * (constant_a(s) +
                                                   s.beta + s.epsilon) * s.h)) {
      const auto lss = lambda_star(s);
      if (lss.has_value()) CHECK(theta(s, *lss) >= 1.0);
    }
  }
}

TEST_CASE("finite-time bound equals the iterated one-step recursion") {
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    BoundParams p;
    p.beta = 1.5 * unit(rng);
    p.epsilon = 0.05 + 0.5 * unit(rng);
    p.rho = 0.2 + unit(rng);
    p.h = 0.02 + 0.05 * unit(rng);
    p.gamma = 0.1 + unit(rng);
    p.N = 2 + int(rng() % 9);
    p.m = 1 + int(rng() % 5);
    p.lambda0 = 0.05 + unit(rng);
    p.alpha = 1.05 * alpha_zero(p);

    const DerivedConstants c = derive_constants(p);
    const double e0 = unit(rng);
    double rec = e0;
    const double mg2 = double(p.m) * p.gamma * p.gamma;
    for (long j = 1; j <= 40; ++j) {
      rec = c.theta * (rec + c.D) + mg2 - c.Theta_run * c.D;
      const double closed = finite_time_bound(j, e0, p, c);
      CHECK(std::abs(closed - rec) <= 1e-10 * std::max(std::abs(rec), 1.0));
    }
    CHECK(finite_time_bound(0, e0, p, c) == doctest::Approx(e0).epsilon(1e-12));

    // large-j limit matches the asymptote
    if (c.theta < 1.0) {
      const double tail = finite_time_bound(1000000, e0, p, c);
      CHECK(std::abs(tail - asymptotic_bound(p, c)) <=
            1e-9 * std::max(asymptotic_bound(p, c), 1.0));
    }
  }
}

TEST_CASE("asymptotic bound degenerate forms") {
  BoundParams p = base_params();
  p.beta = 0.0;  // D = 0, a = 0
  p.alpha = 2.0;
  p.lambda0 = 1.0;
  DerivedConstants c = derive_constants(p);
  REQUIRE(c.theta < 1.0);
  CHECK(asymptotic_bound(p, c) ==
        doctest::Approx(double(p.m) * p.gamma * p.gamma / (1.0 - c.theta))
            .epsilon(1e-13));

  // theta >= 1 is rejected
  BoundParams q = base_params();
  q.alpha = 1.0;
  q.beta = 5.0;
  DerivedConstants cq = derive_constants(q);
  REQUIRE(cq.theta >= 1.0);
  CHECK_THROWS_AS(asymptotic_bound(q, cq), NotContracting);
}

TEST_CASE("eigenvalue-floor iteration converges to the fixed point") {
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    BoundParams p;
    p.beta = unit(rng);
    p.epsilon = 0.1;
    p.rho = 0.3 + 0.5 * unit(rng);
    p.h = 0.02;
    p.gamma = 0.2 + unit(rng);
    p.N = 2 + int(rng() % 9);
    p.m = 3;
    p.lambda0 = 0.01 + unit(rng);
    // keep the multiplier e^{-ah} alpha^2 well away from 1 on either side
    const double a = constant_a(p);
    const bool super = trial % 2 == 0;
    const double target = super ? 1.2 + 3.8 * unit(rng) : 0.2 + 0.7 * unit(rng);
    p.alpha = std::sqrt(target * std::exp(a * p.h));
    if (p.alpha < 1.0) continue;  // draw not realizable with alpha >= 1

    double lam = 0.01 + unit(rng);
    for (int i = 0; i < 10000; ++i) lam = eigenvalue_floor_iteration(lam, p);

    const double mult = std::exp(-a * p.h) * p.alpha * p.alpha;
    if (mult > 1.0) {
      const double fixed_point =
          p.gamma * p.gamma / (p.alpha * p.alpha) * (mult - 1.0);
      CHECK(std::abs(lam - fixed_point) <= 1e-10 * std::max(fixed_point, 1.0));
    } else {
      CHECK(lam <= 1e-10);
    }
  }
}

TEST_CASE("asymptotic bound scales as gamma squared") {
  BoundParams p = base_params();
  p.beta = 0.0;  // D = 0 exactly
  p.alpha = 1.5;
  p.lambda0 = 1e6;  // second floor branch active: lambda* proportional to gamma^2

  const double slope =
      gamma_scaling_exponent(p, {1e-1, 1e-2, 1e-3, 1e-4});
  CHECK(slope == doctest::Approx(2.0).epsilon(1e-3));

  const double narrow = gamma_scaling_exponent(p, {0.1, 0.05});
  CHECK(narrow >= 1.8);
  CHECK(narrow <= 2.2);

  // explicit gamma^2 factor in the theta ~ 0 regime (strong inflation)
  BoundParams q = p;
  q.alpha = 1000.0;
  q.lambda0 = 0.2;  // below gamma^2 (1 - alpha^{-2}) for both gammas
  q.gamma = 0.5;
  const DerivedConstants c1 = derive_constants(q);
  REQUIRE(c1.theta < 1e-6);
  const double b1 = asymptotic_bound(q, c1);
  q.gamma = 1.0;
  const DerivedConstants c2 = derive_constants(q);
  const double b2 = asymptotic_bound(q, c2);
  CHECK(b2 / b1 == doctest::Approx(4.0).epsilon(1e-6));
}
