#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "etkf/observation.hpp"

using namespace etkf;

TEST_CASE("noise scales linearly with gamma") {
  const NoiseStream stream{1, 0};
  const NoiseCovariance tiny = NoiseCovariance::scaled_identity(1e-12, 50);
  const Eigen::VectorXd xi = sample_noise(stream, 3, tiny);
  CHECK(xi.norm() <= 1e-10);

  const NoiseCovariance unit = NoiseCovariance::scaled_identity(1.0, 50);
  const Eigen::VectorXd z = sample_noise(stream, 3, unit);
  CHECK((xi - 1e-12 * z).norm() == 0.0);
}

TEST_CASE("sample mean over many draws is near zero") {
  const NoiseStream stream{77, 0};
  const NoiseCovariance G = NoiseCovariance::scaled_identity(1.0, 3);
  const int n = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < n; ++i) sum += sample_noise(stream, i, G);
  sum /= double(n);
  // 5 sigma CLT band: 5/sqrt(n) ~ 0.016
  for (int k = 0; k < 3; ++k) CHECK(std::abs(sum(k)) <= 0.02);
}

TEST_CASE("sample covariance matches a correlated Gamma") {
  Eigen::MatrixXd Gd(2, 2);
  Gd << 2.0, 1.0, 1.0, 2.0;
  const NoiseCovariance G = NoiseCovariance::matrix(Gd);
  const NoiseStream stream{78, 0};
  const int n = 100000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd xi = sample_noise(stream, i, G);
    acc += xi * xi.transpose();
  }
  acc /= double(n);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) CHECK(std::abs(acc(i, j) - Gd(i, j)) <= 0.05);
  }
}

TEST_CASE("observation is H u plus noise") {
  Eigen::VectorXd u(3);
  u << 1.0, 2.0, -1.0;
  const NoiseStream stream{5, 2};

  const ObservationOperator I3 = ObservationOperator::identity(3);
  const NoiseCovariance tiny = NoiseCovariance::scaled_identity(1e-12, 3);
  const ObservationRecord near_exact = observe(u, I3, tiny, stream, 1);
  CHECK((near_exact.value - u).norm() <= 1e-10);
  CHECK(near_exact.step == 1);

  const ObservationOperator zero =
      ObservationOperator::matrix(Eigen::MatrixXd::Zero(3, 3));
  const NoiseCovariance unit = NoiseCovariance::scaled_identity(1.0, 3);
  const ObservationRecord pure_noise = observe(u, zero, unit, stream, 1);
  CHECK((pure_noise.value - sample_noise(stream, 1, unit)).norm() == 0.0);

  CHECK_THROWS_AS(observe(Eigen::VectorXd::Zero(2), I3, unit, stream, 1),
                  DimensionMismatch);
}

TEST_CASE("identical seed paths replay identical draws") {
  const NoiseStream s{123456789ULL, 7};
  const NoiseCovariance G = NoiseCovariance::scaled_identity(0.5, 6);
  for (std::uint64_t step : {0ULL, 1ULL, 999999ULL}) {
    const Eigen::VectorXd a = sample_noise(s, step, G);
    const Eigen::VectorXd b = sample_noise(s, step, G);
    CHECK((a - b).norm() == 0.0);
  }
  // different components of the path give different draws
  const Eigen::VectorXd base = sample_noise(s, 1, G);
  CHECK((sample_noise(s, 2, G) - base).norm() > 0.0);
  CHECK((sample_noise(NoiseStream{123456789ULL, 8}, 1, G) - base).norm() > 0.0);
  CHECK((sample_noise(NoiseStream{123456790ULL, 7}, 1, G) - base).norm() > 0.0);
  // channels are disjoint too
  CHECK((standard_normal_draw(s, 1, NoiseChannel::EnsembleInit, 6) -
         standard_normal_draw(s, 1, NoiseChannel::ObservationNoise, 6))
            .norm() > 0.0);
}

TEST_CASE("draws at different steps are uncorrelated") {
  const NoiseStream stream{99, 0};
  const NoiseCovariance G = NoiseCovariance::scaled_identity(1.0, 1);
  const int n = 100000;
  double sxy = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_noise(stream, 2 * i, G)(0);
    const double y = sample_noise(stream, 2 * i + 1, G)(0);
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  const double corr = (n * sxy - sx * sy) /
                      std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  CHECK(std::abs(corr) <= 0.02);
}

TEST_CASE("scaled identity and dense matrix paths agree for gamma^2 I") {
  const double g = 0.3;
  const NoiseCovariance fast = NoiseCovariance::scaled_identity(g, 4);
  const NoiseCovariance dense =
      NoiseCovariance::matrix(g * g * Eigen::MatrixXd::Identity(4, 4));
  const NoiseStream stream{314, 1};
  for (std::uint64_t step = 0; step < 20; ++step) {
    const Eigen::VectorXd a = sample_noise(stream, step, fast);
    const Eigen::VectorXd b = sample_noise(stream, step, dense);
    CHECK((a - b).norm() <= 1e-14 * (1.0 + a.norm()));
  }
}

TEST_CASE("observation CSV round-trips through text") {
  const NoiseStream stream{7, 0};
  const NoiseCovariance G = NoiseCovariance::scaled_identity(1.0, 2);
  std::vector<ObservationRecord> records;
  for (std::uint64_t j = 1; j <= 5; ++j) {
    records.push_back(ObservationRecord{j, sample_noise(stream, j, G)});
  }
  const std::string path = "obs_roundtrip_test.csv";
  export_observations_csv(records, path);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "step,y_1,y_2");
  for (const auto& r : records) {
    std::string line;
    REQUIRE(std::getline(in, line));
    std::uint64_t step = 0;
    double y1 = 0, y2 = 0;
    REQUIRE(std::sscanf(line.c_str(), "%zu,%lf,%lf", &step, &y1, &y2) == 3);
    CHECK(step == r.step);
    CHECK(y1 == r.value(0));  // 17 significant digits round-trip exactly
    CHECK(y2 == r.value(1));
  }
  std::remove(path.c_str());
}
