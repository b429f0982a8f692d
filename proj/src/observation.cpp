#include "etkf/observation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "etkf/errors.hpp"

namespace etkf {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(const NoiseStream& s, std::uint64_t step,
                          NoiseChannel channel) {
  std::uint64_t h = splitmix64(s.run_seed);
  h = splitmix64(h ^ s.replicate_id);
  h = splitmix64(h ^ step);
  h = splitmix64(h ^ static_cast<std::uint64_t>(channel));
  return h;
}

double uniform01(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

Eigen::VectorXd standard_normal_draw(const NoiseStream& stream,
                                     std::uint64_t step, NoiseChannel channel,
                                     int d) {
  std::mt19937_64 rng(derive_seed(stream, step, channel));
  Eigen::VectorXd out(d);
  int filled = 0;
  while (filled < d) {
    // Marsaglia polar method
    double u, v, s;
    do {
      u = 2.0 * uniform01(rng) - 1.0;
      v = 2.0 * uniform01(rng) - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    out(filled++) = u * f;
    if (filled < d) out(filled++) = v * f;
  }
  return out;
}

Eigen::VectorXd sample_noise(const NoiseStream& stream, std::uint64_t step,
                             const NoiseCovariance& gamma) {
  const Eigen::VectorXd z = standard_normal_draw(
      stream, step, NoiseChannel::ObservationNoise, gamma.dim());
  if (gamma.is_scaled_identity()) {
    return gamma.gamma() * z;
  }
  return gamma.cholesky_factor() * z;
}

ObservationRecord observe(const StateVector& u, const ObservationOperator& H,
                          const NoiseCovariance& gamma,
                          const NoiseStream& stream, std::uint64_t step) {
  if (u.size() != H.in_dim()) {
    throw DimensionMismatch("observe: state dimension mismatch");
  }
  return ObservationRecord{step, H.apply(u) + sample_noise(stream, step, gamma)};
}

void export_observations_csv(const std::vector<ObservationRecord>& records,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const int d = records.empty() ? 0 : static_cast<int>(records[0].value.size());
  out << "step";
  for (int i = 1; i <= d; ++i) out << ",y_" << i;
  out << "\n";
  char buf[64];
  for (const auto& r : records) {
    out << r.step;
    for (int i = 0; i < r.value.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", r.value(i));
      out << ',' << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace etkf
