#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "etkf/analysis.hpp"
#include "etkf/ensemble.hpp"

namespace etkf {

/// Counter-based derivation of per-(replicate, step) noise. Identical
/// (run_seed, replicate_id, step, channel) tuples always reproduce the
/// identical draw, independent of call order, so replicates can run in
/// parallel without shared stream state.
///
/// Sampling method (fixed for replay stability): the seed path is hashed
/// with splitmix64 into a fresh mt19937_64, uniforms are taken as
/// (x >> 11) * 2^-53, and standard normals come from the Marsaglia polar
/// method. All three pieces are fully specified, so replays are
/// platform-independent.
struct NoiseStream {
  std::uint64_t run_seed = 0;
  std::uint64_t replicate_id = 0;
};

/// Channels separate the independent random inputs of one replicate.
enum class NoiseChannel : std::uint64_t {
  ObservationNoise = 1,
  EnsembleInit = 2,
};

/// d i.i.d. standard normal variates for the given seed path.
Eigen::VectorXd standard_normal_draw(const NoiseStream& stream,
                                     std::uint64_t step, NoiseChannel channel,
                                     int d);

/// Gaussian draw with covariance Gamma, deterministic given the seed path.
Eigen::VectorXd sample_noise(const NoiseStream& stream, std::uint64_t step,
                             const NoiseCovariance& gamma);

struct ObservationRecord {
  std::uint64_t step = 0;
  Eigen::VectorXd value;
};

/// y = H u + xi with xi drawn from the (stream, step) path.
ObservationRecord observe(const StateVector& u, const ObservationOperator& H,
                          const NoiseCovariance& gamma,
                          const NoiseStream& stream, std::uint64_t step);

/// CSV export, columns step,y_1..y_d at 17 significant digits.
void export_observations_csv(const std::vector<ObservationRecord>& records,
                             const std::string& path);

}  // namespace etkf
