#include "etkf/ensemble.hpp"

#include <cmath>

namespace etkf {

Ensemble::Ensemble(Eigen::MatrixXd members) : members_(std::move(members)) {
  if (members_.cols() < 2) {
    throw SizeError("ensemble needs at least 2 members, got " +
                    std::to_string(members_.cols()));
  }
  if (members_.rows() < 1) {
    throw SizeError("ensemble members must have dimension >= 1");
  }
  if (!members_.allFinite()) {
    throw NonFiniteState("ensemble contains NaN/Inf entries");
  }
}

StateVector Ensemble::mean() const { return members_.rowwise().mean(); }

Ensemble Ensemble::deviations() const {
  return Ensemble(members_.colwise() - mean());
}

Eigen::MatrixXd Ensemble::covariance() const {
  const Eigen::MatrixXd dv = members_.colwise() - mean();
  Eigen::MatrixXd c = (dv * dv.transpose()) / double(size() - 1);
  // symmetrize away rounding in the rank-1 accumulation
  return 0.5 * (c + c.transpose());
}

double Ensemble::l2_norm() const {
  return std::sqrt(members_.squaredNorm() / double(size()));
}

Ensemble Ensemble::apply_matrix(const Eigen::MatrixXd& T) const {
  if (T.rows() != size() || T.cols() != size()) {
    throw DimensionMismatch("apply_matrix: T must be N x N with N = " +
                            std::to_string(size()));
  }
  return Ensemble(members_ * T);
}

Eigen::MatrixXd gram(const Ensemble& U, const Ensemble& V) {
  if (U.dim() != V.dim()) {
    throw DimensionMismatch("gram: ensembles have different state dimensions");
  }
  if (U.size() != V.size()) {
    throw DimensionMismatch("gram: ensembles have different sizes");
  }
  return U.data().transpose() * V.data();
}

}  // namespace etkf
