#pragma once

#include <Eigen/Dense>

#include "etkf/errors.hpp"

namespace etkf {

using StateVector = Eigen::VectorXd;

/// An ordered collection of N state vectors of dimension m, stored as the
/// columns of an m x N matrix. N >= 2 is enforced at construction because
/// the unbiased covariance divisor (N-1) is undefined for a single member.
class Ensemble {
 public:
  explicit Ensemble(Eigen::MatrixXd members);

  int dim() const { return static_cast<int>(members_.rows()); }
  int size() const { return static_cast<int>(members_.cols()); }

  const Eigen::MatrixXd& data() const { return members_; }
  Eigen::VectorXd member(int n) const { return members_.col(n); }

  /// (1/N) sum of the members.
  StateVector mean() const;

  /// Member-wise subtraction of the mean. The deviation columns sum to zero
  /// and mean()*1 + deviations reconstructs the ensemble exactly.
  Ensemble deviations() const;

  /// Unbiased ensemble covariance (1/(N-1)) dV dV^T as a dense m x m matrix.
  Eigen::MatrixXd covariance() const;

  /// Ensemble l2-norm ((1/N) sum |v_n|^2)^(1/2).
  double l2_norm() const;

  /// Right multiplication by an N x N matrix: output member n is
  /// sum_k v_k T(k,n).
  Ensemble apply_matrix(const Eigen::MatrixXd& T) const;

 private:
  Eigen::MatrixXd members_;  // m x N, column n = member n
};

/// N x N matrix of pairwise inner products <u_i, v_j>.
Eigen::MatrixXd gram(const Ensemble& U, const Ensemble& V);

}  // namespace etkf
