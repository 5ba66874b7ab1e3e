#pragma once

#include "pmlda/core.hpp"

#include <Eigen/Core>
#include <vector>

namespace pmlda {

/// -sum_n sum_k p_nk ln p_nk over a K x N proportion matrix. Entries below
/// `floor` contribute nothing.
double proportion_entropy(const Eigen::MatrixXd &proportions,
                          double floor = kDefaultMembershipFloor);

/// sum_n ln N(x_n | sum_k p_nk e_k, (sum_k p_nk^2 sigma2_k) I).
/// pixels: bands x N, endmembers: bands x K, proportions: K x N, sigma2: K.
double ncm_log_likelihood(const Eigen::MatrixXd &pixels, const Eigen::MatrixXd &endmembers,
                          const Eigen::MatrixXd &proportions, const Eigen::VectorXd &sigma2);

/// Angle between two spectra in radians, in [0, pi].
double spectral_angle(const Eigen::Ref<const Eigen::VectorXd> &a,
                      const Eigen::Ref<const Eigen::VectorXd> &b);

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method).
/// Returns assignment[row] = column.
std::vector<Index> optimal_assignment(const Eigen::MatrixXd &cost);

struct EndmemberMatch {
  /// estimate_for_truth[k] is the estimated topic paired with true topic k.
  std::vector<Index> estimate_for_truth;
  Eigen::VectorXd sad; ///< per true topic, radians
};

/// Pairs estimated endmembers with true ones to minimise total spectral angle.
EndmemberMatch match_endmembers(const Eigen::MatrixXd &truth, const Eigen::MatrixXd &estimate);

/// Root-mean-square difference over all entries of two K x N proportion
/// matrices, after reordering the estimate's rows by `match`.
double proportion_rmse(const Eigen::MatrixXd &truth, const Eigen::MatrixXd &estimate,
                       const EndmemberMatch &match);

} // namespace pmlda
