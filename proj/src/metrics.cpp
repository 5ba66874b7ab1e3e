#include "pmlda/metrics.hpp"

#include "pmlda/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace pmlda {

double proportion_entropy(const Eigen::MatrixXd &proportions, double floor) {
  double h = 0.0;
  for (Index n = 0; n < proportions.cols(); ++n) {
    const auto p = proportions.col(n);
    if (!is_simplex(p))
      throw ValidationError("proportion row " + std::to_string(n) + " is not on the simplex");
    for (Index k = 0; k < p.size(); ++k)
      if (p[k] >= floor)
        h -= p[k] * std::log(p[k]);
  }
  return h;
}

double ncm_log_likelihood(const Eigen::MatrixXd &pixels, const Eigen::MatrixXd &endmembers,
                          const Eigen::MatrixXd &proportions, const Eigen::VectorXd &sigma2) {
  const Index m = pixels.rows();
  const Index k = endmembers.cols();
  if (endmembers.rows() != m)
    throw ValidationError("endmember band count differs from the pixels");
  if (proportions.rows() != k || proportions.cols() != pixels.cols())
    throw ValidationError("proportion matrix must be K x N");
  if (sigma2.size() != k)
    throw ValidationError("need one variance per endmember");

  const double log_2pi = std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (Index n = 0; n < pixels.cols(); ++n) {
    const auto p = proportions.col(n);
    const double variance = p.array().square().matrix().dot(sigma2);
    if (!(variance > 0.0))
      throw ValidationError("mixed variance of pixel " + std::to_string(n) + " is zero");
    const double sq = (pixels.col(n) - endmembers * p).squaredNorm();
    total += -0.5 * static_cast<double>(m) * (log_2pi + std::log(variance)) - 0.5 * sq / variance;
  }
  return total;
}

double spectral_angle(const Eigen::Ref<const Eigen::VectorXd> &a,
                      const Eigen::Ref<const Eigen::VectorXd> &b) {
  if (a.size() != b.size())
    throw ValidationError("spectral angle: dimension mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0))
    throw ValidationError("spectral angle of a zero vector");
  // 2 atan2(|u - v|, |u + v|) on unit vectors; acos loses precision near 0 and pi.
  const Eigen::VectorXd u = a / na;
  const Eigen::VectorXd v = b / nb;
  return 2.0 * std::atan2((u - v).norm(), (u + v).norm());
}

std::vector<Index> optimal_assignment(const Eigen::MatrixXd &cost) {
  const Index n = cost.rows();
  if (cost.cols() != n)
    throw ValidationError("assignment needs a square cost matrix");
  if (n == 0)
    return {};

  // Shortest augmenting path with row/column potentials; 1-based with a
  // virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Index> match(n + 1, 0), way(n + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    match[0] = i;
    Index j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const Index i0 = match[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[j])
          continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const Index j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<Index> assignment(n);
  for (Index j = 1; j <= n; ++j)
    assignment[match[j] - 1] = j - 1;
  return assignment;
}

EndmemberMatch match_endmembers(const Eigen::MatrixXd &truth, const Eigen::MatrixXd &estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols())
    throw ValidationError("truth and estimate endmember matrices differ in shape");
  const Index k = truth.cols();
  Eigen::MatrixXd cost(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j)
      cost(i, j) = spectral_angle(truth.col(i), estimate.col(j));

  EndmemberMatch match;
  match.estimate_for_truth = optimal_assignment(cost);
  match.sad.resize(k);
  for (Index i = 0; i < k; ++i)
    match.sad[i] = cost(i, match.estimate_for_truth[i]);
  return match;
}

double proportion_rmse(const Eigen::MatrixXd &truth, const Eigen::MatrixXd &estimate,
                       const EndmemberMatch &match) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols())
    throw ValidationError("proportion matrices differ in shape");
  double sq = 0.0;
  for (Index k = 0; k < truth.rows(); ++k)
    sq += (truth.row(k) - estimate.row(match.estimate_for_truth[k])).squaredNorm();
  return std::sqrt(sq / static_cast<double>(truth.size()));
}

} // namespace pmlda
