#pragma once

#include "pmlda/core.hpp"

#include <Eigen/Core>
#include <vector>

namespace pmlda {

/// Per-pixel superpixel labels in row-major order.
struct SegmentationMap {
  Index rows = 0;
  Index cols = 0;
  std::vector<Index> labels;

  /// Number of distinct labels, assuming they are contiguous from 0.
  Index label_count() const;
};

enum class CovarianceKind { full, diagonal };

/// Gaussian N(mean, cov) fitted to the data, kept in eigen-decomposed form
/// so it can be both sampled and evaluated.
class DataGaussian {
public:
  DataGaussian() = default;
  DataGaussian(Eigen::VectorXd mean, const Eigen::MatrixXd &covariance);

  const Eigen::VectorXd &mean() const noexcept { return mean_; }
  const Eigen::MatrixXd &covariance() const noexcept { return covariance_; }
  Index dimension() const noexcept { return mean_.size(); }

  double log_pdf(const Eigen::Ref<const Eigen::VectorXd> &x) const;
  /// mean + basis * sqrt(eigenvalues) .* standard_normal
  Eigen::VectorXd transform(const Eigen::Ref<const Eigen::VectorXd> &standard_normal) const;

private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd basis_;
  Eigen::VectorXd eigenvalues_;
  double log_det_ = 0.0;
};

struct Corpus {
  Index rows = 0;
  Index cols = 0;
  Eigen::MatrixXd pixels; ///< bands x N, one spectrum per column
  std::vector<std::vector<Index>> documents;
  DataGaussian data;
  /// Half the spread of squared distances to the data mean; upper bound of the
  /// sigma2 proposal.
  double sigma2_upper = 0.0;

  Index bands() const noexcept { return pixels.rows(); }
  Index pixel_count() const noexcept { return pixels.cols(); }
  Index document_count() const noexcept { return static_cast<Index>(documents.size()); }
};

/// Divides each pixel by its L2 norm. Throws on a zero-norm pixel.
HyperspectralCube normalize_pixels(const HyperspectralCube &cube);

/// Row-major blocks of side `block` (the last row/column band may be smaller).
SegmentationMap grid_segmentation(Index rows, Index cols, Index block);

/// Side length giving roughly 9 to 16 documents on the image.
Index default_grid_block(Index rows, Index cols);

Corpus build_corpus(const HyperspectralCube &cube, const SegmentationMap &seg,
                    CovarianceKind covariance = CovarianceKind::full);

/// 0.5 * (max_n |x_n - mean|^2 - min_n |x_n - mean|^2)
double sigma2_proposal_upper(const Eigen::MatrixXd &pixels, const Eigen::VectorXd &mean);

} // namespace pmlda
