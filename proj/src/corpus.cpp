#include "pmlda/corpus.hpp"

#include "pmlda/errors.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace pmlda {

Index SegmentationMap::label_count() const {
  if (labels.empty())
    return 0;
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

DataGaussian::DataGaussian(Eigen::VectorXd mean, const Eigen::MatrixXd &covariance)
    : mean_(std::move(mean)), covariance_(covariance) {
  const Index m = mean_.size();
  if (covariance.rows() != m || covariance.cols() != m)
    throw ValidationError("data covariance has wrong shape");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);
  if (solver.info() != Eigen::Success)
    throw ValidationError("data covariance eigendecomposition failed");
  const Eigen::VectorXd values = solver.eigenvalues();
  const double largest = std::max(values.maxCoeff(), 0.0);
  if (values.minCoeff() < -1e-9 * largest || !values.allFinite())
    throw ValidationError("data covariance is not positive semi-definite");

  // Rank-deficient directions (or a single-pixel corpus) get a small positive
  // variance so the proposal density stays finite everywhere.
  const double floor = largest > 0.0 ? 1e-10 * largest : 1e-12;
  eigenvalues_ = values.cwiseMax(floor);
  basis_ = solver.eigenvectors();
  log_det_ = eigenvalues_.array().log().sum();
}

double DataGaussian::log_pdf(const Eigen::Ref<const Eigen::VectorXd> &x) const {
  if (x.size() != mean_.size())
    throw ValidationError("data gaussian: dimension mismatch");
  const Eigen::VectorXd rotated = basis_.transpose() * (x - mean_);
  const double maha = (rotated.array().square() / eigenvalues_.array()).sum();
  const double m = static_cast<double>(mean_.size());
  return -0.5 * (m * std::log(2.0 * std::numbers::pi) + log_det_ + maha);
}

Eigen::VectorXd
DataGaussian::transform(const Eigen::Ref<const Eigen::VectorXd> &standard_normal) const {
  return mean_ + basis_ * (eigenvalues_.array().sqrt() * standard_normal.array()).matrix();
}

HyperspectralCube normalize_pixels(const HyperspectralCube &cube) {
  Eigen::MatrixXd spectra = cube.spectra();
  for (Index n = 0; n < spectra.cols(); ++n) {
    const double norm = spectra.col(n).norm();
    if (!(norm > 0.0))
      throw ValidationError("pixel " + std::to_string(n) + " has zero norm");
    spectra.col(n) /= norm;
  }
  return HyperspectralCube(cube.rows(), cube.cols(), std::move(spectra));
}

SegmentationMap grid_segmentation(Index rows, Index cols, Index block) {
  if (block < 1)
    throw ValidationError("grid block must be >= 1");
  const Index blocks_across = (cols + block - 1) / block;
  SegmentationMap seg{rows, cols, std::vector<Index>(static_cast<std::size_t>(rows * cols))};
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      seg.labels[static_cast<std::size_t>(r * cols + c)] = (r / block) * blocks_across + c / block;
  return seg;
}

Index default_grid_block(Index rows, Index cols) {
  // A quarter of the longer side gives a 4x4 grid (16 documents) when the
  // side divides evenly and 9 to 16 otherwise.
  const Index side = std::max(rows, cols);
  return std::max<Index>(1, (side + 3) / 4);
}

double sigma2_proposal_upper(const Eigen::MatrixXd &pixels, const Eigen::VectorXd &mean) {
  const Eigen::VectorXd d2 = (pixels.colwise() - mean).colwise().squaredNorm().transpose();
  return 0.5 * (d2.maxCoeff() - d2.minCoeff());
}

Corpus build_corpus(const HyperspectralCube &cube, const SegmentationMap &seg,
                    CovarianceKind covariance) {
  if (seg.rows != cube.rows() || seg.cols != cube.cols())
    throw ValidationError("segmentation dimensions do not match the cube");
  if (static_cast<Index>(seg.labels.size()) != cube.pixel_count())
    throw ValidationError("segmentation label count does not match the cube");

  const Index label_count = seg.label_count();
  Corpus corpus;
  corpus.rows = cube.rows();
  corpus.cols = cube.cols();
  corpus.pixels = cube.spectra();
  corpus.documents.resize(static_cast<std::size_t>(label_count));
  for (Index n = 0; n < cube.pixel_count(); ++n) {
    const Index label = seg.labels[static_cast<std::size_t>(n)];
    if (label < 0)
      throw ValidationError("segmentation labels must be non-negative");
    corpus.documents[static_cast<std::size_t>(label)].push_back(n);
  }
  for (Index d = 0; d < label_count; ++d)
    if (corpus.documents[static_cast<std::size_t>(d)].empty())
      throw ValidationError("segmentation label " + std::to_string(d) +
                            " is unused; labels must be contiguous from 0");

  const Eigen::MatrixXd &x = corpus.pixels;
  const Eigen::VectorXd mean = x.rowwise().mean();
  const Eigen::MatrixXd centered = x.colwise() - mean;
  const double denom = std::max<double>(1.0, static_cast<double>(x.cols() - 1));
  Eigen::MatrixXd cov;
  if (covariance == CovarianceKind::full) {
    cov = centered * centered.transpose() / denom;
  } else {
    cov = (centered.rowwise().squaredNorm() / denom).asDiagonal();
  }
  corpus.data = DataGaussian(mean, cov);
  corpus.sigma2_upper = sigma2_proposal_upper(x, mean);
  return corpus;
}

} // namespace pmlda
