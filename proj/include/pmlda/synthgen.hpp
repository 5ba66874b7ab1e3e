#pragma once

#include "pmlda/core.hpp"
#include "pmlda/corpus.hpp"

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pmlda {

/// How a pixel is drawn from its membership vector z.
enum class MixingModel {
  ncm,            ///< x ~ N(sum z_k mu_k, sum z_k^2 sigma2_k I)
  geometric_mean, ///< x ~ normalized prod_k N(x | mu_k, sigma2_k I)^{z_k}
  lmm_noise,      ///< x = sum z_k mu_k + eps, eps ~ N(0, sigma2 I)
};

std::string to_string(MixingModel model);
MixingModel parse_mixing_model(const std::string &text);

struct SceneSpec {
  Index rows = 40;
  Index cols = 40;
  Eigen::MatrixXd means; ///< bands x K
  double sigma2 = 1e-4;
  std::optional<Eigen::VectorXd> per_topic_sigma2;
  SegmentationMap layout;
  double alpha = 5.0;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  MixingModel mixing = MixingModel::geometric_mean;
  /// Force one pixel per topic to a one-hot membership.
  bool pure_pixels = false;

  Index bands() const noexcept { return means.rows(); }
  Index topics() const noexcept { return means.cols(); }
  void validate() const;
};

/// Every latent variable behind a generated scene.
struct TruthRecord {
  Index rows = 0;
  Index cols = 0;
  MixingModel mixing = MixingModel::geometric_mean;
  double alpha = 5.0;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  EndmemberModel model;
  SegmentationMap layout;
  std::vector<Simplex> pi;             ///< per document
  std::vector<double> s;               ///< per document
  Eigen::MatrixXd proportions;         ///< K x N, flat pixel order
  std::vector<Index> pure_pixel_index; ///< per topic, empty if none forced

  friend bool operator==(const TruthRecord &a, const TruthRecord &b);
};

struct SyntheticScene {
  HyperspectralCube cube;
  TruthRecord truth;
};

SyntheticScene generate_scene(const SceneSpec &spec);

/// Chain state holding the true latent variables of a scene.
ChainState truth_state(const TruthRecord &truth);

/// `count` random smooth spectra in (0.05, 0.95) with every pairwise spectral
/// angle at least `min_angle` radians. Rejection-samples; throws after many
/// failed attempts.
Eigen::MatrixXd random_endmembers(Index bands, Index count, double min_angle, std::uint64_t seed);

} // namespace pmlda
