#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pmlda {

using Index = Eigen::Index;

inline constexpr double kDefaultMembershipFloor = 1e-12;
inline constexpr double kSimplexTolerance = 1e-9;

/// rows x cols x bands reflectance image. Spectra are stored one pixel per
/// column, pixels in row-major order, which is band-interleaved-by-pixel.
class HyperspectralCube {
public:
  HyperspectralCube() = default;
  HyperspectralCube(Index rows, Index cols, Eigen::MatrixXd spectra);

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  Index bands() const noexcept { return spectra_.rows(); }
  Index pixel_count() const noexcept { return rows_ * cols_; }

  const Eigen::MatrixXd &spectra() const noexcept { return spectra_; }
  auto pixel(Index flat_index) const { return spectra_.col(flat_index); }
  double at(Index row, Index col, Index band) const {
    return spectra_(band, row * cols_ + col);
  }

private:
  Index rows_ = 0;
  Index cols_ = 0;
  Eigen::MatrixXd spectra_;
};

/// Nonnegative weights summing to one. Construction validates.
class Simplex {
public:
  Simplex() = default;
  explicit Simplex(Eigen::VectorXd weights);

  static Simplex uniform(Index k);
  static Simplex one_hot(Index k, Index hot);
  /// Clamps negatives to zero and renormalizes. Throws if nothing positive remains.
  static Simplex project(const Eigen::VectorXd &weights);

  const Eigen::VectorXd &weights() const noexcept { return weights_; }
  Index size() const noexcept { return weights_.size(); }
  double operator[](Index i) const { return weights_[i]; }

  friend bool operator==(const Simplex &a, const Simplex &b) {
    return a.weights_.size() == b.weights_.size() && a.weights_ == b.weights_;
  }

private:
  Eigen::VectorXd weights_;
};

bool is_simplex(const Eigen::Ref<const Eigen::VectorXd> &x,
                double tolerance = kSimplexTolerance);

enum class WordLikelihoodMode { normalized, raw_product };

std::string to_string(WordLikelihoodMode mode);
WordLikelihoodMode parse_word_likelihood_mode(const std::string &text);

struct Hyperparameters {
  double alpha = 5.0;
  double lambda = 1.0;
  Index K = 3;
  Index T = 2000;
  Index burn_in = 1000;
  std::uint64_t seed = 0;
  double membership_floor = kDefaultMembershipFloor;
  WordLikelihoodMode word_likelihood_mode = WordLikelihoodMode::normalized;

  void validate() const;
};

/// K Gaussian topics N(mu_k, sigma2_k I). Means are stored one per column.
struct EndmemberModel {
  Eigen::MatrixXd means;
  double sigma2 = 1e-3;
  std::optional<Eigen::VectorXd> per_topic_sigma2;

  Index topics() const noexcept { return means.cols(); }
  Index bands() const noexcept { return means.rows(); }
  double topic_variance(Index k) const {
    return per_topic_sigma2 ? (*per_topic_sigma2)[k] : sigma2;
  }
  void validate() const;

  friend bool operator==(const EndmemberModel &a, const EndmemberModel &b);
};

struct Document {
  Index id = 0;
  std::vector<Index> pixel_indices;
  Simplex pi;
  double s = 1.0;
  std::vector<Simplex> memberships;

  friend bool operator==(const Document &, const Document &) = default;
};

struct ChainState {
  std::vector<Document> documents;
  EndmemberModel model;
  double log_joint = 0.0;

  friend bool operator==(const ChainState &, const ChainState &) = default;
};

// Densities. All return natural-log values.

double log_dirichlet_pdf(const Eigen::Ref<const Eigen::VectorXd> &x,
                         const Eigen::Ref<const Eigen::VectorXd> &concentration,
                         double floor = kDefaultMembershipFloor);

double log_exponential_pdf(double s, double rate);

/// log N(x | mean, variance * I)
double log_gaussian_isotropic(const Eigen::Ref<const Eigen::VectorXd> &x,
                              const Eigen::Ref<const Eigen::VectorXd> &mean,
                              double variance);

/// Log of the partial-membership word likelihood prod_k N(x | mu_k, s2_k I)^{z_k}.
///
/// raw_product evaluates the product literally, sum_k z_k log N(x | mu_k, s2_k I).
/// normalized renormalizes that product over x, which gives a Gaussian with
/// precision sum_k z_k / s2_k and precision-weighted mean; with a shared
/// variance this is N(x | sum_k z_k mu_k, s2 I).
double log_word_likelihood(const Eigen::Ref<const Eigen::VectorXd> &x,
                           const Eigen::Ref<const Eigen::VectorXd> &z,
                           const EndmemberModel &model, WordLikelihoodMode mode);

/// Mean and variance of the normalized word likelihood.
std::pair<Eigen::VectorXd, double>
word_likelihood_moments(const Eigen::Ref<const Eigen::VectorXd> &z,
                        const EndmemberModel &model);

/// Document-level Dirichlet concentration pi * s, floored so every entry stays positive.
Eigen::VectorXd membership_concentration(const Simplex &pi, double s, double floor);

/// log p(z | pi s) + log p(x | z, beta) for one word.
double log_word_term(const Eigen::Ref<const Eigen::VectorXd> &x, const Simplex &z,
                     const Simplex &pi, double s, const EndmemberModel &model,
                     const Hyperparameters &hp);

/// Joint log density of one document: priors on pi and s plus every word term.
double log_document_joint(const Eigen::MatrixXd &pixels, const Document &doc,
                          const EndmemberModel &model, const Hyperparameters &hp);

/// Full joint log density of a chain state over all documents. `pixels` holds
/// one spectrum per column, indexed by the documents' flat pixel indices.
double log_joint(const Eigen::MatrixXd &pixels, const ChainState &state,
                 const Hyperparameters &hp);

void validate_state(const ChainState &state, Index pixel_count);

} // namespace pmlda
