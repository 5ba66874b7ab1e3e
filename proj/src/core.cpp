#include "pmlda/core.hpp"

#include "pmlda/errors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace pmlda {

HyperspectralCube::HyperspectralCube(Index rows, Index cols, Eigen::MatrixXd spectra)
    : rows_(rows), cols_(cols), spectra_(std::move(spectra)) {
  if (rows < 1 || cols < 1)
    throw ValidationError("cube must have at least one row and one column");
  if (spectra_.rows() < 1)
    throw ValidationError("cube must have at least one band");
  if (spectra_.cols() != rows * cols) {
    std::ostringstream msg;
    msg << "cube holds " << spectra_.cols() << " pixels but rows*cols = " << rows * cols;
    throw ValidationError(msg.str());
  }
  if (!spectra_.allFinite())
    throw ValidationError("cube contains non-finite values");
}

bool is_simplex(const Eigen::Ref<const Eigen::VectorXd> &x, double tolerance) {
  if (x.size() == 0)
    return false;
  if ((x.array() < 0.0).any() || !x.allFinite())
    return false;
  return std::abs(x.sum() - 1.0) <= tolerance;
}

Simplex::Simplex(Eigen::VectorXd weights) : weights_(std::move(weights)) {
  if (!is_simplex(weights_)) {
    std::ostringstream msg;
    msg << "not a simplex: sum=" << weights_.sum() << " min="
        << (weights_.size() ? weights_.minCoeff() : 0.0);
    throw ValidationError(msg.str());
  }
}

Simplex Simplex::uniform(Index k) {
  if (k < 1)
    throw ValidationError("simplex dimension must be >= 1");
  return Simplex(Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k)));
}

Simplex Simplex::one_hot(Index k, Index hot) {
  if (hot < 0 || hot >= k)
    throw ValidationError("one-hot index out of range");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
  w[hot] = 1.0;
  return Simplex(std::move(w));
}

Simplex Simplex::project(const Eigen::VectorXd &weights) {
  Eigen::VectorXd w = weights.cwiseMax(0.0);
  const double total = w.sum();
  if (!(total > 0.0) || !std::isfinite(total))
    throw ValidationError("cannot project onto simplex: no positive mass");
  w /= total;
  return Simplex(std::move(w));
}

std::string to_string(WordLikelihoodMode mode) {
  return mode == WordLikelihoodMode::normalized ? "normalized" : "raw-product";
}

WordLikelihoodMode parse_word_likelihood_mode(const std::string &text) {
  if (text == "normalized")
    return WordLikelihoodMode::normalized;
  if (text == "raw-product" || text == "raw_product")
    return WordLikelihoodMode::raw_product;
  throw ValidationError("unknown word likelihood mode '" + text + "'");
}

void Hyperparameters::validate() const {
  if (!(alpha > 0.0))
    throw ValidationError("alpha must be > 0");
  if (!(lambda > 0.0))
    throw ValidationError("lambda must be > 0");
  if (K < 1)
    throw ValidationError("K must be >= 1");
  if (T < 1)
    throw ValidationError("T must be >= 1");
  if (burn_in < 0 || burn_in >= T)
    throw ValidationError("burn-in must satisfy 0 <= burn_in < T");
  if (!(membership_floor > 0.0) || membership_floor >= 1.0)
    throw ValidationError("membership floor must be in (0, 1)");
}

void EndmemberModel::validate() const {
  if (means.cols() < 1 || means.rows() < 1)
    throw ValidationError("endmember model needs at least one topic and one band");
  if (!means.allFinite())
    throw ValidationError("endmember means must be finite");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw ValidationError("sigma2 must be positive and finite");
  if (per_topic_sigma2) {
    if (per_topic_sigma2->size() != means.cols())
      throw ValidationError("per-topic sigma2 must have one entry per topic");
    if (!(per_topic_sigma2->array() > 0.0).all() || !per_topic_sigma2->allFinite())
      throw ValidationError("per-topic sigma2 entries must be positive and finite");
  }
}

bool operator==(const EndmemberModel &a, const EndmemberModel &b) {
  if (a.means.rows() != b.means.rows() || a.means.cols() != b.means.cols())
    return false;
  if (a.sigma2 != b.sigma2 || a.means != b.means)
    return false;
  if (a.per_topic_sigma2.has_value() != b.per_topic_sigma2.has_value())
    return false;
  if (!a.per_topic_sigma2)
    return true;
  return a.per_topic_sigma2->size() == b.per_topic_sigma2->size() &&
         *a.per_topic_sigma2 == *b.per_topic_sigma2;
}

double log_dirichlet_pdf(const Eigen::Ref<const Eigen::VectorXd> &x,
                         const Eigen::Ref<const Eigen::VectorXd> &concentration,
                         double floor) {
  if (x.size() != concentration.size())
    throw ValidationError("dirichlet: dimension mismatch");
  if (x.size() == 0)
    throw ValidationError("dirichlet: empty argument");
  if (!(concentration.array() > 0.0).all())
    throw ValidationError("dirichlet: concentration entries must be > 0");
  if (!is_simplex(x))
    throw ValidationError("dirichlet: argument is not on the simplex");
  // A single-component Dirichlet is a point mass; density 1 by convention.
  if (x.size() == 1)
    return 0.0;

  double total = 0.0;
  double result = 0.0;
  for (Index k = 0; k < x.size(); ++k) {
    const double a = concentration[k];
    total += a;
    result += (a - 1.0) * std::log(std::max(x[k], floor)) - std::lgamma(a);
  }
  return result + std::lgamma(total);
}

double log_exponential_pdf(double s, double rate) {
  if (!(rate > 0.0))
    throw ValidationError("exponential: rate must be > 0");
  if (!(s > 0.0))
    throw ValidationError("exponential: argument must be > 0");
  return std::log(rate) - rate * s;
}

double log_gaussian_isotropic(const Eigen::Ref<const Eigen::VectorXd> &x,
                              const Eigen::Ref<const Eigen::VectorXd> &mean,
                              double variance) {
  if (x.size() != mean.size())
    throw ValidationError("gaussian: dimension mismatch");
  if (!(variance > 0.0))
    throw ValidationError("gaussian: variance must be > 0");
  const double m = static_cast<double>(x.size());
  const double sq = (x - mean).squaredNorm();
  return -0.5 * m * std::log(2.0 * std::numbers::pi * variance) - 0.5 * sq / variance;
}

std::pair<Eigen::VectorXd, double>
word_likelihood_moments(const Eigen::Ref<const Eigen::VectorXd> &z,
                        const EndmemberModel &model) {
  if (z.size() != model.topics())
    throw ValidationError("membership length does not match topic count");
  if (!model.per_topic_sigma2)
    return {model.means * z, model.sigma2};

  double precision = 0.0;
  Eigen::VectorXd weighted = Eigen::VectorXd::Zero(model.bands());
  for (Index k = 0; k < z.size(); ++k) {
    const double w = z[k] / model.topic_variance(k);
    precision += w;
    weighted += w * model.means.col(k);
  }
  return {weighted / precision, 1.0 / precision};
}

double log_word_likelihood(const Eigen::Ref<const Eigen::VectorXd> &x,
                           const Eigen::Ref<const Eigen::VectorXd> &z,
                           const EndmemberModel &model, WordLikelihoodMode mode) {
  if (z.size() != model.topics())
    throw ValidationError("membership length does not match topic count");
  if (x.size() != model.bands())
    throw ValidationError("pixel length does not match endmember band count");

  if (mode == WordLikelihoodMode::raw_product) {
    double total = 0.0;
    for (Index k = 0; k < z.size(); ++k) {
      if (z[k] == 0.0)
        continue;
      total += z[k] * log_gaussian_isotropic(x, model.means.col(k), model.topic_variance(k));
    }
    return total;
  }
  const auto [mean, variance] = word_likelihood_moments(z, model);
  return log_gaussian_isotropic(x, mean, variance);
}

Eigen::VectorXd membership_concentration(const Simplex &pi, double s, double floor) {
  return pi.weights().cwiseMax(floor) * s;
}

double log_word_term(const Eigen::Ref<const Eigen::VectorXd> &x, const Simplex &z,
                     const Simplex &pi, double s, const EndmemberModel &model,
                     const Hyperparameters &hp) {
  const Eigen::VectorXd conc = membership_concentration(pi, s, hp.membership_floor);
  return log_dirichlet_pdf(z.weights(), conc, hp.membership_floor) +
         log_word_likelihood(x, z.weights(), model, hp.word_likelihood_mode);
}

double log_document_joint(const Eigen::MatrixXd &pixels, const Document &doc,
                          const EndmemberModel &model, const Hyperparameters &hp) {
  const Index k = model.topics();
  if (doc.pi.size() != k)
    throw ValidationError("document topic proportions have wrong length");
  if (doc.memberships.size() != doc.pixel_indices.size())
    throw ValidationError("document needs one membership vector per pixel");

  double total = log_dirichlet_pdf(doc.pi.weights(), Eigen::VectorXd::Constant(k, hp.alpha),
                                   hp.membership_floor) +
                 log_exponential_pdf(doc.s, hp.lambda);
  const Eigen::VectorXd conc = membership_concentration(doc.pi, doc.s, hp.membership_floor);
  for (std::size_t n = 0; n < doc.pixel_indices.size(); ++n) {
    const auto &z = doc.memberships[n].weights();
    total += log_dirichlet_pdf(z, conc, hp.membership_floor) +
             log_word_likelihood(pixels.col(doc.pixel_indices[n]), z, model,
                                 hp.word_likelihood_mode);
  }
  return total;
}

double log_joint(const Eigen::MatrixXd &pixels, const ChainState &state,
                 const Hyperparameters &hp) {
  double total = 0.0;
  for (const auto &doc : state.documents)
    total += log_document_joint(pixels, doc, state.model, hp);
  return total;
}

void validate_state(const ChainState &state, Index pixel_count) {
  state.model.validate();
  std::vector<char> seen(static_cast<std::size_t>(pixel_count), 0);
  for (const auto &doc : state.documents) {
    if (doc.pixel_indices.empty())
      throw ValidationError("document " + std::to_string(doc.id) + " has no pixels");
    if (!(doc.s > 0.0))
      throw ValidationError("document mixing level must be > 0");
    if (doc.pi.size() != state.model.topics())
      throw ValidationError("document topic proportions have wrong length");
    if (doc.memberships.size() != doc.pixel_indices.size())
      throw ValidationError("document needs one membership vector per pixel");
    for (Index n : doc.pixel_indices) {
      if (n < 0 || n >= pixel_count)
        throw ValidationError("document pixel index out of range");
      if (seen[static_cast<std::size_t>(n)]++)
        throw ValidationError("pixel " + std::to_string(n) + " belongs to two documents");
    }
    for (const auto &z : doc.memberships)
      if (z.size() != state.model.topics())
        throw ValidationError("membership vector has wrong length");
  }
}

} // namespace pmlda
