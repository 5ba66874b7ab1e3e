#include "pmlda/synthgen.hpp"

#include "pmlda/errors.hpp"
#include "pmlda/metrics.hpp"
#include "pmlda/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace pmlda {

std::string to_string(MixingModel model) {
  switch (model) {
  case MixingModel::ncm:
    return "ncm";
  case MixingModel::geometric_mean:
    return "geometric-mean";
  case MixingModel::lmm_noise:
    return "lmm+noise";
  }
  return "unknown";
}

MixingModel parse_mixing_model(const std::string &text) {
  if (text == "ncm")
    return MixingModel::ncm;
  if (text == "geometric-mean" || text == "geometric_mean")
    return MixingModel::geometric_mean;
  if (text == "lmm+noise" || text == "lmm" || text == "lmm_noise")
    return MixingModel::lmm_noise;
  throw ValidationError("unknown mixing model '" + text + "'");
}

void SceneSpec::validate() const {
  if (rows < 1 || cols < 1)
    throw ValidationError("scene needs at least one row and column");
  if (means.rows() < 1 || means.cols() < 1)
    throw ValidationError("scene needs at least one endmember and band");
  if (!means.allFinite())
    throw ValidationError("endmember means must be finite");
  if (!(sigma2 >= 0.0))
    throw ValidationError("sigma2 must be >= 0");
  if (per_topic_sigma2 &&
      (per_topic_sigma2->size() != means.cols() || !(per_topic_sigma2->array() > 0.0).all()))
    throw ValidationError("per-topic sigma2 needs one positive entry per endmember");
  if (!(alpha > 0.0) || !(lambda > 0.0))
    throw ValidationError("alpha and lambda must be > 0");
  if (layout.rows != rows || layout.cols != cols ||
      static_cast<Index>(layout.labels.size()) != rows * cols)
    throw ValidationError("document layout does not match the scene size");
  if (pure_pixels && means.cols() > rows * cols)
    throw ValidationError("more endmembers than pixels; cannot place pure pixels");
}

bool operator==(const TruthRecord &a, const TruthRecord &b) {
  auto same_matrix = [](const Eigen::MatrixXd &x, const Eigen::MatrixXd &y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  const bool same_topic_var =
      a.model.per_topic_sigma2.has_value() == b.model.per_topic_sigma2.has_value() &&
      (!a.model.per_topic_sigma2 ||
       same_matrix(*a.model.per_topic_sigma2, *b.model.per_topic_sigma2));
  return a.rows == b.rows && a.cols == b.cols && a.mixing == b.mixing && a.alpha == b.alpha &&
         a.lambda == b.lambda && a.seed == b.seed && same_matrix(a.model.means, b.model.means) &&
         a.model.sigma2 == b.model.sigma2 && same_topic_var && a.layout.rows == b.layout.rows &&
         a.layout.cols == b.layout.cols && a.layout.labels == b.layout.labels && a.pi == b.pi &&
         a.s == b.s && same_matrix(a.proportions, b.proportions) &&
         a.pure_pixel_index == b.pure_pixel_index;
}

namespace {

double topic_var(const SceneSpec &spec, Index k) {
  return spec.per_topic_sigma2 ? (*spec.per_topic_sigma2)[k] : spec.sigma2;
}

/// Mean and variance of the pixel distribution for membership z.
std::pair<Eigen::VectorXd, double> pixel_moments(const SceneSpec &spec,
                                                 const Eigen::VectorXd &z) {
  switch (spec.mixing) {
  case MixingModel::ncm: {
    double var = 0.0;
    for (Index k = 0; k < z.size(); ++k)
      var += z[k] * z[k] * topic_var(spec, k);
    return {spec.means * z, var};
  }
  case MixingModel::geometric_mean: {
    if (!spec.per_topic_sigma2)
      return {spec.means * z, spec.sigma2};
    double precision = 0.0;
    Eigen::VectorXd weighted = Eigen::VectorXd::Zero(spec.bands());
    for (Index k = 0; k < z.size(); ++k) {
      precision += z[k] / topic_var(spec, k);
      weighted += z[k] / topic_var(spec, k) * spec.means.col(k);
    }
    return {weighted / precision, 1.0 / precision};
  }
  case MixingModel::lmm_noise:
    return {spec.means * z, spec.sigma2};
  }
  return {spec.means * z, spec.sigma2};
}

} // namespace

SyntheticScene generate_scene(const SceneSpec &spec) {
  spec.validate();
  const Index n_pixels = spec.rows * spec.cols;
  const Index K = spec.topics();
  const Index n_docs = spec.layout.label_count();
  Rng rng(mix64(spec.seed));

  TruthRecord truth;
  truth.rows = spec.rows;
  truth.cols = spec.cols;
  truth.mixing = spec.mixing;
  truth.alpha = spec.alpha;
  truth.lambda = spec.lambda;
  truth.seed = spec.seed;
  truth.model.means = spec.means;
  truth.model.sigma2 = spec.sigma2;
  truth.model.per_topic_sigma2 = spec.per_topic_sigma2;
  truth.layout = spec.layout;
  truth.proportions.resize(K, n_pixels);

  std::exponential_distribution<double> exponential(spec.lambda);
  for (Index d = 0; d < n_docs; ++d) {
    truth.pi.push_back(
        Simplex::project(sample_dirichlet(rng, Eigen::VectorXd::Constant(K, spec.alpha))));
    truth.s.push_back(std::max(exponential(rng), kDefaultMembershipFloor));
  }
  for (Index n = 0; n < n_pixels; ++n) {
    const auto d = static_cast<std::size_t>(spec.layout.labels[static_cast<std::size_t>(n)]);
    const Eigen::VectorXd conc = membership_concentration(truth.pi[d], truth.s[d],
                                                          kDefaultMembershipFloor);
    truth.proportions.col(n) = sample_dirichlet(rng, conc);
  }
  if (spec.pure_pixels) {
    for (Index k = 0; k < K; ++k) {
      const Index n = static_cast<Index>((static_cast<double>(k) + 0.5) *
                                         static_cast<double>(n_pixels) / static_cast<double>(K));
      truth.proportions.col(n) = Simplex::one_hot(K, k).weights();
      truth.pure_pixel_index.push_back(n);
    }
  }

  Eigen::MatrixXd spectra(spec.bands(), n_pixels);
  for (Index n = 0; n < n_pixels; ++n) {
    const Eigen::VectorXd z = truth.proportions.col(n);
    const auto [mean, variance] = pixel_moments(spec, z);
    const Eigen::VectorXd noise = sample_standard_normal(rng, spec.bands());
    spectra.col(n) = mean + std::sqrt(variance) * noise;
  }

  return {HyperspectralCube(spec.rows, spec.cols, std::move(spectra)), std::move(truth)};
}

ChainState truth_state(const TruthRecord &truth) {
  ChainState state;
  state.model = truth.model;
  const Index n_docs = truth.layout.label_count();
  state.documents.resize(static_cast<std::size_t>(n_docs));
  for (Index d = 0; d < n_docs; ++d) {
    auto &doc = state.documents[static_cast<std::size_t>(d)];
    doc.id = d;
    doc.pi = truth.pi[static_cast<std::size_t>(d)];
    doc.s = truth.s[static_cast<std::size_t>(d)];
  }
  for (Index n = 0; n < static_cast<Index>(truth.layout.labels.size()); ++n) {
    auto &doc = state.documents[static_cast<std::size_t>(truth.layout.labels[static_cast<std::size_t>(n)])];
    doc.pixel_indices.push_back(n);
    doc.memberships.push_back(Simplex::project(truth.proportions.col(n)));
  }
  return state;
}

Eigen::MatrixXd random_endmembers(Index bands, Index count, double min_angle, std::uint64_t seed) {
  if (bands < 1 || count < 1)
    throw ValidationError("need at least one band and one endmember");
  Rng rng(mix64(seed ^ 0x5eedULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double span = static_cast<double>(bands);

  Eigen::MatrixXd out(bands, count);
  Index accepted = 0;
  for (int attempt = 0; attempt < 100000 && accepted < count; ++attempt) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(bands, 0.1 + 0.4 * unit(rng));
    for (int bump = 0; bump < 3; ++bump) {
      const double amplitude = -0.3 + 0.8 * unit(rng);
      const double centre = span * unit(rng);
      const double width = 2.0 + 0.5 * span * unit(rng);
      for (Index b = 0; b < bands; ++b) {
        const double t = (static_cast<double>(b) - centre) / width;
        v[b] += amplitude * std::exp(-0.5 * t * t);
      }
    }
    v = v.cwiseMax(0.05).cwiseMin(0.95);
    bool far_enough = true;
    for (Index j = 0; j < accepted && far_enough; ++j)
      far_enough = spectral_angle(v, out.col(j)) >= min_angle;
    if (far_enough)
      out.col(accepted++) = v;
  }
  if (accepted < count)
    throw ValidationError("could not draw endmembers with the requested angular separation");
  return out;
}

} // namespace pmlda
