#include "pmlda/init.hpp"

#include "pmlda/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pmlda {

Eigen::MatrixXd orthogonal_projection_endmembers(const Corpus &corpus, Index K) {
  const Eigen::MatrixXd &x = corpus.pixels;
  const Index n_pixels = x.cols();
  if (K < 1)
    throw ValidationError("K must be >= 1");
  if (K > n_pixels)
    throw ValidationError("K exceeds the number of pixels");

  Eigen::MatrixXd seeds(x.rows(), K);
  Eigen::MatrixXd residual = x;
  for (Index j = 0; j < K; ++j) {
    Index best = 0;
    double best_norm = -1.0;
    for (Index n = 0; n < n_pixels; ++n) {
      const double r = residual.col(n).squaredNorm();
      if (r > best_norm) {
        best_norm = r;
        best = n;
      }
    }
    seeds.col(j) = x.col(best);

    const double len = std::sqrt(best_norm);
    if (len > 1e-12 * std::max(1.0, x.col(best).norm())) {
      const Eigen::VectorXd q = residual.col(best) / len;
      residual -= q * (q.transpose() * residual);
    }
  }
  return seeds;
}

ChainState initial_state(const Corpus &corpus, const Hyperparameters &hp,
                         const Eigen::MatrixXd &seeds) {
  hp.validate();
  if (seeds.cols() != hp.K)
    throw ValidationError("expected " + std::to_string(hp.K) + " endmember seeds, got " +
                          std::to_string(seeds.cols()));
  if (seeds.rows() != corpus.bands())
    throw ValidationError("endmember seeds have the wrong number of bands");

  ChainState state;
  state.model.means = seeds;
  state.model.sigma2 = kInitialSigma2;
  state.model.validate();

  const Simplex uniform = Simplex::uniform(hp.K);
  state.documents.reserve(corpus.documents.size());
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    Document doc;
    doc.id = static_cast<Index>(d);
    doc.pixel_indices = corpus.documents[d];
    doc.pi = uniform;
    doc.s = 1.0 / hp.lambda;
    doc.memberships.assign(doc.pixel_indices.size(), uniform);
    state.documents.push_back(std::move(doc));
  }
  state.log_joint = log_joint(corpus.pixels, state, hp);
  return state;
}

} // namespace pmlda
