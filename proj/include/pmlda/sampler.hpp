#pragma once

#include "pmlda/core.hpp"
#include "pmlda/corpus.hpp"
#include "pmlda/rng.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace pmlda {

struct ChainConfig {
  Hyperparameters hp;
  Index record_every = 10;
  /// Worker threads for the per-document updates. Results do not depend on it.
  int threads = 1;
  /// One sigma2 per topic instead of the shared isotropic variance.
  bool per_topic_sigma2 = false;

  // Individual update types can be frozen, e.g. to sample the document-level
  // posterior with fixed endmembers.
  bool update_pi = true;
  bool update_s = true;
  bool update_z = true;
  bool update_mu = true;
  bool update_sigma2 = true;

  void validate() const;
};

enum class UpdateKind : std::size_t { pi = 0, s, z, mu, sigma2 };
inline constexpr std::size_t kUpdateKinds = 5;

struct AcceptanceCounts {
  std::array<std::uint64_t, kUpdateKinds> accepted{};
  std::array<std::uint64_t, kUpdateKinds> proposed{};

  void record(UpdateKind kind, bool was_accepted) {
    const auto i = static_cast<std::size_t>(kind);
    ++proposed[i];
    accepted[i] += was_accepted ? 1 : 0;
  }
  AcceptanceCounts &operator+=(const AcceptanceCounts &other);
  /// Fraction accepted; 0 when nothing was proposed.
  double rate(UpdateKind kind) const;
};

struct StepOutcome {
  bool accepted = false;
  double log_ratio = 0.0;

  double acceptance_probability() const;
};

/// Source of Metropolis-Hastings candidates. The default implementation draws
/// from the proposal distributions of the sampler; tests substitute their own.
class Proposer {
public:
  virtual ~Proposer() = default;

  /// pi ~ Dir(alpha 1_K)
  virtual Simplex propose_pi(const Document &doc, const Hyperparameters &hp, Rng &rng) const;
  /// s ~ Exp(lambda)
  virtual double propose_s(const Document &doc, const Hyperparameters &hp, Rng &rng) const;
  /// z ~ Dir(1_K)
  virtual Simplex propose_z(const Document &doc, std::size_t local_index, Rng &rng) const;
  /// mu_k ~ N(mu_D, Sigma_D)
  virtual Eigen::VectorXd propose_mu(Index k, const EndmemberModel &model,
                                     const DataGaussian &data, Rng &rng) const;
  /// sigma2 ~ U(0, upper); `topic` is set in per-topic mode.
  virtual double propose_sigma2(std::optional<Index> topic, const EndmemberModel &model,
                                double upper, Rng &rng) const;
};

/// Proposes the current value for every update. Every step then accepts with
/// probability one and leaves the state unchanged.
class CurrentStateProposer : public Proposer {
public:
  Simplex propose_pi(const Document &doc, const Hyperparameters &, Rng &) const override {
    return doc.pi;
  }
  double propose_s(const Document &doc, const Hyperparameters &, Rng &) const override {
    return doc.s;
  }
  Simplex propose_z(const Document &doc, std::size_t n, Rng &) const override {
    return doc.memberships[n];
  }
  Eigen::VectorXd propose_mu(Index k, const EndmemberModel &model, const DataGaussian &,
                             Rng &) const override {
    return model.means.col(k);
  }
  double propose_sigma2(std::optional<Index> topic, const EndmemberModel &model, double,
                        Rng &) const override {
    return topic ? model.topic_variance(*topic) : model.sigma2;
  }
};

const Proposer &default_proposer();

// Log Metropolis-Hastings ratios, restricted to the terms a given update
// touches. Prior and uniform proposal densities cancel analytically for pi, s
// and z; the independence proposal for mu keeps its correction factor.

double log_accept_ratio_pi(const Document &doc, const Simplex &candidate,
                           const Hyperparameters &hp);
double log_accept_ratio_s(const Document &doc, double candidate, const Hyperparameters &hp);
double log_accept_ratio_z(const Eigen::MatrixXd &pixels, const Document &doc, std::size_t n,
                          const Simplex &candidate, const EndmemberModel &model,
                          const Hyperparameters &hp);
double log_accept_ratio_mu(const Corpus &corpus, const ChainState &state, Index k,
                           const Eigen::Ref<const Eigen::VectorXd> &candidate,
                           const Hyperparameters &hp);
double log_accept_ratio_sigma2(const Corpus &corpus, const ChainState &state, double candidate,
                               std::optional<Index> topic, const Hyperparameters &hp);

/// Accepts when log(u) < log_ratio for u ~ U(0,1). One uniform is always drawn.
bool metropolis_accept(double log_ratio, Rng &rng);

StepOutcome step_pi(Document &doc, const Hyperparameters &hp, const Proposer &proposer,
                    Rng &rng);
StepOutcome step_s(Document &doc, const Hyperparameters &hp, const Proposer &proposer, Rng &rng);
StepOutcome step_z(const Eigen::MatrixXd &pixels, Document &doc, std::size_t n,
                   const EndmemberModel &model, const Hyperparameters &hp,
                   const Proposer &proposer, Rng &rng);
StepOutcome step_mu(const Corpus &corpus, ChainState &state, Index k, const Hyperparameters &hp,
                    const Proposer &proposer, Rng &rng);
/// Shared-variance update when `topic` is empty, else the variance of one topic.
StepOutcome step_sigma2(const Corpus &corpus, ChainState &state, const Hyperparameters &hp,
                        const Proposer &proposer, Rng &rng,
                        std::optional<Index> topic = std::nullopt);

struct RecordedState {
  Index iteration = 0;
  ChainState state;
};

struct IterationStats {
  Index iteration = 0;
  double log_joint = 0.0;
  double best_log_joint = 0.0; ///< running maximum up to this iteration
  AcceptanceCounts counts;
};

struct ChainTrace {
  std::vector<RecordedState> samples;   ///< every record_every-th iteration
  std::vector<IterationStats> iterations; ///< one per iteration, 1-based
  AcceptanceCounts totals;
  ChainState best_state; ///< argmax of log_joint over all iterations
  Index best_iteration = 0;
};

/// Runs T sweeps. Each sweep updates, per document, pi, s and every z in turn,
/// then each mu_k in topic order, then sigma2. The random streams are keyed by
/// (seed, iteration, document or global update), so the trace is identical for
/// any thread count.
ChainTrace run_chain(const Corpus &corpus, const ChainConfig &config, const ChainState &init,
                     const Proposer &proposer = default_proposer());

enum class Estimator { posterior_mean, map };

std::string to_string(Estimator estimator);
Estimator parse_estimator(const std::string &text);

struct UnmixResult {
  /// Element-wise average of the post-burn-in samples, simplices re-projected.
  /// Its log_joint is left NaN; it is not a sampled state.
  ChainState posterior_mean;
  ChainState map;
  Index samples_used = 0;
  Index pixel_count = 0;

  const ChainState &estimate(Estimator estimator) const {
    return estimator == Estimator::map ? map : posterior_mean;
  }
};

UnmixResult summarize(const ChainTrace &trace, Index burn_in);

/// K x N proportion matrix in flat pixel order, gathered from the documents.
Eigen::MatrixXd proportion_matrix(const ChainState &state, Index pixel_count);

} // namespace pmlda
