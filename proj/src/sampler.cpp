#include "pmlda/sampler.hpp"

#include "pmlda/errors.hpp"

#include <cmath>
#include <exception>
#include <limits>

namespace pmlda {

namespace {

constexpr std::uint64_t kMuStream = 1ULL << 40;
constexpr std::uint64_t kSigmaStream = 1ULL << 41;

double data_log_likelihood(const Corpus &corpus, const ChainState &state,
                           const EndmemberModel &model, const Hyperparameters &hp) {
  double total = 0.0;
  for (const auto &doc : state.documents)
    for (std::size_t n = 0; n < doc.pixel_indices.size(); ++n)
      total += log_word_likelihood(corpus.pixels.col(doc.pixel_indices[n]),
                                   doc.memberships[n].weights(), model, hp.word_likelihood_mode);
  return total;
}

double membership_log_prior(const Document &doc, const Simplex &pi, double s,
                            const Hyperparameters &hp) {
  const Eigen::VectorXd conc = membership_concentration(pi, s, hp.membership_floor);
  double total = 0.0;
  for (const auto &z : doc.memberships)
    total += log_dirichlet_pdf(z.weights(), conc, hp.membership_floor);
  return total;
}

void update_document(const Eigen::MatrixXd &pixels, Document &doc, const EndmemberModel &model,
                     const ChainConfig &config, const Proposer &proposer, Rng &rng,
                     AcceptanceCounts &counts) {
  const auto &hp = config.hp;
  if (config.update_pi)
    counts.record(UpdateKind::pi, step_pi(doc, hp, proposer, rng).accepted);
  if (config.update_s)
    counts.record(UpdateKind::s, step_s(doc, hp, proposer, rng).accepted);
  if (config.update_z)
    for (std::size_t n = 0; n < doc.pixel_indices.size(); ++n)
      counts.record(UpdateKind::z, step_z(pixels, doc, n, model, hp, proposer, rng).accepted);
}

} // namespace

void ChainConfig::validate() const {
  hp.validate();
  if (record_every < 1)
    throw ValidationError("record interval must be >= 1");
  if (threads < 1)
    throw ValidationError("thread count must be >= 1");
}

AcceptanceCounts &AcceptanceCounts::operator+=(const AcceptanceCounts &other) {
  for (std::size_t i = 0; i < kUpdateKinds; ++i) {
    accepted[i] += other.accepted[i];
    proposed[i] += other.proposed[i];
  }
  return *this;
}

double AcceptanceCounts::rate(UpdateKind kind) const {
  const auto i = static_cast<std::size_t>(kind);
  return proposed[i] == 0 ? 0.0
                          : static_cast<double>(accepted[i]) / static_cast<double>(proposed[i]);
}

double StepOutcome::acceptance_probability() const {
  if (std::isnan(log_ratio))
    return 0.0;
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

Simplex Proposer::propose_pi(const Document &doc, const Hyperparameters &hp, Rng &rng) const {
  return Simplex::project(sample_dirichlet(rng, Eigen::VectorXd::Constant(doc.pi.size(), hp.alpha)));
}

double Proposer::propose_s(const Document &, const Hyperparameters &hp, Rng &rng) const {
  std::exponential_distribution<double> exponential(hp.lambda);
  return std::max(exponential(rng), hp.membership_floor);
}

Simplex Proposer::propose_z(const Document &doc, std::size_t, Rng &rng) const {
  return Simplex::project(sample_dirichlet(rng, Eigen::VectorXd::Ones(doc.pi.size())));
}

Eigen::VectorXd Proposer::propose_mu(Index, const EndmemberModel &, const DataGaussian &data,
                                     Rng &rng) const {
  return data.transform(sample_standard_normal(rng, data.dimension()));
}

double Proposer::propose_sigma2(std::optional<Index>, const EndmemberModel &, double upper,
                                Rng &rng) const {
  return upper * sample_uniform(rng);
}

const Proposer &default_proposer() {
  static const Proposer proposer;
  return proposer;
}

double log_accept_ratio_pi(const Document &doc, const Simplex &candidate,
                           const Hyperparameters &hp) {
  return membership_log_prior(doc, candidate, doc.s, hp) -
         membership_log_prior(doc, doc.pi, doc.s, hp);
}

double log_accept_ratio_s(const Document &doc, double candidate, const Hyperparameters &hp) {
  return membership_log_prior(doc, doc.pi, candidate, hp) -
         membership_log_prior(doc, doc.pi, doc.s, hp);
}

double log_accept_ratio_z(const Eigen::MatrixXd &pixels, const Document &doc, std::size_t n,
                          const Simplex &candidate, const EndmemberModel &model,
                          const Hyperparameters &hp) {
  const auto x = pixels.col(doc.pixel_indices[n]);
  return log_word_term(x, candidate, doc.pi, doc.s, model, hp) -
         log_word_term(x, doc.memberships[n], doc.pi, doc.s, model, hp);
}

double log_accept_ratio_mu(const Corpus &corpus, const ChainState &state, Index k,
                           const Eigen::Ref<const Eigen::VectorXd> &candidate,
                           const Hyperparameters &hp) {
  EndmemberModel proposed = state.model;
  proposed.means.col(k) = candidate;
  const double likelihood = data_log_likelihood(corpus, state, proposed, hp) -
                            data_log_likelihood(corpus, state, state.model, hp);
  const double correction =
      corpus.data.log_pdf(state.model.means.col(k)) - corpus.data.log_pdf(candidate);
  return likelihood + correction;
}

double log_accept_ratio_sigma2(const Corpus &corpus, const ChainState &state, double candidate,
                               std::optional<Index> topic, const Hyperparameters &hp) {
  EndmemberModel proposed = state.model;
  if (topic)
    (*proposed.per_topic_sigma2)[*topic] = candidate;
  else
    proposed.sigma2 = candidate;
  return data_log_likelihood(corpus, state, proposed, hp) -
         data_log_likelihood(corpus, state, state.model, hp);
}

bool metropolis_accept(double log_ratio, Rng &rng) {
  const double u = sample_uniform(rng);
  if (std::isnan(log_ratio))
    return false;
  return log_ratio >= 0.0 || std::log(u) < log_ratio;
}

StepOutcome step_pi(Document &doc, const Hyperparameters &hp, const Proposer &proposer,
                    Rng &rng) {
  Simplex candidate = proposer.propose_pi(doc, hp, rng);
  StepOutcome out{false, log_accept_ratio_pi(doc, candidate, hp)};
  out.accepted = metropolis_accept(out.log_ratio, rng);
  if (out.accepted)
    doc.pi = std::move(candidate);
  return out;
}

StepOutcome step_s(Document &doc, const Hyperparameters &hp, const Proposer &proposer, Rng &rng) {
  const double candidate = proposer.propose_s(doc, hp, rng);
  if (!(candidate > 0.0))
    throw ValidationError("mixing level proposal must be > 0");
  StepOutcome out{false, log_accept_ratio_s(doc, candidate, hp)};
  out.accepted = metropolis_accept(out.log_ratio, rng);
  if (out.accepted)
    doc.s = candidate;
  return out;
}

StepOutcome step_z(const Eigen::MatrixXd &pixels, Document &doc, std::size_t n,
                   const EndmemberModel &model, const Hyperparameters &hp,
                   const Proposer &proposer, Rng &rng) {
  Simplex candidate = proposer.propose_z(doc, n, rng);
  StepOutcome out{false, log_accept_ratio_z(pixels, doc, n, candidate, model, hp)};
  out.accepted = metropolis_accept(out.log_ratio, rng);
  if (out.accepted)
    doc.memberships[n] = std::move(candidate);
  return out;
}

StepOutcome step_mu(const Corpus &corpus, ChainState &state, Index k, const Hyperparameters &hp,
                    const Proposer &proposer, Rng &rng) {
  if (k < 0 || k >= state.model.topics())
    throw ValidationError("topic index out of range");
  const Eigen::VectorXd candidate = proposer.propose_mu(k, state.model, corpus.data, rng);
  StepOutcome out{false, log_accept_ratio_mu(corpus, state, k, candidate, hp)};
  out.accepted = metropolis_accept(out.log_ratio, rng);
  if (out.accepted)
    state.model.means.col(k) = candidate;
  return out;
}

StepOutcome step_sigma2(const Corpus &corpus, ChainState &state, const Hyperparameters &hp,
                        const Proposer &proposer, Rng &rng, std::optional<Index> topic) {
  const double upper = corpus.sigma2_upper;
  if (!(upper > 0.0))
    throw ValidationError("sigma2 proposal bound is not positive: all pixels are equidistant "
                          "from the data mean; fix sigma2 or supply a manual bound");
  if (topic && (!state.model.per_topic_sigma2 || *topic < 0 || *topic >= state.model.topics()))
    throw ValidationError("per-topic sigma2 update requested on a shared-variance model");

  const double candidate =
      std::max(proposer.propose_sigma2(topic, state.model, upper, rng), hp.membership_floor);
  StepOutcome out{false, log_accept_ratio_sigma2(corpus, state, candidate, topic, hp)};
  out.accepted = metropolis_accept(out.log_ratio, rng);
  if (out.accepted) {
    if (topic)
      (*state.model.per_topic_sigma2)[*topic] = candidate;
    else
      state.model.sigma2 = candidate;
  }
  return out;
}

ChainTrace run_chain(const Corpus &corpus, const ChainConfig &config, const ChainState &init,
                     const Proposer &proposer) {
  config.validate();
  const auto &hp = config.hp;
  validate_state(init, corpus.pixel_count());
  if (init.model.topics() != hp.K)
    throw ValidationError("initial state topic count differs from K");
  if (init.model.bands() != corpus.bands())
    throw ValidationError("initial state band count differs from the corpus");

  ChainState state = init;
  if (config.per_topic_sigma2 && !state.model.per_topic_sigma2)
    state.model.per_topic_sigma2 = Eigen::VectorXd::Constant(hp.K, state.model.sigma2);

  const std::size_t n_docs = state.documents.size();
  const Index T = hp.T;
  ChainTrace trace;
  trace.iterations.reserve(static_cast<std::size_t>(T));
  double best = -std::numeric_limits<double>::infinity();

  std::vector<AcceptanceCounts> doc_counts(n_docs);
  std::vector<double> doc_joint(n_docs);
  std::vector<std::exception_ptr> errors(n_docs);

  for (Index t = 1; t <= T; ++t) {
    const auto iteration = static_cast<std::uint64_t>(t);
    const long long n_docs_ll = static_cast<long long>(n_docs);

#pragma omp parallel for schedule(dynamic) num_threads(config.threads) if (config.threads > 1)
    for (long long d = 0; d < n_docs_ll; ++d) {
      const auto i = static_cast<std::size_t>(d);
      try {
        Rng rng = substream(hp.seed, iteration, static_cast<std::uint64_t>(d));
        doc_counts[i] = AcceptanceCounts{};
        update_document(corpus.pixels, state.documents[i], state.model, config, proposer, rng,
                        doc_counts[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (auto &e : errors)
      if (e)
        std::rethrow_exception(e);

    IterationStats stats;
    stats.iteration = t;
    for (const auto &c : doc_counts)
      stats.counts += c;

    if (config.update_mu) {
      for (Index k = 0; k < hp.K; ++k) {
        Rng rng = substream(hp.seed, iteration, kMuStream + static_cast<std::uint64_t>(k));
        stats.counts.record(UpdateKind::mu, step_mu(corpus, state, k, hp, proposer, rng).accepted);
      }
    }
    if (config.update_sigma2) {
      Rng rng = substream(hp.seed, iteration, kSigmaStream);
      if (config.per_topic_sigma2) {
        for (Index k = 0; k < hp.K; ++k)
          stats.counts.record(UpdateKind::sigma2,
                              step_sigma2(corpus, state, hp, proposer, rng, k).accepted);
      } else {
        stats.counts.record(UpdateKind::sigma2,
                            step_sigma2(corpus, state, hp, proposer, rng).accepted);
      }
    }

    // Per-document terms may be computed concurrently; summing them in
    // document order keeps the total identical to log_joint().
#pragma omp parallel for schedule(dynamic) num_threads(config.threads) if (config.threads > 1)
    for (long long d = 0; d < n_docs_ll; ++d) {
      const auto i = static_cast<std::size_t>(d);
      try {
        doc_joint[i] = log_document_joint(corpus.pixels, state.documents[i], state.model, hp);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (auto &e : errors)
      if (e)
        std::rethrow_exception(e);
    double total = 0.0;
    for (double v : doc_joint)
      total += v;
    state.log_joint = total;

    if (t == 1 || total > best) {
      best = total;
      trace.best_state = state;
      trace.best_iteration = t;
    }
    stats.log_joint = total;
    stats.best_log_joint = best;
    trace.totals += stats.counts;
    trace.iterations.push_back(stats);

    if (t % config.record_every == 0)
      trace.samples.push_back({t, state});
  }
  return trace;
}

std::string to_string(Estimator estimator) {
  return estimator == Estimator::map ? "map" : "mean";
}

Estimator parse_estimator(const std::string &text) {
  if (text == "mean" || text == "posterior-mean")
    return Estimator::posterior_mean;
  if (text == "map")
    return Estimator::map;
  throw ValidationError("unknown estimator '" + text + "'");
}

UnmixResult summarize(const ChainTrace &trace, Index burn_in) {
  std::vector<const ChainState *> window;
  for (const auto &rec : trace.samples)
    if (rec.iteration > burn_in)
      window.push_back(&rec.state);
  if (window.empty())
    throw ValidationError("no recorded samples after burn-in " + std::to_string(burn_in));

  const double count = static_cast<double>(window.size());
  const ChainState &first = *window.front();

  ChainState mean = first;
  mean.log_joint = std::numeric_limits<double>::quiet_NaN();
  mean.model.means.setZero();
  mean.model.sigma2 = 0.0;
  if (mean.model.per_topic_sigma2)
    mean.model.per_topic_sigma2->setZero();

  std::vector<Eigen::VectorXd> pi_sum(first.documents.size());
  std::vector<double> s_sum(first.documents.size(), 0.0);
  std::vector<std::vector<Eigen::VectorXd>> z_sum(first.documents.size());
  for (std::size_t d = 0; d < first.documents.size(); ++d) {
    pi_sum[d] = Eigen::VectorXd::Zero(first.documents[d].pi.size());
    z_sum[d].assign(first.documents[d].memberships.size(), pi_sum[d]);
  }

  for (const ChainState *state : window) {
    mean.model.means += state->model.means;
    mean.model.sigma2 += state->model.sigma2;
    if (mean.model.per_topic_sigma2)
      *mean.model.per_topic_sigma2 += *state->model.per_topic_sigma2;
    for (std::size_t d = 0; d < state->documents.size(); ++d) {
      const auto &doc = state->documents[d];
      pi_sum[d] += doc.pi.weights();
      s_sum[d] += doc.s;
      for (std::size_t n = 0; n < doc.memberships.size(); ++n)
        z_sum[d][n] += doc.memberships[n].weights();
    }
  }
  mean.model.means /= count;
  mean.model.sigma2 /= count;
  if (mean.model.per_topic_sigma2)
    *mean.model.per_topic_sigma2 /= count;
  for (std::size_t d = 0; d < mean.documents.size(); ++d) {
    auto &doc = mean.documents[d];
    doc.pi = Simplex::project(pi_sum[d] / count);
    doc.s = s_sum[d] / count;
    for (std::size_t n = 0; n < doc.memberships.size(); ++n)
      doc.memberships[n] = Simplex::project(z_sum[d][n] / count);
  }

  UnmixResult result;
  result.posterior_mean = std::move(mean);
  result.map = trace.best_state;
  result.samples_used = static_cast<Index>(window.size());
  for (const auto &doc : first.documents)
    result.pixel_count += static_cast<Index>(doc.pixel_indices.size());
  return result;
}

Eigen::MatrixXd proportion_matrix(const ChainState &state, Index pixel_count) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(state.model.topics(), pixel_count);
  for (const auto &doc : state.documents)
    for (std::size_t n = 0; n < doc.pixel_indices.size(); ++n) {
      const Index idx = doc.pixel_indices[n];
      if (idx < 0 || idx >= pixel_count)
        throw ValidationError("document pixel index out of range");
      p.col(idx) = doc.memberships[n].weights();
    }
  return p;
}

} // namespace pmlda
