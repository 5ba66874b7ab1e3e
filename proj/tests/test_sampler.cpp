#include <doctest.h>

#include "pmlda/errors.hpp"
#include "pmlda/init.hpp"
#include "pmlda/sampler.hpp"
#include "pmlda/synthgen.hpp"

#include <cmath>

using namespace pmlda;

namespace {

struct Fixture {
  Corpus corpus;
  Hyperparameters hp;
  ChainState state;
};

Fixture random_fixture(std::uint64_t seed, WordLikelihoodMode mode) {
  Rng rng(seed);
  Eigen::MatrixXd x(3, 6);
  for (Index i = 0; i < x.size(); ++i)
    x(i) = 0.2 + 0.6 * sample_uniform(rng);
  Fixture f{build_corpus(HyperspectralCube(3, 2, x), grid_segmentation(3, 2, 2)), {}, {}};
  f.hp.K = 3;
  f.hp.alpha = 2.5;
  f.hp.lambda = 0.7;
  f.hp.word_likelihood_mode = mode;
  f.state = initial_state(f.corpus, f.hp, orthogonal_projection_endmembers(f.corpus, 3));
  f.state.model.sigma2 = 0.05 + 0.1 * sample_uniform(rng);
  for (auto &doc : f.state.documents) {
    doc.pi = Simplex::project(sample_dirichlet(rng, Eigen::VectorXd::Constant(3, 2.0)));
    doc.s = 0.5 + 3.0 * sample_uniform(rng);
    for (auto &z : doc.memberships)
      z = Simplex::project(sample_dirichlet(rng, Eigen::VectorXd::Constant(3, 1.5)));
  }
  return f;
}

double joint(const Fixture &f, const ChainState &s) { return log_joint(f.corpus.pixels, s, f.hp); }

Simplex random_simplex(Rng &rng) {
  return Simplex::project(sample_dirichlet(rng, Eigen::VectorXd::Ones(3)));
}

} // namespace

TEST_CASE("localized ratios equal full joint differences") {
  for (auto mode : {WordLikelihoodMode::normalized, WordLikelihoodMode::raw_product}) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const Fixture f = random_fixture(seed, mode);
      Rng rng(seed * 7919);
      const double base = joint(f, f.state);
      const Document &doc = f.state.documents[1];
      const Eigen::VectorXd a = Eigen::VectorXd::Constant(3, f.hp.alpha);

      // pi with prior proposal: full ratio plus q(pi)/q(pi')
      const Simplex pi = random_simplex(rng);
      ChainState moved = f.state;
      moved.documents[1].pi = pi;
      const double full_pi = joint(f, moved) - base - log_dirichlet_pdf(pi.weights(), a) +
                             log_dirichlet_pdf(doc.pi.weights(), a);
      CHECK(std::abs(log_accept_ratio_pi(doc, pi, f.hp) - full_pi) < 1e-8);

      // s with prior proposal
      const double s = 0.1 + 4.0 * sample_uniform(rng);
      moved = f.state;
      moved.documents[1].s = s;
      const double full_s = joint(f, moved) - base - log_exponential_pdf(s, f.hp.lambda) +
                            log_exponential_pdf(doc.s, f.hp.lambda);
      CHECK(std::abs(log_accept_ratio_s(doc, s, f.hp) - full_s) < 1e-8);

      // z with the uniform proposal
      const Simplex z = random_simplex(rng);
      moved = f.state;
      moved.documents[1].memberships[1] = z;
      CHECK(std::abs(log_accept_ratio_z(f.corpus.pixels, doc, 1, z, f.state.model, f.hp) -
                     (joint(f, moved) - base)) < 1e-8);

      // mu with the data-Gaussian independence proposal
      const Eigen::VectorXd mu = f.corpus.data.transform(sample_standard_normal(rng, 3));
      moved = f.state;
      moved.model.means.col(2) = mu;
      const double full_mu = joint(f, moved) - base - f.corpus.data.log_pdf(mu) +
                             f.corpus.data.log_pdf(f.state.model.means.col(2));
      CHECK(std::abs(log_accept_ratio_mu(f.corpus, f.state, 2, mu, f.hp) - full_mu) < 1e-8);

      // sigma2 with the uniform proposal
      const double s2 = f.corpus.sigma2_upper * sample_uniform(rng);
      moved = f.state;
      moved.model.sigma2 = s2;
      CHECK(std::abs(log_accept_ratio_sigma2(f.corpus, f.state, s2, std::nullopt, f.hp) -
                     (joint(f, moved) - base)) < 1e-8);

      // per-topic sigma2
      ChainState per = f.state;
      per.model.per_topic_sigma2 = Eigen::Vector3d(0.05, 0.08, 0.12);
      moved = per;
      (*moved.model.per_topic_sigma2)[1] = s2;
      CHECK(std::abs(log_accept_ratio_sigma2(f.corpus, per, s2, 1, f.hp) -
                     (joint(f, moved) - joint(f, per))) < 1e-8);
    }
  }
}

TEST_CASE("proposing the current value always accepts and changes nothing") {
  Fixture f = random_fixture(3, WordLikelihoodMode::normalized);
  const CurrentStateProposer same;
  Rng rng(5);
  const ChainState before = f.state;
  Document &doc = f.state.documents[0];
  for (int i = 0; i < 20; ++i) {
    CHECK(step_pi(doc, f.hp, same, rng).acceptance_probability() == 1.0);
    CHECK(step_s(doc, f.hp, same, rng).acceptance_probability() == 1.0);
    CHECK(step_z(f.corpus.pixels, doc, 1, f.state.model, f.hp, same, rng)
              .acceptance_probability() == 1.0);
    CHECK(step_mu(f.corpus, f.state, 1, f.hp, same, rng).acceptance_probability() == 1.0);
    CHECK(step_sigma2(f.corpus, f.state, f.hp, same, rng).acceptance_probability() == 1.0);
  }
  CHECK(f.state == before);
}

TEST_CASE("a single sweep with current-value proposals reproduces the start") {
  const Fixture f = random_fixture(4, WordLikelihoodMode::normalized);
  ChainConfig config;
  config.hp = f.hp;
  config.hp.T = 1;
  config.hp.burn_in = 0;
  config.record_every = 1;
  ChainState init = f.state;
  init.log_joint = joint(f, init);
  const ChainTrace trace = run_chain(f.corpus, config, init, CurrentStateProposer{});
  REQUIRE(trace.samples.size() == 1);
  CHECK(trace.samples[0].state == init);
  CHECK(trace.best_state == init);
  CHECK(trace.totals.rate(UpdateKind::pi) == 1.0);
  CHECK(trace.totals.rate(UpdateKind::sigma2) == 1.0);
}

TEST_CASE("steps keep the state valid and probabilities in range") {
  Fixture f = random_fixture(8, WordLikelihoodMode::normalized);
  Rng rng(12);
  const Proposer &p = default_proposer();
  for (int i = 0; i < 200; ++i) {
    for (auto &doc : f.state.documents) {
      for (const StepOutcome out :
           {step_pi(doc, f.hp, p, rng), step_s(doc, f.hp, p, rng),
            step_z(f.corpus.pixels, doc, 0, f.state.model, f.hp, p, rng)}) {
        CHECK(out.acceptance_probability() >= 0.0);
        CHECK(out.acceptance_probability() <= 1.0);
      }
      CHECK(is_simplex(doc.pi.weights()));
      CHECK(is_simplex(doc.memberships[0].weights()));
      CHECK(doc.s > 0.0);
    }
    const StepOutcome mu = step_mu(f.corpus, f.state, i % 3, f.hp, p, rng);
    CHECK(mu.acceptance_probability() <= 1.0);
    step_sigma2(f.corpus, f.state, f.hp, p, rng);
    CHECK(f.state.model.sigma2 > 0.0);
  }
  CHECK_NOTHROW(validate_state(f.state, 6));
}

TEST_CASE("metropolis_accept") {
  Rng rng(1);
  CHECK(metropolis_accept(0.0, rng));
  CHECK(metropolis_accept(5.0, rng));
  CHECK_FALSE(metropolis_accept(std::nan(""), rng));
  CHECK_FALSE(metropolis_accept(-1e300, rng));
  int hits = 0;
  for (int i = 0; i < 20000; ++i)
    hits += metropolis_accept(std::log(0.3), rng) ? 1 : 0;
  CHECK(std::abs(hits / 20000.0 - 0.3) < 0.02);
}

namespace {

Corpus scene_corpus(std::uint64_t seed, double sigma2, Index size = 16) {
  SceneSpec spec;
  spec.rows = size;
  spec.cols = size;
  spec.means = 3.0 * random_endmembers(8, 3, 0.3, seed);
  spec.sigma2 = sigma2;
  spec.layout = grid_segmentation(size, size, 4);
  spec.seed = seed;
  const auto scene = generate_scene(spec);
  return build_corpus(scene.cube, spec.layout);
}

ChainTrace run(const Corpus &c, Index T, std::uint64_t seed, int threads) {
  ChainConfig config;
  config.hp.K = 3;
  config.hp.T = T;
  config.hp.burn_in = 0;
  config.hp.seed = seed;
  config.threads = threads;
  config.record_every = 5;
  return run_chain(c, config,
                   initial_state(c, config.hp, orthogonal_projection_endmembers(c, 3)));
}

} // namespace

TEST_CASE("chains are deterministic and thread-count independent") {
  const Corpus c = scene_corpus(2, 1e-3);
  const ChainTrace a = run(c, 30, 9, 1);
  const ChainTrace b = run(c, 30, 9, 1);
  const ChainTrace p = run(c, 30, 9, 4);
  REQUIRE(a.samples.size() == 6);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].state == b.samples[i].state);
    CHECK(a.samples[i].state == p.samples[i].state);
  }
  CHECK(a.best_state == p.best_state);
  CHECK(a.totals.accepted == p.totals.accepted);

  const ChainTrace other = run(c, 30, 10, 1);
  CHECK_FALSE(other.samples.back().state == a.samples.back().state);
}

TEST_CASE("trace bookkeeping") {
  const Corpus c = scene_corpus(3, 1e-3);
  const ChainTrace t = run(c, 40, 1, 2);
  REQUIRE(t.iterations.size() == 40);
  double best = -INFINITY;
  for (const auto &it : t.iterations) {
    best = std::max(best, it.log_joint);
    CHECK(it.best_log_joint == best);
  }
  CHECK(t.best_state.log_joint == best);
  CHECK(t.iterations[static_cast<std::size_t>(t.best_iteration - 1)].log_joint == best);
  for (const auto &rec : t.samples)
    CHECK(std::abs(rec.state.log_joint - log_joint(c.pixels, rec.state, Hyperparameters{
                                                       .K = 3})) < 1e-9 *
                                                                         std::abs(best));
}

TEST_CASE("memberships concentrate on the explaining endmember") {
  // one pixel at mu_1 with a tight variance
  Eigen::MatrixXd x(1, 1);
  x << 0.0;
  const Corpus c = build_corpus(HyperspectralCube(1, 1, x), SegmentationMap{1, 1, {0}});
  ChainConfig config;
  config.hp.K = 2;
  config.hp.T = 5000;
  config.hp.burn_in = 0;
  config.record_every = 1;
  config.update_mu = false;
  config.update_sigma2 = false;
  ChainState init = initial_state(c, config.hp, Eigen::RowVector2d(0.0, 1.0));
  init.model.sigma2 = 1e-3;
  const ChainTrace trace = run_chain(c, config, init);
  const UnmixResult r = summarize(trace, 1000);
  CHECK(r.posterior_mean.documents[0].memberships[0][0] > 0.95);
}

TEST_CASE("variance controls the z acceptance rate") {
  const Corpus c = scene_corpus(5, 1e-4);
  auto rate = [&](double sigma2) {
    ChainConfig config;
    config.hp.K = 3;
    config.hp.T = 30;
    config.hp.burn_in = 0;
    config.update_sigma2 = false;
    config.update_mu = false;
    ChainState init = initial_state(c, config.hp, orthogonal_projection_endmembers(c, 3));
    init.model.sigma2 = sigma2;
    return run_chain(c, config, init).totals.rate(UpdateKind::z);
  };
  const double tight = rate(1e-4);
  const double loose = rate(1e4);
  CHECK(tight < 0.2);
  CHECK(loose > 0.5);
  CHECK(tight < loose);
}

TEST_CASE("single-topic mean moves to the data") {
  // K = 1: the likelihood of mu is N(mean of x, sigma2 / N)
  Rng rng(3);
  Eigen::MatrixXd x(2, 64);
  for (Index n = 0; n < 64; ++n)
    x.col(n) = Eigen::Vector2d(1.0, 2.0) + 0.1 * sample_standard_normal(rng, 2);
  const Corpus c = build_corpus(HyperspectralCube(8, 8, x), grid_segmentation(8, 8, 4));
  ChainConfig config;
  config.hp.K = 1;
  config.hp.T = 3000;
  config.hp.burn_in = 0;
  config.record_every = 5;
  config.update_sigma2 = false;
  ChainState init = initial_state(c, config.hp, Eigen::Vector2d(0.5, 0.5));
  init.model.sigma2 = 0.01;
  const UnmixResult r = summarize(run_chain(c, config, init), 1000);
  const Eigen::VectorXd mean = x.rowwise().mean();
  CHECK((r.posterior_mean.model.means.col(0) - mean).norm() < 0.05);
}

TEST_CASE("shared variance recovered from a noisy single-topic scene") {
  Rng rng(8);
  Eigen::MatrixXd x(5, 400);
  for (Index n = 0; n < 400; ++n)
    x.col(n) = Eigen::VectorXd::Constant(5, 1.0) + 0.2 * sample_standard_normal(rng, 5);
  const Corpus c = build_corpus(HyperspectralCube(20, 20, x), grid_segmentation(20, 20, 10));
  ChainConfig config;
  config.hp.K = 1;
  config.hp.T = 1500;
  config.hp.burn_in = 0;
  config.record_every = 5;
  config.update_mu = false;
  ChainState init = initial_state(c, config.hp, Eigen::VectorXd::Constant(5, 1.0));
  const UnmixResult r = summarize(run_chain(c, config, init), 500);
  CHECK(r.posterior_mean.model.sigma2 > 0.04 / 1.5);
  CHECK(r.posterior_mean.model.sigma2 < 0.04 * 1.5);
}

TEST_CASE("summarize") {
  const Fixture f = random_fixture(6, WordLikelihoodMode::normalized);
  ChainTrace trace;
  ChainState s = f.state;
  s.log_joint = joint(f, s);
  for (Index t = 1; t <= 4; ++t)
    trace.samples.push_back({t * 10, s});
  trace.best_state = s;

  SUBCASE("identical samples average to themselves") {
    const UnmixResult r = summarize(trace, 0);
    CHECK(r.samples_used == 4);
    CHECK(r.pixel_count == 6);
    CHECK(std::isnan(r.posterior_mean.log_joint));
    CHECK((r.posterior_mean.model.means - s.model.means).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(r.posterior_mean.model.sigma2 == doctest::Approx(s.model.sigma2).epsilon(1e-14));
    for (std::size_t d = 0; d < s.documents.size(); ++d)
      CHECK((r.posterior_mean.documents[d].pi.weights() - s.documents[d].pi.weights())
                .cwiseAbs()
                .maxCoeff() < 1e-14);
    CHECK(r.map == s);
  }
  SUBCASE("burn-in window") {
    CHECK(summarize(trace, 25).samples_used == 2);
    CHECK_THROWS_AS(summarize(trace, 40), ValidationError);
  }
}

TEST_CASE("posterior mean memberships stay on the simplex") {
  const Corpus c = scene_corpus(7, 1e-3);
  const ChainTrace t = run(c, 60, 2, 1);
  const UnmixResult r = summarize(t, 30);
  for (const auto &doc : r.posterior_mean.documents) {
    CHECK(is_simplex(doc.pi.weights()));
    for (const auto &z : doc.memberships)
      CHECK(is_simplex(z.weights()));
  }
  for (const auto &rec : t.samples)
    CHECK(r.map.log_joint >= rec.state.log_joint);
  const Eigen::MatrixXd p = proportion_matrix(r.posterior_mean, 256);
  CHECK((p.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("chain configuration validation") {
  const Corpus c = scene_corpus(2, 1e-3, 8);
  ChainConfig config;
  config.hp.K = 3;
  config.hp.T = 5;
  config.hp.burn_in = 0;
  const ChainState init = initial_state(c, config.hp, orthogonal_projection_endmembers(c, 3));
  config.threads = 0;
  CHECK_THROWS_AS(run_chain(c, config, init), ValidationError);
  config.threads = 1;
  config.hp.K = 2;
  CHECK_THROWS_AS(run_chain(c, config, init), ValidationError);
  CHECK(parse_estimator("map") == Estimator::map);
  CHECK_THROWS_AS(parse_estimator("median"), ValidationError);
}
