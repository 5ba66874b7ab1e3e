#include <doctest.h>

#include "pmlda/core.hpp"
#include "pmlda/errors.hpp"
#include "pmlda/metrics.hpp"
#include "pmlda/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

using namespace pmlda;

TEST_CASE("proportion entropy") {
  Eigen::MatrixXd hot = Eigen::MatrixXd::Zero(3, 4);
  for (Index n = 0; n < 4; ++n)
    hot(n % 3, n) = 1.0;
  CHECK(proportion_entropy(hot) == 0.0);

  Eigen::MatrixXd half(2, 1);
  half << 0.5, 0.5;
  CHECK(proportion_entropy(half) == doctest::Approx(std::log(2.0)));

  const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(4, 2500, 0.25);
  CHECK(std::abs(proportion_entropy(uniform) - 3465.7359027997265471) < 1e-6);

  Eigen::MatrixXd bad(2, 1);
  bad << 0.7, 0.7;
  CHECK_THROWS_AS(proportion_entropy(bad), ValidationError);
}

TEST_CASE("entropy is bounded and permutation invariant") {
  Rng rng(3);
  Eigen::MatrixXd p(4, 50);
  for (Index n = 0; n < 50; ++n)
    p.col(n) = sample_dirichlet(rng, Eigen::VectorXd::Constant(4, 0.7));
  const double h = proportion_entropy(p);
  CHECK(h >= 0.0);
  CHECK(h <= 50 * std::log(4.0));

  Eigen::MatrixXd shuffled = p.colwise().reverse();
  shuffled.row(0).swap(shuffled.row(2));
  CHECK(proportion_entropy(shuffled) == doctest::Approx(h).epsilon(1e-12));
}

TEST_CASE("ncm log-likelihood degenerate cases") {
  // density exactly 1
  Eigen::MatrixXd x(1, 1), e(1, 1), p(1, 1);
  x << 0.4;
  e << 0.4;
  p << 1.0;
  Eigen::VectorXd s2(1);
  s2 << 1.0 / (2.0 * std::numbers::pi);
  CHECK(std::abs(ncm_log_likelihood(x, e, p, s2)) < 1e-9);

  // one-hot proportions reduce to the selected Gaussian
  const Eigen::MatrixXd xs = Eigen::MatrixXd::Random(3, 1);
  const Eigen::MatrixXd es = Eigen::MatrixXd::Random(3, 2);
  Eigen::MatrixXd ph(2, 1);
  ph << 1.0, 0.0;
  Eigen::VectorXd v(2);
  v << 0.3, 0.8;
  CHECK(std::abs(ncm_log_likelihood(xs, es, ph, v) -
                 log_gaussian_isotropic(xs.col(0), es.col(0), 0.3)) < 1e-9);

  Eigen::MatrixXd zero(2, 1);
  zero << 1.0, 0.0;
  Eigen::VectorXd novar(2);
  novar << 0.0, 1.0;
  CHECK_THROWS_AS(ncm_log_likelihood(xs, es, zero, novar), ValidationError);
}

TEST_CASE("ncm log-likelihood with one-hot rows sums single Gaussians") {
  Rng rng(9);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 40);
  const Eigen::MatrixXd e = Eigen::MatrixXd::Random(5, 3);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 40);
  double expected = 0.0;
  for (Index n = 0; n < 40; ++n) {
    const Index k = n % 3;
    p(k, n) = 1.0;
    expected += log_gaussian_isotropic(x.col(n), e.col(k), 0.07);
  }
  CHECK(std::abs(ncm_log_likelihood(x, e, p, Eigen::VectorXd::Constant(3, 0.07)) - expected) <
        1e-10 * std::abs(expected));

  // a mixed pixel uses sum p^2 sigma2 as variance
  Eigen::MatrixXd pm(3, 1);
  pm << 0.2, 0.3, 0.5;
  const Eigen::VectorXd v = Eigen::Vector3d(0.1, 0.2, 0.4);
  const double var = 0.04 * 0.1 + 0.09 * 0.2 + 0.25 * 0.4;
  CHECK(ncm_log_likelihood(x.col(0), e, pm, v) ==
        doctest::Approx(log_gaussian_isotropic(x.col(0), e * pm.col(0), var)).epsilon(1e-13));
}

TEST_CASE("spectral angle") {
  const Eigen::Vector2d a(1, 0), b(0, 1), c(1, 1);
  CHECK(spectral_angle(a, a) == doctest::Approx(0.0));
  CHECK(spectral_angle(a, b) == doctest::Approx(std::numbers::pi / 2));
  CHECK(spectral_angle(a, c) == doctest::Approx(std::numbers::pi / 4));
  CHECK(spectral_angle(c, a) == spectral_angle(a, c));
  CHECK(spectral_angle(3.5 * c, a) == doctest::Approx(spectral_angle(c, a)).epsilon(1e-14));
  CHECK_THROWS_AS(spectral_angle(a, Eigen::Vector2d::Zero()), ValidationError);
}

TEST_CASE("hungarian assignment equals brute force") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 1 + trial % 5;
    Eigen::MatrixXd cost(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        cost(i, j) = sample_uniform(rng);
    const auto assign = optimal_assignment(cost);
    double got = 0.0;
    for (Index i = 0; i < n; ++i)
      got += cost(i, assign[i]);

    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (Index i = 0; i < n; ++i)
        c += cost(i, perm[i]);
      best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(got == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("matching recovers a permutation of the truth") {
  const Eigen::MatrixXd truth = Eigen::MatrixXd::Random(8, 3).cwiseAbs();
  const std::vector<Index> perm{2, 0, 1};
  Eigen::MatrixXd estimate(8, 3);
  for (Index k = 0; k < 3; ++k)
    estimate.col(perm[k]) = 2.0 * truth.col(k);
  const auto match = match_endmembers(truth, estimate);
  CHECK(match.estimate_for_truth == perm);
  CHECK(match.sad.cwiseAbs().maxCoeff() < 1e-7);

  const auto self = match_endmembers(truth, truth);
  CHECK(self.sad.cwiseAbs().maxCoeff() < 1e-7);
}
