#include "pmlda/rng.hpp"

#include "pmlda/errors.hpp"

#include <cmath>

namespace pmlda {

Eigen::VectorXd sample_dirichlet(Rng &rng, const Eigen::Ref<const Eigen::VectorXd> &concentration) {
  const Eigen::Index k = concentration.size();
  if (k == 0)
    throw ValidationError("dirichlet sample: empty concentration");
  // Work with log-Gamma variates so tiny shapes cannot underflow to an all-zero
  // draw: for a < 1, G(a) = G(a + 1) * U^(1/a).
  Eigen::VectorXd log_g(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double a = concentration[i];
    if (!(a > 0.0))
      throw ValidationError("dirichlet sample: concentration entries must be > 0");
    if (a >= 1.0) {
      std::gamma_distribution<double> gamma(a, 1.0);
      log_g[i] = std::log(gamma(rng));
    } else {
      std::gamma_distribution<double> gamma(a + 1.0, 1.0);
      const double g = gamma(rng);
      const double u = sample_uniform(rng);
      log_g[i] = std::log(g) + std::log(u) / a;
    }
  }
  const double top = log_g.maxCoeff();
  Eigen::VectorXd w = (log_g.array() - top).exp().matrix();
  return w / w.sum();
}

Eigen::VectorXd sample_standard_normal(Rng &rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v[i] = normal(rng);
  return v;
}

double sample_uniform(Rng &rng) {
  // (0, 1): never exactly zero, so logs stay finite.
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  double u = 0.0;
  do {
    u = uniform(rng);
  } while (u <= 0.0);
  return u;
}

} // namespace pmlda
