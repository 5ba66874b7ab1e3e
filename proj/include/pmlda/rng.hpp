#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace pmlda {

using Rng = std::mt19937_64;

/// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator keyed by (seed, iteration, stream). The same key
/// always yields the same sequence, whichever thread asks for it.
inline Rng substream(std::uint64_t seed, std::uint64_t iteration, std::uint64_t stream) {
  return Rng(mix64(mix64(mix64(seed) ^ iteration) ^ stream));
}

/// Dir(concentration) via normalized Gamma draws.
Eigen::VectorXd sample_dirichlet(Rng &rng, const Eigen::Ref<const Eigen::VectorXd> &concentration);

Eigen::VectorXd sample_standard_normal(Rng &rng, Eigen::Index n);

double sample_uniform(Rng &rng);

} // namespace pmlda
