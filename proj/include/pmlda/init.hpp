#pragma once

#include "pmlda/core.hpp"
#include "pmlda/corpus.hpp"

#include <Eigen/Core>

namespace pmlda {

inline constexpr double kInitialSigma2 = 1e-3;

/// Deterministic extreme-pixel endmember seeds. The first seed is the pixel of
/// largest norm; each following seed is the pixel whose residual after
/// projection onto the span of the previous seeds is largest. Ties go to the
/// lowest flat index. Returns bands x K, one pixel spectrum per column.
Eigen::MatrixXd orthogonal_projection_endmembers(const Corpus &corpus, Index K);

/// Starting chain state: the given means, sigma2 = 1e-3, uniform pi and z, and
/// s at its prior mean 1/lambda.
ChainState initial_state(const Corpus &corpus, const Hyperparameters &hp,
                         const Eigen::MatrixXd &seeds);

} // namespace pmlda
