#pragma once

#include "sirf/model.hpp"
#include "sirf/sampler.hpp"

#include <vector>

namespace sirf {

/// Linear-Gaussian IBP latent factor model: y_i ~ N([x_i .* z_i, 1] A, sigma^2 I).
struct LfmState {
    MatrixXd X;
    BinaryMatrix Z;
    VectorXd pi;
    MatrixXd A; ///< (D+ + 1) x J loadings, intercept row last
    double ibp_alpha = 1.0;
    double noise_var = 1.0;

    Index d_plus() const { return X.cols(); }
    MatrixXd design() const; ///< [X .* Z, 1]
};

LfmState init_lfm_state(const Dataset& data, const Hyperparameters& hp, std::uint64_t seed, int d_init);

/// One sweep: latent rows, slice and births, sparsity, pruning and stick
/// weights, IBP concentration, loadings, noise variance.
void lfm_sweep(LfmState& state, const Dataset& data, const Hyperparameters& hp, Rng& rng);

double lfm_train_loglik(const LfmState& state, const Dataset& data);

/// Same record layout as run_chain; K+ is always zero.
std::vector<ChainRecord> run_ibp_lfm(const Dataset& data, const Hyperparameters& hp, const ChainConfig& config);

} // namespace sirf
