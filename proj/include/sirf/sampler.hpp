#pragma once

#include "sirf/engine.hpp"
#include "sirf/model.hpp"
#include "sirf/rng.hpp"

#include <cstdint>
#include <vector>

namespace sirf {

struct SweepOptions {
    /// Run the frequency proposals before the sparsity update instead of after.
    bool frequencies_first = false;
    /// Test-only: swaps the Beta shapes of the stick-weight update.
    bool swap_active_weight_beta = false;
    /// Run validate_state after the sweep.
    bool validate = false;
};

struct SweepStats {
    Index born = 0;
    Index pruned = 0;
    int frequency_accepts = 0;
};

/**
 * One full Gibbs sweep: latent rows, slice, dimension birth, sparsity,
 * pruning and stick weights, IBP concentration, frequencies, cluster
 * assignment and locations, DP concentration, then the family-specific
 * regression and dispersion updates.
 *
 * On any exception the state is restored to its pre-sweep value and the
 * exception is rethrown.
 */
SweepStats gibbs_sweep(ModelState& state, const Dataset& data, const Hyperparameters& hp,
                       LikelihoodEngine& engine, Rng& rng, const SweepOptions& options = {});

/// Family-specific beta / dispersion draws given the engine's features.
/// Columns use independent streams split from `rng` so the result does not
/// depend on the thread count.
void update_regression(ModelState& state, const Dataset& data, const Hyperparameters& hp,
                       const FeatureMatrix& phi, const Rng& rng, bool parallel);

/// Instantiated predictive parameters for scoring. Gaussian columns draw
/// (beta, sigma^2) from their conditional posterior.
Snapshot make_snapshot(const ModelState& state, const Dataset& data, const Hyperparameters& hp,
                       const FeatureMatrix& phi, const Rng& rng, bool parallel);

struct ChainConfig {
    int iters = 100;
    int burnin = 50;
    int thin = 1;
    std::uint64_t seed = 0;
    int d_init = 2;
    bool parallel = true;
    SweepOptions sweep;
};

/// Records every iteration (1-based) and keeps a snapshot for iterations
/// after burn-in on the thinning grid.
std::vector<ChainRecord> run_chain(const Dataset& data, const Hyperparameters& hp, const ChainConfig& config);

} // namespace sirf
