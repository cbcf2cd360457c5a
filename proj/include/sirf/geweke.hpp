#pragma once

#include "sirf/model.hpp"
#include "sirf/rng.hpp"
#include "sirf/sampler.hpp"

#include <string>
#include <vector>

namespace sirf {

/// Draws every latent quantity from the prior: Z from the IBP, active
/// weights from their conditional given Z, a CRP partition of the
/// frequencies, NIW cluster locations and frequencies, beta and the family
/// extras.
ModelState sample_prior_state(Index n, Index cols, Likelihood family, const Hyperparameters& hp, Rng& rng);

/// Redraws data.Y from p(Y | state). For Gaussian data the collapsed
/// (beta, sigma^2) are drawn from their prior first and written to the state.
void simulate_data(ModelState& state, Dataset& data, const Hyperparameters& hp, Rng& rng);

/// Prior tail P(D+ > cap) for N rows: D+ | alpha ~ Poisson(alpha H_N) with
/// alpha ~ Gamma(shape, rate), i.e. negative binomial.
double prior_dplus_tail(Index cap, Index n, double shape, double rate);

struct GewekeShape {
    Index n = 4;
    Index cols = 2;
    int features = 2;
};

struct GewekeConfig {
    GewekeShape shape;
    Likelihood family = Likelihood::Gaussian;
    int iters = 20000; ///< forward draws and chain sweeps each
    std::uint64_t seed = 1;
    int batches = 50;
    /// The chain is stopped once D+ exceeds this; the report is then marked diverged.
    Index max_dimensions = 60;
    SweepOptions sweep;
};

struct GewekeStatistic {
    std::string name;
    double forward_mean = 0.0;
    double forward_se = 0.0;
    double chain_mean = 0.0;
    double chain_se = 0.0;
    double z = 0.0;
    double p_value = 1.0;
};

struct GewekeReport {
    bool valid = false;
    bool diverged = false;
    int chain_samples = 0;
    std::vector<GewekeStatistic> stats;
    /// True when the report is valid and every p-value exceeds `level`.
    bool passed(double level = 0.01) const;
    double min_p_value() const;
};

/// Compares marginal-conditional (forward) and successive-conditional
/// simulation of the joint on D+, mean(pi), alpha, eta, mean(X^2) and the
/// training log-likelihood. Chain standard errors use batch means. The
/// chain starts from a forward draw, so it needs no burn-in. If the chain
/// exceeds `max_dimensions` the D+ p-value is bounded by
/// samples * prior_dplus_tail(max_dimensions).
GewekeReport geweke_check(const Hyperparameters& hp, const GewekeConfig& config);

} // namespace sirf
