#pragma once

#include "sirf/model.hpp"
#include "sirf/rng.hpp"
#include "sirf/row_model.hpp"

#include <vector>

namespace sirf {

/// Slice variable of the stick-breaking sampler: s ~ U(0, pi_star).
struct SliceState {
    double s = 0.0;
    double pi_star = 1.0;
};

/// Sequential IBP (customer i takes dish d w.p. n_d / i, then Poisson(alpha / i) new dishes).
BinaryMatrix ibp_prior_draw(Index n, double alpha, Rng& rng);

double harmonic_number(Index n);

/// pi* = min{1, min over active d of pi_d}.
double min_active_weight(const BinaryMatrix& Z, const VectorXd& pi);
SliceState draw_slice(const BinaryMatrix& Z, const VectorXd& pi, Rng& rng);

struct SparsityPrior {
    bool feasible = true; ///< false when z_id = 1 would push pi* below the slice
    double log_odds = 0.0; ///< log p(z_id = 1 | rest) - log p(z_id = 0 | rest), likelihood excluded
};

/// Prior and slice terms of the z_id update given the column counts (which
/// include the current value of z_id).
SparsityPrior sparsity_prior(const VectorXd& pi, const Eigen::VectorXi& counts, Index d, int current, double s);

/// Gibbs pass over every z_id, including the pi* correction whenever a flip
/// changes the smallest active weight. Throws NumericalError on a non-finite
/// likelihood, naming the offending entry.
void sample_sparsity_indicators(BinaryMatrix& Z, const Eigen::MatrixXd& X, const VectorXd& pi,
                                const SliceState& slice, RowModel& model, Rng& rng);

/// pi_d ~ Beta(n_d, 1 + N - n_d). `swap_parameters` flips the two shapes; it
/// exists only so the joint-distribution test can demonstrate it catches the bug.
VectorXd resample_active_weights(const BinaryMatrix& Z, Rng& rng, bool swap_parameters = false);

/// Cumulative intensity of the inactive-feature Poisson process above pi:
/// alpha * (-log pi - sum_{i=1..N} (1 - pi)^i / i).
double inactive_mass_above(double pi, Index n, double alpha);

/// Weights of the inactive features above the slice, in decreasing order,
/// starting from 1. Each weight has density proportional to
/// exp(alpha sum_i (1-p)^i / i) p^(alpha-1) (1-p)^N below its predecessor.
std::vector<double> draw_inactive_weights(double slice, Index n, double alpha, Rng& rng);

/// Instantiates every inactive feature with weight above the slice: new Z
/// columns are zero, X and W get prior coordinates and each cluster's (mu,
/// Sigma) is extended. Returns the number of added dimensions.
Index extend_dimensions(ModelState& state, const SliceState& slice, const Hyperparameters& hp,
                        Index n, Rng& rng);

/// alpha | Z ~ Gamma(alpha0 + D+, beta0 + H_N).
double sample_ibp_concentration(Index d_plus, Index n, double shape, double rate, Rng& rng);

} // namespace sirf
