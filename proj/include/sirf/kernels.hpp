#pragma once

#include "sirf/rng.hpp"

#include <Eigen/Core>

#include <functional>

namespace sirf {

using VectorLogDensity = std::function<double(const Eigen::VectorXd&)>;
using ScalarLogDensity = std::function<double(double)>;
using PriorDraw = std::function<Eigen::VectorXd(Rng&)>;

struct EssResult {
    Eigen::VectorXd state;
    double loglik = 0.0;
    int proposals = 0;
};

/**
 * One elliptical slice sampling transition for a target proportional to
 * N(0, C) x exp(loglik). `prior_draw` returns a draw from N(0, C); the
 * current log-likelihood is passed in so callers can reuse it.
 *
 * Throws NumericalError if the angle bracket shrinks to nothing, which only
 * happens for non-finite or discontinuous likelihoods.
 */
EssResult elliptical_slice(const Eigen::VectorXd& current, double current_loglik,
                           const PriorDraw& prior_draw, const VectorLogDensity& loglik, Rng& rng);

/// ESS with the prior given by its lower Cholesky factor.
Eigen::VectorXd elliptical_slice_step(const Eigen::VectorXd& current,
                                      const Eigen::MatrixXd& prior_cov_chol,
                                      const VectorLogDensity& loglik, Rng& rng);

/// One shrinkage slice-sampling transition on (lower, upper) started from the
/// full interval. Throws NumericalError if logDensity(init) is not finite or
/// the bracket fails to produce a point after `max_shrink` contractions.
double slice_sample_univariate(const ScalarLogDensity& log_density, double lower, double upper,
                               double init, Rng& rng, int max_shrink = 200);

} // namespace sirf
