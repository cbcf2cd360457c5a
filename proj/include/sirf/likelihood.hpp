#pragma once

#include "sirf/model.hpp"
#include "sirf/rff.hpp"
#include "sirf/rng.hpp"

#include <Eigen/Core>

namespace sirf {

/// Draw from PG(b, c). Exact alternating-series sampler for b = 1, sums of
/// unit draws for small integer b, and a 200-term truncation of the
/// Gamma-series representation with a moment-matched Gamma tail otherwise.
double pg_draw(double b, double c, Rng& rng);

/// Chinese restaurant table count: number of occupied tables after y
/// customers with concentration r.
long crt_draw(long y, double r, Rng& rng);

double logistic(double x);
double softplus(double x); ///< log(1 + e^x)

/// log p(y | psi, theta) for the scalar families. theta is sigma^2 for
/// Gaussian and the dispersion r for negative binomial; ignored otherwise.
/// Multinomial is row-level; see multinomial_logpmf.
double pointwise_loglik(double y, double psi, Likelihood family, double theta = 1.0);

/// Full multinomial log pmf of a count row with softmax(psi) probabilities.
double multinomial_logpmf(const Eigen::VectorXd& y, const Eigen::VectorXd& psi);

/// Training log-likelihood of one multinomial row restricted to its observed
/// categories: sum_{j obs} y_j (psi_j - logsumexp_{k obs} psi_k).
double multinomial_row_loglik(const Eigen::VectorXd& y, const Eigen::Matrix<bool, Eigen::Dynamic, 1>& mask,
                              const Eigen::VectorXd& psi);

/// Log marginal likelihood of the observed entries of one column with
/// beta ~ N(beta0, sigma^2 B0) and sigma^2 ~ InvGamma(a0, b0) integrated out.
double gaussian_collapsed_loglik(const FeatureMatrix& phi, const Eigen::VectorXd& y,
                                 const Eigen::Matrix<bool, Eigen::Dynamic, 1>& observed,
                                 const Hyperparameters& hp);

/// Exponent bookkeeping of the logistic-form likelihood
/// c * exp(psi)^a / (1 + exp(psi))^b, with tau = a - b/2 and the additive
/// offset xi subtracted from psi (multinomial only).
struct PgTerms {
    double a = 0.0;
    double b = 0.0;
    double offset = 0.0;
    double tau() const { return a - 0.5 * b; }
};

/// Terms for every observed entry of column j; entries with b == 0 carry no
/// information and are skipped by the update.
std::vector<PgTerms> pg_column_terms(const Dataset& data, Index j, const Eigen::MatrixXd& psi,
                                     const Eigen::VectorXd& dispersion);

struct PgUpdate {
    Eigen::VectorXd omega; ///< per row; zero where the row was skipped
    Eigen::VectorXd beta;
};

/// omega_ij ~ PG(b_ij, psi_ij - xi_ij) for observed entries, then
/// beta_j ~ N(V (Phi^T (tau + Omega xi) + B0^{-1} beta0), V) with
/// V = (Phi^T Omega Phi + B0^{-1})^{-1}.
PgUpdate update_weights_pg(const FeatureMatrix& phi, const Dataset& data, Index j,
                           const Eigen::MatrixXd& psi, const Eigen::VectorXd& dispersion,
                           const Hyperparameters& hp, Rng& rng);

/// CRT augmentation then r_j ~ Gamma(e0 + sum l, f0 + sum softplus(psi)).
double update_nb_dispersion(const Dataset& data, Index j, const Eigen::VectorXd& psi_col, double r,
                            const Hyperparameters& hp, Rng& rng);

/// One elliptical slice step on beta_j targeting the Poisson log-likelihood
/// of the observed entries of column j.
Eigen::VectorXd update_weights_poisson(const FeatureMatrix& phi, const Dataset& data, Index j,
                                       const Eigen::VectorXd& beta, const Hyperparameters& hp, Rng& rng);

struct GaussianTheta {
    Eigen::VectorXd beta;
    double noise_var = 1.0;
};

/// Conjugate normal-inverse-gamma posterior draw of (beta_j, sigma_j^2).
GaussianTheta update_gaussian_theta(const FeatureMatrix& phi, const Dataset& data, Index j,
                                    const Hyperparameters& hp, Rng& rng);

} // namespace sirf
