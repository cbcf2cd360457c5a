#pragma once

#include "sirf/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sirf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
using BinaryMatrix = Eigen::MatrixXi;

enum class Likelihood { Gaussian, Bernoulli, NegativeBinomial, Poisson, Multinomial };

std::string_view to_string(Likelihood family);
/// Accepts the CLI spellings: gaussian, bernoulli, nb, poisson, multinomial.
Likelihood parse_likelihood(std::string_view name);
bool is_count_family(Likelihood family);

/// Observed matrix, its training mask (true = observed) and the declared family.
struct Dataset {
    MatrixXd Y;
    Mask mask;
    Likelihood likelihood = Likelihood::Gaussian;
    /// n_i = sum_j y_ij over every entry of the row (multinomial only).
    Eigen::VectorXi row_totals;

    Index rows() const { return Y.rows(); }
    Index cols() const { return Y.cols(); }
    Index observed_count() const;
};

/// Builds a dataset with an all-true mask and checks the entry domain.
Dataset make_dataset(MatrixXd Y, Likelihood family);
/// Throws DataError on domain violations; optionally also on rows or columns
/// without a single observed entry.
void validate_dataset(const Dataset& data, bool require_coverage = true);

struct Hyperparameters {
    int num_features = 50; ///< M
    double ibp_shape = 1.0; ///< alpha0
    double ibp_rate = 1.0;  ///< beta0
    double dp_shape = 1.0;  ///< a_eta
    double dp_rate = 1.0;   ///< b_eta
    /// Normal-inverse-Wishart base measure over frequency clusters. The mean
    /// and scale are isotropic so they exist for every latent dimension; the
    /// Wishart degrees of freedom at dimension D are niw_dof + D - 1.
    double niw_mean = 0.0;
    double niw_precision = 1.0; ///< lambda0
    double niw_dof = 3.0;
    double niw_scale = 1.0;
    /// beta_j ~ N(weight_mean, B0) with B0 = diag(weight_var, ..., intercept_var).
    double weight_mean = 0.0;
    double weight_var = 1.0;
    double intercept_var = 1.0;
    double noise_shape = 1.0; ///< a0
    double noise_rate = 1.0;  ///< b0
    double dispersion_shape = 1.0; ///< e0
    double dispersion_rate = 1.0;  ///< f0

    Index feature_count() const { return 2 * static_cast<Index>(num_features) + 1; }
    double niw_dof_at(Index dim) const { return niw_dof + static_cast<double>(dim) - 1.0; }
    VectorXd niw_mean_vector(Index dim) const { return VectorXd::Constant(dim, niw_mean); }
    MatrixXd niw_scale_matrix(Index dim) const;
    VectorXd weight_prior_mean() const;
    VectorXd weight_prior_var() const;
};

void validate_hyperparameters(const Hyperparameters& hp);

struct Cluster {
    VectorXd mean;
    MatrixXd cov;
};

/// Every latent quantity of one chain.
struct ModelState {
    MatrixXd X;    ///< N x D+ latent coordinates
    BinaryMatrix Z; ///< N x D+ sparsity indicators
    VectorXd pi;   ///< D+ stick weights, strictly decreasing
    MatrixXd W;    ///< M x D+ random frequencies
    std::vector<int> zeta;          ///< cluster label per frequency
    std::vector<Cluster> clusters;  ///< occupied clusters only
    MatrixXd beta; ///< (2M+1) x J regression weights, intercept last
    double ibp_alpha = 1.0;
    double dp_eta = 1.0;
    VectorXd noise_var;  ///< sigma_j^2 (Gaussian, instantiated on demand)
    VectorXd dispersion; ///< r_j (negative binomial)

    Index d_plus() const { return X.cols(); }
    Index k_plus() const { return static_cast<Index>(clusters.size()); }
    /// X .* Z
    MatrixXd masked_latent() const;
};

ModelState init_state(const Dataset& data, const Hyperparameters& hp, std::uint64_t seed,
                      int d_init);

/// Drops every dimension whose Z column is all zero. Returns the number of
/// removed dimensions; a result with d_plus() == 0 needs re-extension.
Index prune_inactive(ModelState& state);

/// Reorders dimensions so that `order[k]` becomes dimension k.
void permute_dimensions(ModelState& state, const std::vector<Index>& order);

/// Sorts dimensions by decreasing stick weight.
void sort_by_weight(ModelState& state);

/// Throws InvariantError when a structural invariant is broken.
void validate_state(const ModelState& state, const Dataset& data, const Hyperparameters& hp);

/// Per-snapshot predictive parameters, independent of the model that made them.
struct Snapshot {
    Likelihood likelihood = Likelihood::Gaussian;
    MatrixXd psi;        ///< N x J linear predictor
    VectorXd noise_var;  ///< Gaussian
    VectorXd dispersion; ///< negative binomial
};

struct ChainRecord {
    int iteration = 0;
    Index d_plus = 0;
    Index k_plus = 0;
    double train_loglik = 0.0;
    std::optional<Snapshot> snapshot;
};

} // namespace sirf
