#pragma once

#include "sirf/model.hpp"
#include "sirf/rng.hpp"

#include <Eigen/Core>

#include <vector>

namespace sirf {

/// Sufficient statistics of the frequencies assigned to one cluster.
struct ClusterSummary {
    Index count = 0;
    VectorXd sum;
    MatrixXd outer; ///< sum of w w^T

    explicit ClusterSummary(Index dim = 0);
    void add(const VectorXd& w);
    void remove(const VectorXd& w);
    VectorXd mean() const;
    /// Scatter about the member mean.
    MatrixXd scatter() const;
};

/// Normal-inverse-Wishart posterior (mu', lambda', nu', Psi').
struct NiwPosterior {
    VectorXd mean;
    double precision = 1.0;
    double dof = 1.0;
    MatrixXd scale;
};

struct StudentT {
    VectorXd location;
    MatrixXd scale;
    double dof = 1.0;
};

NiwPosterior niw_posterior(const ClusterSummary& summary, const Hyperparameters& hp);
/// Collapsed predictive for one more member of the cluster.
StudentT posterior_predictive(const NiwPosterior& post);

double student_t_logpdf(const VectorXd& w, const VectorXd& mu, const MatrixXd& sigma, double dof);
double mvn_logpdf(const VectorXd& w, const VectorXd& mu, const MatrixXd& sigma);

MatrixXd sample_inverse_wishart(const MatrixXd& scale, double dof, Rng& rng);
VectorXd sample_mvn(const VectorXd& mean, const MatrixXd& cov, Rng& rng);
Cluster sample_niw(const NiwPosterior& post, Rng& rng);

/// Likelihood hook for Metropolis moves on a single frequency.
class FrequencyModel {
  public:
    virtual ~FrequencyModel() = default;
    /// Log-likelihood change if frequency m were replaced by w. The candidate
    /// is held until accept_frequency() or the next call.
    virtual double frequency_delta(Index m, const VectorXd& w) = 0;
    virtual void accept_frequency() = 0;
};

double mh_acceptance_probability(double loglik_delta);

/// Independence Metropolis step for w_m with its cluster prior as proposal.
bool propose_frequency(ModelState& state, Index m, FrequencyModel& model, Rng& rng);

/// Collapsed CRP Gibbs pass over every zeta_m. Empty clusters are dropped and
/// new clusters receive a prior draw of (mu, Sigma).
void assign_clusters(ModelState& state, const Hyperparameters& hp, Rng& rng);

/// Draws every (mu_k, Sigma_k) from its conjugate posterior.
void resample_locations(ModelState& state, const Hyperparameters& hp, Rng& rng);

/// Auxiliary-variable update for the DP concentration: draw a Beta latent, then eta from a two-component Gamma mixture.
double sample_dp_concentration(Index k_plus, Index num_frequencies, double shape, double rate,
                               double eta, Rng& rng);

/// Appends one coordinate to every cluster and frequency, drawn from the
/// prior conditional on the existing coordinates.
void extend_mixture_dimension(ModelState& state, const Hyperparameters& hp, Rng& rng);

std::vector<ClusterSummary> summarize_clusters(const ModelState& state);

} // namespace sirf
