#include "sirf/mixture.hpp"

#include "sirf/errors.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>

namespace sirf {

ClusterSummary::ClusterSummary(Index dim) : sum(VectorXd::Zero(dim)), outer(MatrixXd::Zero(dim, dim)) {}

void ClusterSummary::add(const VectorXd& w) {
    ++count;
    sum += w;
    outer.noalias() += w * w.transpose();
}

void ClusterSummary::remove(const VectorXd& w) {
    --count;
    sum -= w;
    outer.noalias() -= w * w.transpose();
}

VectorXd ClusterSummary::mean() const {
    return count > 0 ? VectorXd(sum / static_cast<double>(count)) : VectorXd::Zero(sum.size());
}

MatrixXd ClusterSummary::scatter() const {
    if (count == 0) return MatrixXd::Zero(sum.size(), sum.size());
    const VectorXd m = mean();
    return outer - static_cast<double>(count) * m * m.transpose();
}

NiwPosterior niw_posterior(const ClusterSummary& s, const Hyperparameters& hp) {
    const Index d = s.sum.size();
    const VectorXd mu0 = hp.niw_mean_vector(d);
    const double n = static_cast<double>(s.count);
    NiwPosterior p;
    p.precision = hp.niw_precision + n;
    p.dof = hp.niw_dof_at(d) + n;
    p.mean = (hp.niw_precision * mu0 + s.sum) / p.precision;
    p.scale = hp.niw_scale_matrix(d);
    if (s.count > 0) {
        const VectorXd diff = s.mean() - mu0;
        p.scale += s.scatter() + (hp.niw_precision * n / p.precision) * diff * diff.transpose();
    }
    return p;
}

StudentT posterior_predictive(const NiwPosterior& post) {
    const Index d = post.mean.size();
    StudentT t;
    t.dof = post.dof - static_cast<double>(d) + 1.0;
    t.location = post.mean;
    t.scale = post.scale * ((post.precision + 1.0) / (post.precision * t.dof));
    return t;
}

double student_t_logpdf(const VectorXd& w, const VectorXd& mu, const MatrixXd& sigma, double dof) {
    if (!(dof > 0.0)) throw std::invalid_argument("student_t_logpdf: dof must be positive");
    const Index d = w.size();
    if (d == 0) return 0.0;
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw NumericalError("student_t_logpdf: scale matrix not SPD");
    const VectorXd r = llt.matrixL().solve(w - mu);
    const double maha = r.squaredNorm();
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double dd = static_cast<double>(d);
    return std::lgamma(0.5 * (dof + dd)) - std::lgamma(0.5 * dof) -
           0.5 * dd * std::log(dof * std::numbers::pi) - 0.5 * logdet -
           0.5 * (dof + dd) * std::log1p(maha / dof);
}

double mvn_logpdf(const VectorXd& w, const VectorXd& mu, const MatrixXd& sigma) {
    const Index d = w.size();
    if (d == 0) return 0.0;
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw NumericalError("mvn_logpdf: covariance not SPD");
    const VectorXd r = llt.matrixL().solve(w - mu);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + logdet + r.squaredNorm());
}

MatrixXd sample_inverse_wishart(const MatrixXd& scale, double dof, Rng& rng) {
    const Index d = scale.rows();
    if (d == 0) return MatrixXd(0, 0);
    if (!(dof > static_cast<double>(d) - 1.0))
        throw NumericalError("inverse Wishart: dof must exceed D - 1");
    // Sigma^{-1} ~ Wishart(scale^{-1}, dof) via the Bartlett decomposition.
    Eigen::LLT<MatrixXd> llt_scale(scale);
    if (llt_scale.info() != Eigen::Success) throw NumericalError("inverse Wishart: scale not SPD");
    const MatrixXd precision_scale = llt_scale.solve(MatrixXd::Identity(d, d));
    Eigen::LLT<MatrixXd> llt(precision_scale);
    MatrixXd a = MatrixXd::Zero(d, d);
    for (Index i = 0; i < d; ++i) {
        a(i, i) = std::sqrt(2.0 * rng.gamma(0.5 * (dof - static_cast<double>(i)), 1.0));
        for (Index j = 0; j < i; ++j) a(i, j) = rng.normal();
    }
    const MatrixXd t = MatrixXd(llt.matrixL()) * a; // lower triangular
    const MatrixXd t_inv = t.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(d, d));
    MatrixXd sigma = t_inv.transpose() * t_inv;
    return 0.5 * (sigma + sigma.transpose());
}

VectorXd sample_mvn(const VectorXd& mean, const MatrixXd& cov, Rng& rng) {
    if (mean.size() == 0) return mean;
    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalError("sample_mvn: covariance not SPD");
    return mean + llt.matrixL() * rng.normal_vector(mean.size());
}

Cluster sample_niw(const NiwPosterior& post, Rng& rng) {
    Cluster c;
    c.cov = sample_inverse_wishart(post.scale, post.dof, rng);
    c.mean = sample_mvn(post.mean, c.cov / post.precision, rng);
    return c;
}

double mh_acceptance_probability(double loglik_delta) {
    return loglik_delta >= 0.0 ? 1.0 : std::exp(loglik_delta);
}

bool propose_frequency(ModelState& state, Index m, FrequencyModel& model, Rng& rng) {
    if (state.d_plus() == 0) return false;
    const Cluster& c = state.clusters[static_cast<std::size_t>(state.zeta[static_cast<std::size_t>(m)])];
    const VectorXd proposal = sample_mvn(c.mean, c.cov, rng);
    const double delta = model.frequency_delta(m, proposal);
    if (!std::isfinite(delta)) throw NumericalError("frequency proposal: non-finite likelihood ratio");
    if (std::log(rng.uniform()) < delta) {
        state.W.row(m) = proposal.transpose();
        model.accept_frequency();
        return true;
    }
    return false;
}

std::vector<ClusterSummary> summarize_clusters(const ModelState& state) {
    std::vector<ClusterSummary> out(state.clusters.size(), ClusterSummary(state.d_plus()));
    for (Index m = 0; m < state.W.rows(); ++m)
        out[static_cast<std::size_t>(state.zeta[static_cast<std::size_t>(m)])].add(state.W.row(m).transpose());
    return out;
}

void assign_clusters(ModelState& state, const Hyperparameters& hp, Rng& rng) {
    const Index d = state.d_plus();
    const Index num = state.W.rows();
    auto summaries = summarize_clusters(state);
    const StudentT prior_pred = posterior_predictive(niw_posterior(ClusterSummary(d), hp));

    std::vector<double> logw;
    for (Index m = 0; m < num; ++m) {
        const VectorXd w = state.W.row(m).transpose();
        auto& label = state.zeta[static_cast<std::size_t>(m)];
        summaries[static_cast<std::size_t>(label)].remove(w);
        if (summaries[static_cast<std::size_t>(label)].count == 0) {
            const int gone = label;
            summaries.erase(summaries.begin() + gone);
            state.clusters.erase(state.clusters.begin() + gone);
            for (auto& z : state.zeta)
                if (z > gone) --z;
            label = -1;
        }
        const std::size_t k_plus = summaries.size();
        logw.assign(k_plus + 1, 0.0);
        for (std::size_t k = 0; k < k_plus; ++k) {
            const StudentT t = posterior_predictive(niw_posterior(summaries[k], hp));
            logw[k] = std::log(static_cast<double>(summaries[k].count)) +
                      student_t_logpdf(w, t.location, t.scale, t.dof);
        }
        logw[k_plus] = std::log(state.dp_eta) +
                       student_t_logpdf(w, prior_pred.location, prior_pred.scale, prior_pred.dof);
        const std::size_t pick = rng.categorical_log(logw);
        if (pick == k_plus) {
            summaries.emplace_back(d);
            state.clusters.push_back(sample_niw(niw_posterior(ClusterSummary(d), hp), rng));
        }
        summaries[pick].add(w);
        label = static_cast<int>(pick);
    }
}

void resample_locations(ModelState& state, const Hyperparameters& hp, Rng& rng) {
    const auto summaries = summarize_clusters(state);
    for (std::size_t k = 0; k < summaries.size(); ++k)
        state.clusters[k] = sample_niw(niw_posterior(summaries[k], hp), rng);
}

double sample_dp_concentration(Index k_plus, Index num_frequencies, double shape, double rate,
                               double eta, Rng& rng) {
    if (k_plus < 1 || num_frequencies < 1)
        throw std::invalid_argument("sample_dp_concentration: need K+ >= 1 and M >= 1");
    const double m = static_cast<double>(num_frequencies);
    const double k = static_cast<double>(k_plus);
    const double rho = rng.beta(eta + 1.0, m);
    const double post_rate = rate - std::log(rho);
    const double odds = (shape + k - 1.0) / (m * post_rate);
    const double weight = odds / (1.0 + odds);
    if (rng.uniform() < weight) return rng.gamma(shape + k, post_rate);
    return rng.gamma(shape + k - 1.0, post_rate);
}

void extend_mixture_dimension(ModelState& state, const Hyperparameters& hp, Rng& rng) {
    // With an isotropic scale the new row/column of Sigma^{-1} is independent
    // of the existing block: Lambda22 ~ Gamma(nu/2, psi/2) and
    // B = Lambda22^{-1} Lambda21 ~ N(0, 1/(psi Lambda22)).
    const Index d = state.W.cols();
    const double nu = hp.niw_dof_at(d + 1);
    const double psi = hp.niw_scale;
    const double mu0 = hp.niw_mean;
    std::vector<VectorXd> regress(state.clusters.size());
    std::vector<double> cond_var(state.clusters.size());
    for (std::size_t k = 0; k < state.clusters.size(); ++k) {
        Cluster& c = state.clusters[k];
        const double lambda22 = rng.gamma(0.5 * nu, 0.5 * psi);
        VectorXd b(d);
        for (Index a = 0; a < d; ++a) b(a) = rng.normal() / std::sqrt(psi * lambda22);
        const VectorXd cross = -(c.cov * b); // Sigma_12
        MatrixXd cov(d + 1, d + 1);
        cov.topLeftCorner(d, d) = c.cov;
        cov.topRightCorner(d, 1) = cross;
        cov.bottomLeftCorner(1, d) = cross.transpose();
        cov(d, d) = 1.0 / lambda22 + b.dot(c.cov * b);
        VectorXd mean(d + 1);
        mean.head(d) = c.mean;
        mean(d) = mu0 - b.dot(c.mean - VectorXd::Constant(d, mu0)) +
                  rng.normal() / std::sqrt(hp.niw_precision * lambda22);
        regress[k] = b;
        cond_var[k] = 1.0 / lambda22;
        c.cov = std::move(cov);
        c.mean = std::move(mean);
    }
    MatrixXd w(state.W.rows(), d + 1);
    w.leftCols(d) = state.W;
    for (Index m = 0; m < state.W.rows(); ++m) {
        const auto k = static_cast<std::size_t>(state.zeta[static_cast<std::size_t>(m)]);
        const Cluster& c = state.clusters[k];
        w(m, d) = c.mean(d) - regress[k].dot(state.W.row(m).transpose() - c.mean.head(d)) +
                  std::sqrt(cond_var[k]) * rng.normal();
    }
    state.W = std::move(w);
}

} // namespace sirf
