#include "sirf/likelihood.hpp"

#include "sirf/errors.hpp"
#include "sirf/kernels.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <numbers>

namespace sirf {

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double pointwise_loglik(double y, double psi, Likelihood family, double theta) {
    switch (family) {
    case Likelihood::Gaussian: {
        const double r = y - psi;
        return -0.5 * std::log(2.0 * std::numbers::pi * theta) - 0.5 * r * r / theta;
    }
    case Likelihood::Bernoulli:
        if (y != 0.0 && y != 1.0) throw DataError("Bernoulli observation outside {0,1}");
        return y * psi - softplus(psi);
    case Likelihood::NegativeBinomial:
        if (y < 0.0) throw DataError("negative count");
        return std::lgamma(y + theta) - std::lgamma(theta) - std::lgamma(y + 1.0) + y * psi -
               (y + theta) * softplus(psi);
    case Likelihood::Poisson:
        if (y < 0.0) throw DataError("negative count");
        return y * psi - std::exp(psi) - std::lgamma(y + 1.0);
    case Likelihood::Multinomial:
        throw std::invalid_argument("pointwise_loglik: multinomial is evaluated per row");
    }
    return 0.0;
}

namespace {

double log_sum_exp(const Eigen::VectorXd& v) {
    const double top = v.maxCoeff();
    return top + std::log((v.array() - top).exp().sum());
}

} // namespace

double multinomial_logpmf(const Eigen::VectorXd& y, const Eigen::VectorXd& psi) {
    const double lse = log_sum_exp(psi);
    double out = std::lgamma(y.sum() + 1.0);
    for (Index j = 0; j < y.size(); ++j) out += y(j) * (psi(j) - lse) - std::lgamma(y(j) + 1.0);
    return out;
}

double multinomial_row_loglik(const Eigen::VectorXd& y, const Eigen::Matrix<bool, Eigen::Dynamic, 1>& mask,
                              const Eigen::VectorXd& psi) {
    double top = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < y.size(); ++j)
        if (mask(j)) top = std::max(top, psi(j));
    double total = 0.0;
    for (Index j = 0; j < y.size(); ++j)
        if (mask(j)) total += std::exp(psi(j) - top);
    const double lse = top + std::log(total);
    double out = 0.0;
    for (Index j = 0; j < y.size(); ++j)
        if (mask(j)) out += y(j) * (psi(j) - lse);
    return out;
}

namespace {

struct NigPosterior {
    Eigen::LLT<MatrixXd> chol;
    VectorXd mean;
    double shape = 0.0;
    double rate = 0.0;
    double logdet = 0.0;
    Index n = 0;
};

NigPosterior nig_posterior(const FeatureMatrix& phi, const VectorXd& y,
                           const Eigen::Matrix<bool, Eigen::Dynamic, 1>& observed, const Hyperparameters& hp) {
    const Index p = phi.cols();
    if (p != hp.feature_count() || phi.rows() != y.size() || observed.size() != y.size())
        throw std::invalid_argument("Gaussian column posterior: shape mismatch");
    const VectorXd prior_prec = hp.weight_prior_var().cwiseInverse();
    const VectorXd prior_mean = hp.weight_prior_mean();
    MatrixXd a = prior_prec.asDiagonal();
    VectorXd rhs = prior_prec.cwiseProduct(prior_mean);
    double yy = prior_mean.dot(rhs);
    Index n = 0;
    for (Index i = 0; i < phi.rows(); ++i) {
        if (!observed(i)) continue;
        ++n;
        a.selfadjointView<Eigen::Lower>().rankUpdate(phi.row(i).transpose());
        rhs += y(i) * phi.row(i).transpose();
        yy += y(i) * y(i);
    }
    a = a.selfadjointView<Eigen::Lower>();
    NigPosterior post;
    post.n = n;
    post.chol.compute(a);
    if (post.chol.info() != Eigen::Success) throw NumericalError("collapsed Gaussian: posterior precision not SPD");
    post.mean = post.chol.solve(rhs);
    post.logdet = 2.0 * post.chol.matrixLLT().diagonal().array().log().sum();
    post.shape = hp.noise_shape + 0.5 * static_cast<double>(n);
    post.rate = hp.noise_rate + 0.5 * std::max(yy - rhs.dot(post.mean), 0.0);
    return post;
}

} // namespace

double gaussian_collapsed_loglik(const FeatureMatrix& phi, const VectorXd& y,
                                 const Eigen::Matrix<bool, Eigen::Dynamic, 1>& observed,
                                 const Hyperparameters& hp) {
    if (!observed.any()) return 0.0;
    const NigPosterior post = nig_posterior(phi, y, observed, hp);
    const double prior_logdet_prec = -hp.weight_prior_var().array().log().sum();
    return -0.5 * static_cast<double>(post.n) * std::log(2.0 * std::numbers::pi) + 0.5 * prior_logdet_prec -
           0.5 * post.logdet + hp.noise_shape * std::log(hp.noise_rate) - post.shape * std::log(post.rate) +
           std::lgamma(post.shape) - std::lgamma(hp.noise_shape);
}

std::vector<PgTerms> pg_column_terms(const Dataset& data, Index j, const MatrixXd& psi,
                                     const VectorXd& dispersion) {
    std::vector<PgTerms> terms(static_cast<std::size_t>(data.rows()));
    for (Index i = 0; i < data.rows(); ++i) {
        if (!data.mask(i, j)) continue;
        PgTerms& t = terms[static_cast<std::size_t>(i)];
        const double y = data.Y(i, j);
        switch (data.likelihood) {
        case Likelihood::Bernoulli:
            t.a = y;
            t.b = 1.0;
            break;
        case Likelihood::NegativeBinomial:
            t.a = y;
            t.b = y + dispersion(j);
            break;
        case Likelihood::Multinomial: {
            double total = 0.0;
            double top = -std::numeric_limits<double>::infinity();
            bool others = false;
            for (Index k = 0; k < data.cols(); ++k) {
                if (!data.mask(i, k)) continue;
                total += data.Y(i, k);
                if (k != j) {
                    others = true;
                    top = std::max(top, psi(i, k));
                }
            }
            if (!others || total <= 0.0) break;
            double acc = 0.0;
            for (Index k = 0; k < data.cols(); ++k)
                if (data.mask(i, k) && k != j) acc += std::exp(psi(i, k) - top);
            t.a = y;
            t.b = total;
            t.offset = top + std::log(acc);
            break;
        }
        default:
            throw std::invalid_argument("Polya-Gamma update requires Bernoulli, NB or multinomial");
        }
    }
    return terms;
}

PgUpdate update_weights_pg(const FeatureMatrix& phi, const Dataset& data, Index j, const MatrixXd& psi,
                           const VectorXd& dispersion, const Hyperparameters& hp, Rng& rng) {
    const auto terms = pg_column_terms(data, j, psi, dispersion);
    const Index p = phi.cols();
    if (p != hp.feature_count() || phi.rows() != data.rows())
        throw std::invalid_argument("Polya-Gamma update: shape mismatch");
    const VectorXd prior_prec = hp.weight_prior_var().cwiseInverse();
    MatrixXd precision = prior_prec.asDiagonal();
    VectorXd rhs = prior_prec.cwiseProduct(hp.weight_prior_mean());
    PgUpdate out;
    out.omega = VectorXd::Zero(data.rows());
    for (Index i = 0; i < data.rows(); ++i) {
        const PgTerms& t = terms[static_cast<std::size_t>(i)];
        if (!(t.b > 0.0)) continue;
        const double w = pg_draw(t.b, psi(i, j) - t.offset, rng);
        out.omega(i) = w;
        precision.selfadjointView<Eigen::Lower>().rankUpdate(phi.row(i).transpose(), w);
        rhs += (t.tau() + w * t.offset) * phi.row(i).transpose();
    }
    precision = precision.selfadjointView<Eigen::Lower>();
    Eigen::LLT<MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) throw NumericalError("Polya-Gamma update: singular posterior precision");
    const VectorXd mean = llt.solve(rhs);
    out.beta = mean + llt.matrixU().solve(rng.normal_vector(p));
    return out;
}

double update_nb_dispersion(const Dataset& data, Index j, const VectorXd& psi_col, double r,
                            const Hyperparameters& hp, Rng& rng) {
    double tables = 0.0;
    double rate = hp.dispersion_rate;
    for (Index i = 0; i < data.rows(); ++i) {
        if (!data.mask(i, j)) continue;
        tables += static_cast<double>(crt_draw(std::lround(data.Y(i, j)), r, rng));
        rate += softplus(psi_col(i));
    }
    return rng.gamma(hp.dispersion_shape + tables, rate);
}

VectorXd update_weights_poisson(const FeatureMatrix& phi, const Dataset& data, Index j, const VectorXd& beta,
                                const Hyperparameters& hp, Rng& rng) {
    const VectorXd prior_mean = hp.weight_prior_mean();
    const VectorXd prior_sd = hp.weight_prior_var().cwiseSqrt();
    std::vector<Index> rows;
    for (Index i = 0; i < data.rows(); ++i)
        if (data.mask(i, j)) rows.push_back(i);
    auto loglik = [&](const VectorXd& offset) {
        const VectorXd b = prior_mean + offset;
        double out = 0.0;
        for (Index i : rows) {
            const double eta = phi.row(i).dot(b);
            const double y = data.Y(i, j);
            out += y * eta - std::exp(eta) - std::lgamma(y + 1.0);
        }
        return out;
    };
    auto prior_draw = [&](Rng& r) -> VectorXd { return prior_sd.cwiseProduct(r.normal_vector(prior_sd.size())); };
    const VectorXd offset = beta - prior_mean;
    return prior_mean + elliptical_slice(offset, loglik(offset), prior_draw, loglik, rng).state;
}

GaussianTheta update_gaussian_theta(const FeatureMatrix& phi, const Dataset& data, Index j,
                                    const Hyperparameters& hp, Rng& rng) {
    const Eigen::Matrix<bool, Eigen::Dynamic, 1> observed = data.mask.col(j);
    const VectorXd y = data.Y.col(j);
    const NigPosterior post = nig_posterior(phi, y, observed, hp);
    GaussianTheta out;
    out.noise_var = 1.0 / rng.gamma(post.shape, post.rate);
    out.beta = post.mean + std::sqrt(out.noise_var) * post.chol.matrixU().solve(rng.normal_vector(phi.cols()));
    return out;
}

} // namespace sirf
