#include "sirf/model.hpp"

#include "sirf/errors.hpp"
#include "sirf/mixture.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sirf {

std::string_view to_string(Likelihood family) {
    switch (family) {
    case Likelihood::Gaussian: return "gaussian";
    case Likelihood::Bernoulli: return "bernoulli";
    case Likelihood::NegativeBinomial: return "nb";
    case Likelihood::Poisson: return "poisson";
    case Likelihood::Multinomial: return "multinomial";
    }
    return "unknown";
}

Likelihood parse_likelihood(std::string_view name) {
    if (name == "gaussian") return Likelihood::Gaussian;
    if (name == "bernoulli") return Likelihood::Bernoulli;
    if (name == "nb" || name == "negative-binomial") return Likelihood::NegativeBinomial;
    if (name == "poisson") return Likelihood::Poisson;
    if (name == "multinomial") return Likelihood::Multinomial;
    throw std::invalid_argument("unknown likelihood '" + std::string(name) + "'");
}

bool is_count_family(Likelihood family) { return family != Likelihood::Gaussian; }

Index Dataset::observed_count() const { return mask.count(); }

Dataset make_dataset(MatrixXd Y, Likelihood family) {
    Dataset data;
    data.mask = Mask::Constant(Y.rows(), Y.cols(), true);
    data.likelihood = family;
    data.Y = std::move(Y);
    data.row_totals = Eigen::VectorXi::Zero(data.Y.rows());
    if (family == Likelihood::Multinomial) {
        for (Index i = 0; i < data.Y.rows(); ++i)
            data.row_totals(i) = static_cast<int>(std::lround(data.Y.row(i).sum()));
    }
    validate_dataset(data, false);
    return data;
}

void validate_dataset(const Dataset& data, bool require_coverage) {
    if (data.rows() == 0 || data.cols() == 0) throw DataError("empty dataset");
    if (data.mask.rows() != data.rows() || data.mask.cols() != data.cols())
        throw DataError("mask shape does not match the observation matrix");
    for (Index i = 0; i < data.rows(); ++i) {
        for (Index j = 0; j < data.cols(); ++j) {
            const double y = data.Y(i, j);
            std::ostringstream where;
            where << " at row " << i << ", column " << j;
            if (!std::isfinite(y)) throw DataError("non-finite entry" + where.str());
            if (data.likelihood == Likelihood::Gaussian) continue;
            if (y < 0.0) throw DataError("negative count" + where.str());
            if (y != std::floor(y)) throw DataError("fractional count" + where.str());
            if (data.likelihood == Likelihood::Bernoulli && y > 1.0)
                throw DataError("Bernoulli entry outside {0,1}" + where.str());
        }
    }
    if (!require_coverage) return;
    for (Index i = 0; i < data.rows(); ++i)
        if (!data.mask.row(i).any())
            throw DataError("row " + std::to_string(i) + " has no observed entry");
    for (Index j = 0; j < data.cols(); ++j)
        if (!data.mask.col(j).any())
            throw DataError("column " + std::to_string(j) + " has no observed entry");
}

MatrixXd Hyperparameters::niw_scale_matrix(Index dim) const {
    return niw_scale * MatrixXd::Identity(dim, dim);
}

VectorXd Hyperparameters::weight_prior_mean() const {
    VectorXd m = VectorXd::Constant(feature_count(), weight_mean);
    return m;
}

VectorXd Hyperparameters::weight_prior_var() const {
    VectorXd v = VectorXd::Constant(feature_count(), weight_var);
    v(feature_count() - 1) = intercept_var;
    return v;
}

void validate_hyperparameters(const Hyperparameters& hp) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw std::invalid_argument(std::string(name) + " must be positive");
    };
    if (hp.num_features < 1) throw std::invalid_argument("num_features must be >= 1");
    positive(hp.ibp_shape, "ibp_shape");
    positive(hp.ibp_rate, "ibp_rate");
    positive(hp.dp_shape, "dp_shape");
    positive(hp.dp_rate, "dp_rate");
    positive(hp.niw_precision, "niw_precision");
    positive(hp.niw_dof, "niw_dof");
    positive(hp.niw_scale, "niw_scale");
    positive(hp.weight_var, "weight_var");
    positive(hp.intercept_var, "intercept_var");
    positive(hp.noise_shape, "noise_shape");
    positive(hp.noise_rate, "noise_rate");
    positive(hp.dispersion_shape, "dispersion_shape");
    positive(hp.dispersion_rate, "dispersion_rate");
}

MatrixXd ModelState::masked_latent() const { return X.cwiseProduct(Z.cast<double>()); }

ModelState init_state(const Dataset& data, const Hyperparameters& hp, std::uint64_t seed,
                      int d_init) {
    if (data.rows() == 0 || data.cols() == 0) throw DataError("empty dataset");
    if (d_init < 1) throw std::invalid_argument("d_init must be >= 1");
    validate_hyperparameters(hp);

    Rng rng = Rng(seed).split(tag(Stream::Init));
    const Index n = data.rows();
    const Index j = data.cols();
    const Index m = hp.num_features;
    const Index d = d_init;

    ModelState s;
    s.ibp_alpha = rng.gamma(hp.ibp_shape, hp.ibp_rate);
    s.dp_eta = rng.gamma(hp.dp_shape, hp.dp_rate);

    s.X.resize(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < d; ++k) s.X(i, k) = rng.normal();
    s.Z = BinaryMatrix::Ones(n, d);

    s.pi.resize(d);
    double stick = 1.0;
    for (Index k = 0; k < d; ++k) {
        stick *= rng.beta(s.ibp_alpha, 1.0);
        stick = std::max(stick, 1e-300);
        if (k > 0 && stick >= s.pi(k - 1)) stick = std::nextafter(s.pi(k - 1), 0.0);
        s.pi(k) = stick;
    }

    s.W.resize(m, d);
    for (Index r = 0; r < m; ++r)
        for (Index k = 0; k < d; ++k) s.W(r, k) = rng.normal();
    s.zeta.assign(static_cast<std::size_t>(m), 0);
    s.clusters.resize(1);
    resample_locations(s, hp, rng);

    const VectorXd b_mean = hp.weight_prior_mean();
    const VectorXd b_sd = hp.weight_prior_var().cwiseSqrt();
    s.beta.resize(hp.feature_count(), j);
    for (Index c = 0; c < j; ++c)
        for (Index p = 0; p < hp.feature_count(); ++p)
            s.beta(p, c) = b_mean(p) + b_sd(p) * rng.normal();
    s.beta.row(hp.feature_count() - 1).setZero(); // intercept starts at 0
    if (data.likelihood == Likelihood::Multinomial) s.beta.col(j - 1).setZero();

    s.noise_var.resize(j);
    s.dispersion.resize(j);
    for (Index c = 0; c < j; ++c) {
        s.noise_var(c) = 1.0 / rng.gamma(hp.noise_shape, hp.noise_rate);
        s.dispersion(c) = rng.gamma(hp.dispersion_shape, hp.dispersion_rate);
    }
    return s;
}

namespace {

template <class Mat>
Mat select_columns(const Mat& m, const std::vector<Index>& keep) {
    Mat out(m.rows(), static_cast<Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) out.col(static_cast<Index>(k)) = m.col(keep[k]);
    return out;
}

void select_dimensions(ModelState& s, const std::vector<Index>& keep) {
    s.X = select_columns(s.X, keep);
    s.Z = select_columns(s.Z, keep);
    s.W = select_columns(s.W, keep);
    VectorXd pi(static_cast<Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) pi(static_cast<Index>(k)) = s.pi(keep[k]);
    s.pi = std::move(pi);
    for (auto& c : s.clusters) {
        VectorXd mean(static_cast<Index>(keep.size()));
        MatrixXd cov(static_cast<Index>(keep.size()), static_cast<Index>(keep.size()));
        for (std::size_t a = 0; a < keep.size(); ++a) {
            mean(static_cast<Index>(a)) = c.mean(keep[a]);
            for (std::size_t b = 0; b < keep.size(); ++b)
                cov(static_cast<Index>(a), static_cast<Index>(b)) = c.cov(keep[a], keep[b]);
        }
        c.mean = std::move(mean);
        c.cov = std::move(cov);
    }
}

} // namespace

Index prune_inactive(ModelState& state) {
    std::vector<Index> keep;
    for (Index k = 0; k < state.d_plus(); ++k)
        if (state.Z.col(k).sum() > 0) keep.push_back(k);
    const Index removed = state.d_plus() - static_cast<Index>(keep.size());
    if (removed > 0) select_dimensions(state, keep);
    return removed;
}

void permute_dimensions(ModelState& state, const std::vector<Index>& order) {
    if (static_cast<Index>(order.size()) != state.d_plus())
        throw std::invalid_argument("permutation length does not match D+");
    select_dimensions(state, order);
}

void sort_by_weight(ModelState& state) {
    std::vector<Index> order(static_cast<std::size_t>(state.d_plus()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return state.pi(a) > state.pi(b); });
    if (!std::is_sorted(order.begin(), order.end())) permute_dimensions(state, order);
}

void validate_state(const ModelState& s, const Dataset& data, const Hyperparameters& hp) {
    auto fail = [](const std::string& what) { throw InvariantError(what); };
    const Index d = s.d_plus();
    if (s.X.rows() != data.rows() || s.Z.rows() != data.rows()) fail("X/Z row count != N");
    if (s.Z.cols() != d || s.W.cols() != d || s.pi.size() != d) fail("D+ mismatch across X, Z, W, pi");
    if (s.W.rows() != hp.num_features) fail("W row count != M");
    if (s.beta.rows() != hp.feature_count() || s.beta.cols() != data.cols()) fail("beta shape");
    for (Index k = 0; k < d; ++k) {
        if (!(s.pi(k) > 0.0 && s.pi(k) < 1.0)) fail("stick weight outside (0,1)");
        if (k > 0 && !(s.pi(k) < s.pi(k - 1))) fail("stick weights not strictly decreasing");
        if (s.Z.col(k).sum() < 1) fail("inactive dimension " + std::to_string(k) + " not pruned");
    }
    if ((s.Z.array() != 0 && s.Z.array() != 1).any()) fail("Z is not binary");
    if (!s.X.allFinite() || !s.W.allFinite()) fail("non-finite X or W");
    if (static_cast<Index>(s.zeta.size()) != hp.num_features) fail("zeta length != M");
    std::vector<int> counts(s.clusters.size(), 0);
    for (int z : s.zeta) {
        if (z < 0 || z >= static_cast<int>(s.clusters.size())) fail("cluster label out of range");
        ++counts[static_cast<std::size_t>(z)];
    }
    for (std::size_t k = 0; k < s.clusters.size(); ++k) {
        const auto& c = s.clusters[k];
        if (counts[k] == 0) fail("empty cluster retained");
        if (c.mean.size() != d || c.cov.rows() != d || c.cov.cols() != d) fail("cluster dimension");
        if (d > 0) {
            if (!c.cov.isApprox(c.cov.transpose(), 1e-9)) fail("cluster covariance not symmetric");
            Eigen::LLT<MatrixXd> llt(c.cov);
            if (llt.info() != Eigen::Success) fail("cluster covariance not positive definite");
        }
    }
    if (!(s.ibp_alpha > 0.0) || !(s.dp_eta > 0.0)) fail("non-positive concentration");
    if (data.likelihood == Likelihood::Multinomial && !s.beta.col(data.cols() - 1).isZero(0.0))
        fail("reference multinomial column has non-zero weights");
}

} // namespace sirf
