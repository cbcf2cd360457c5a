#include "sirf/lfm.hpp"

#include "sirf/errors.hpp"
#include "sirf/ibp.hpp"
#include "sirf/row_model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace sirf {

MatrixXd LfmState::design() const {
    MatrixXd f(X.rows(), X.cols() + 1);
    f.leftCols(X.cols()) = X.cwiseProduct(Z.cast<double>());
    f.col(X.cols()).setOnes();
    return f;
}

namespace {

double normal_loglik(double y, double mean, double var) {
    const double r = y - mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * r * r / var;
}

class LinearRows final : public RowModel {
  public:
    LinearRows(const Dataset& data, const LfmState& state) : data_(data), state_(state) {
        psi_ = state.design() * state.A;
    }
    double row_delta(Index i, const VectorXd& v) override {
        const VectorXd next = row_psi(v);
        double out = 0.0;
        for (Index j = 0; j < data_.cols(); ++j) {
            if (!data_.mask(i, j)) continue;
            out += normal_loglik(data_.Y(i, j), next(j), state_.noise_var) -
                   normal_loglik(data_.Y(i, j), psi_(i, j), state_.noise_var);
        }
        return out;
    }
    void commit_row(Index i, const VectorXd& v) override { psi_.row(i) = row_psi(v).transpose(); }

  private:
    VectorXd row_psi(const VectorXd& v) const {
        const Index d = v.size();
        return state_.A.topRows(d).transpose() * v + state_.A.row(d).transpose();
    }
    const Dataset& data_;
    const LfmState& state_;
    MatrixXd psi_;
};

void keep_dimensions(LfmState& s, const std::vector<Index>& keep) {
    const Index d = static_cast<Index>(keep.size());
    MatrixXd X(s.X.rows(), d);
    BinaryMatrix Z(s.Z.rows(), d);
    VectorXd pi(d);
    MatrixXd A(d + 1, s.A.cols());
    for (Index k = 0; k < d; ++k) {
        X.col(k) = s.X.col(keep[static_cast<std::size_t>(k)]);
        Z.col(k) = s.Z.col(keep[static_cast<std::size_t>(k)]);
        pi(k) = s.pi(keep[static_cast<std::size_t>(k)]);
        A.row(k) = s.A.row(keep[static_cast<std::size_t>(k)]);
    }
    A.row(d) = s.A.row(s.A.rows() - 1);
    s.X = std::move(X);
    s.Z = std::move(Z);
    s.pi = std::move(pi);
    s.A = std::move(A);
}

/// Leading principal component scores of the column-centred training data
/// (unobserved entries at their column mean), scaled to unit variance.
MatrixXd principal_scores(const Dataset& data, Index k) {
    MatrixXd c = MatrixXd::Zero(data.rows(), data.cols());
    for (Index j = 0; j < data.cols(); ++j) {
        double sum = 0.0;
        Index cnt = 0;
        for (Index i = 0; i < data.rows(); ++i)
            if (data.mask(i, j)) {
                sum += data.Y(i, j);
                ++cnt;
            }
        const double mean = cnt > 0 ? sum / static_cast<double>(cnt) : 0.0;
        for (Index i = 0; i < data.rows(); ++i)
            if (data.mask(i, j)) c(i, j) = data.Y(i, j) - mean;
    }
    Eigen::BDCSVD<MatrixXd> svd(c, Eigen::ComputeThinU);
    MatrixXd out = MatrixXd::Zero(data.rows(), k);
    const Index avail = std::min(k, svd.matrixU().cols());
    out.leftCols(avail) = svd.matrixU().leftCols(avail) * std::sqrt(static_cast<double>(data.rows()));
    return out;
}

/// Conjugate draws of the loadings (column by column) and then sigma^2.
void update_loadings(LfmState& state, const Dataset& data, const Hyperparameters& hp, Rng& rng) {
    const Index n = data.rows();
    const MatrixXd f = state.design();
    const Index p = f.cols();
    VectorXd prior_prec = VectorXd::Constant(p, 1.0 / hp.weight_var);
    prior_prec(p - 1) = 1.0 / hp.intercept_var;
    for (Index j = 0; j < data.cols(); ++j) {
        Rng col_rng = rng.split({tag(Stream::Loadings), static_cast<std::uint64_t>(j)});
        const VectorXd m = data.mask.col(j).cast<double>();
        MatrixXd prec = f.transpose() * m.asDiagonal() * f / state.noise_var;
        prec.diagonal() += prior_prec;
        const VectorXd rhs = f.transpose() * data.Y.col(j).cwiseProduct(m) / state.noise_var +
                             prior_prec * hp.weight_mean;
        Eigen::LLT<MatrixXd> llt(prec);
        if (llt.info() != Eigen::Success) throw NumericalError("IBP LFM: loading precision not SPD");
        state.A.col(j) = llt.solve(rhs) + llt.matrixU().solve(col_rng.normal_vector(p));
    }

    const MatrixXd resid = data.Y - f * state.A;
    double rss = 0.0;
    Index count = 0;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < data.cols(); ++j)
            if (data.mask(i, j)) {
                rss += resid(i, j) * resid(i, j);
                ++count;
            }
    Rng noise_rng = rng.split(tag(Stream::Noise));
    state.noise_var = 1.0 / noise_rng.gamma(hp.noise_shape + 0.5 * static_cast<double>(count), hp.noise_rate + 0.5 * rss);
}

/// Gibbs pass over (z_id, x_id) jointly: x_id ~ N(0, 1) is integrated out of
/// the z_id update, then redrawn from its conditional (or the prior if off).
void sample_sparsity_collapsed(LfmState& state, const Dataset& data, const SliceState& slice, Rng& rng) {
    const Index n = data.rows();
    const Index dims = state.d_plus();
    const double s2 = state.noise_var;
    Eigen::VectorXi counts = state.Z.colwise().sum().transpose();
    MatrixXd psi = state.design() * state.A;
    for (Index i = 0; i < n; ++i) {
        for (Index d = 0; d < dims; ++d) {
            const int current = state.Z(i, d);
            const SparsityPrior prior = sparsity_prior(state.pi, counts, d, current, slice.s);
            if (!prior.feasible && current == 1) {
                std::ostringstream msg;
                msg << "sparsity update: active weight below slice at (" << i << ", " << d << ")";
                throw NumericalError(msg.str());
            }
            const double old_v = current == 1 ? state.X(i, d) : 0.0;
            double ar = 0.0, aa = 0.0;
            for (Index j = 0; j < data.cols(); ++j) {
                if (!data.mask(i, j)) continue;
                const double a = state.A(d, j);
                ar += a * (data.Y(i, j) - psi(i, j) + old_v * a);
                aa += a * a;
            }
            int next = 0;
            if (prior.feasible) {
                const double log_odds =
                    prior.log_odds - 0.5 * std::log1p(aa / s2) + 0.5 * ar * ar / (s2 * (s2 + aa));
                next = rng.uniform() < 1.0 / (1.0 + std::exp(-log_odds)) ? 1 : 0;
            }
            const double x = next == 1 ? ar / (s2 + aa) + std::sqrt(s2 / (s2 + aa)) * rng.normal() : rng.normal();
            const double new_v = next == 1 ? x : 0.0;
            if (new_v != old_v) psi.row(i) += (new_v - old_v) * state.A.row(d);
            state.X(i, d) = x;
            state.Z(i, d) = next;
            counts(d) += next - current;
        }
    }
}

} // namespace

LfmState init_lfm_state(const Dataset& data, const Hyperparameters& hp, std::uint64_t seed, int d_init) {
    if (data.rows() == 0 || data.cols() == 0) throw DataError("empty dataset");
    if (d_init < 1) throw std::invalid_argument("d_init must be >= 1");
    if (data.likelihood != Likelihood::Gaussian) throw std::invalid_argument("IBP LFM requires Gaussian data");
    Rng rng = Rng(seed).split(tag(Stream::Init));
    LfmState s;
    s.ibp_alpha = rng.gamma(hp.ibp_shape, hp.ibp_rate);
    s.X = principal_scores(data, d_init);
    for (Index i = 0; i < s.X.rows(); ++i)
        for (Index k = 0; k < s.X.cols(); ++k) s.X(i, k) += 0.1 * rng.normal();
    s.Z = BinaryMatrix::Ones(data.rows(), d_init);
    s.pi.resize(d_init);
    double stick = 1.0;
    for (Index k = 0; k < d_init; ++k) {
        stick *= rng.beta(s.ibp_alpha, 1.0);
        stick = std::max(stick, 1e-300);
        if (k > 0 && stick >= s.pi(k - 1)) stick = std::nextafter(s.pi(k - 1), 0.0);
        s.pi(k) = stick;
    }
    s.A.resize(d_init + 1, data.cols());
    for (Index r = 0; r < s.A.rows(); ++r)
        for (Index j = 0; j < s.A.cols(); ++j) s.A(r, j) = hp.weight_mean + std::sqrt(hp.weight_var) * rng.normal();
    s.A.row(d_init).setConstant(hp.weight_mean);
    s.noise_var = 1.0 / rng.gamma(hp.noise_shape, hp.noise_rate);
    // Fit the loadings to the starting inputs so the first sparsity pass sees a sensible model.
    update_loadings(s, data, hp, rng);
    return s;
}

void lfm_sweep(LfmState& state, const Dataset& data, const Hyperparameters& hp, Rng& rng) {
    const Index n = data.rows();
    {
        LinearRows rows(data, state);
        Rng latent_rng = rng.split(tag(Stream::Latent));
        update_latent_rows(state.X, state.Z, rows, latent_rng);
    }

    Rng slice_rng = rng.split(tag(Stream::Slice));
    const SliceState slice = draw_slice(state.Z, state.pi, slice_rng);
    Rng extend_rng = rng.split(tag(Stream::Extend));
    for (double w : draw_inactive_weights(slice.s, n, state.ibp_alpha, extend_rng)) {
        const Index d = state.d_plus();
        state.X.conservativeResize(Eigen::NoChange, d + 1);
        for (Index i = 0; i < n; ++i) state.X(i, d) = extend_rng.normal();
        state.Z.conservativeResize(Eigen::NoChange, d + 1);
        state.Z.col(d).setZero();
        state.pi.conservativeResize(d + 1);
        state.pi(d) = w;
        MatrixXd A(d + 2, state.A.cols());
        A.topRows(d) = state.A.topRows(d);
        for (Index j = 0; j < A.cols(); ++j) A(d, j) = hp.weight_mean + std::sqrt(hp.weight_var) * extend_rng.normal();
        A.row(d + 1) = state.A.row(d);
        state.A = std::move(A);
    }

    std::vector<Index> order(static_cast<std::size_t>(state.d_plus()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return state.pi(a) > state.pi(b); });
    keep_dimensions(state, order);

    Rng sparsity_rng = rng.split(tag(Stream::Sparsity));
    sample_sparsity_collapsed(state, data, slice, sparsity_rng);

    std::vector<Index> keep;
    for (Index d = 0; d < state.d_plus(); ++d)
        if (state.Z.col(d).sum() > 0) keep.push_back(d);
    keep_dimensions(state, keep);

    Rng weight_rng = rng.split(tag(Stream::Weights));
    state.pi = resample_active_weights(state.Z, weight_rng);
    order.resize(static_cast<std::size_t>(state.d_plus()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return state.pi(a) > state.pi(b); });
    keep_dimensions(state, order);

    Rng alpha_rng = rng.split(tag(Stream::Concentration));
    state.ibp_alpha = sample_ibp_concentration(state.d_plus(), n, hp.ibp_shape, hp.ibp_rate, alpha_rng);

    update_loadings(state, data, hp, rng);
}

double lfm_train_loglik(const LfmState& state, const Dataset& data) {
    const MatrixXd psi = state.design() * state.A;
    double out = 0.0;
    for (Index i = 0; i < data.rows(); ++i)
        for (Index j = 0; j < data.cols(); ++j)
            if (data.mask(i, j)) out += normal_loglik(data.Y(i, j), psi(i, j), state.noise_var);
    return out;
}

std::vector<ChainRecord> run_ibp_lfm(const Dataset& data, const Hyperparameters& hp, const ChainConfig& config) {
    if (config.iters < 1) throw std::invalid_argument("run_ibp_lfm: iters must be >= 1");
    if (config.thin < 1) throw std::invalid_argument("run_ibp_lfm: thin must be >= 1");
    LfmState state = init_lfm_state(data, hp, config.seed, config.d_init);
    const Rng root(config.seed);
    std::vector<ChainRecord> records;
    for (int it = 1; it <= config.iters; ++it) {
        Rng rng = root.split({tag(Stream::Chain), static_cast<std::uint64_t>(it)});
        const LfmState saved = state;
        try {
            lfm_sweep(state, data, hp, rng);
        } catch (...) {
            state = saved;
            throw;
        }
        ChainRecord rec;
        rec.iteration = it;
        rec.d_plus = state.d_plus();
        rec.k_plus = 0;
        rec.train_loglik = lfm_train_loglik(state, data);
        if (it > config.burnin && (it - config.burnin - 1) % config.thin == 0) {
            Snapshot snap;
            snap.likelihood = Likelihood::Gaussian;
            snap.psi = state.design() * state.A;
            snap.noise_var = VectorXd::Constant(data.cols(), state.noise_var);
            rec.snapshot = std::move(snap);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

} // namespace sirf
