#include "sirf/engine.hpp"

#include "sirf/errors.hpp"
#include "sirf/likelihood.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <cmath>
#include <numbers>

namespace sirf {

LikelihoodEngine::LikelihoodEngine(const Dataset& data, const Hyperparameters& hp, bool parallel)
    : data_(data), hp_(hp), parallel_(parallel) {}

void LikelihoodEngine::load_geometry(const ModelState& state) {
    latent_ = state.masked_latent();
    W_ = state.W;
    phi_ = parallel_ ? feature_map(latent_, W_) : feature_map_serial(latent_, W_);
}

void LikelihoodEngine::reshape(const ModelState& state) {
    latent_ = state.masked_latent();
    W_ = state.W;
}

MatrixXd LikelihoodEngine::frequency_block(const VectorXd& w) const {
    const double scale = 1.0 / std::sqrt(static_cast<double>(W_.rows()));
    MatrixXd block(latent_.rows(), 2);
    for (Index i = 0; i < latent_.rows(); ++i) {
        const double proj = latent_.row(i).dot(w);
        block(i, 0) = scale * std::sin(proj);
        block(i, 1) = scale * std::cos(proj);
    }
    return block;
}

// ---------------------------------------------------------------------------

CollapsedGaussianEngine::CollapsedGaussianEngine(const Dataset& data, const Hyperparameters& hp, bool parallel)
    : LikelihoodEngine(data, hp, parallel) {
    if (data.likelihood != Likelihood::Gaussian)
        throw std::invalid_argument("CollapsedGaussianEngine requires Gaussian data");
    prior_prec_ = hp.weight_prior_var().cwiseInverse();
    prior_logdet_prec_ = prior_prec_.array().log().sum();
}

double CollapsedGaussianEngine::loglik_of(Index n, double logdet, double c, double quad) const {
    const double shape = hp_.noise_shape + 0.5 * static_cast<double>(n);
    const double rate = hp_.noise_rate + 0.5 * std::max(c - quad, 0.0);
    return -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + 0.5 * prior_logdet_prec_ -
           0.5 * logdet + hp_.noise_shape * std::log(hp_.noise_rate) - shape * std::log(rate) +
           std::lgamma(shape) - std::lgamma(hp_.noise_shape);
}

void CollapsedGaussianEngine::rebuild_column(Index j) {
    Column& col = columns_[static_cast<std::size_t>(j)];
    const VectorXd beta0 = hp_.weight_prior_mean();
    const VectorXd m = data_.mask.col(j).cast<double>();
    const VectorXd y = data_.Y.col(j).cwiseProduct(m);
    MatrixXd a = phi_.transpose() * m.asDiagonal() * phi_;
    a.diagonal() += prior_prec_;
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) throw NumericalError("collapsed Gaussian: posterior precision not SPD");
    col.a_inv = llt.solve(MatrixXd::Identity(a.rows(), a.cols()));
    col.logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    col.b = phi_.transpose() * y + prior_prec_.cwiseProduct(beta0);
    col.mean = col.a_inv * col.b;
    col.quad = col.b.dot(col.mean);
    col.c = y.squaredNorm() + beta0.dot(prior_prec_.cwiseProduct(beta0));
    col.n = static_cast<Index>(m.sum());
}

void CollapsedGaussianEngine::reset(const ModelState& state) {
    load_geometry(state);
    const Index cols = data_.cols();
    columns_.assign(static_cast<std::size_t>(cols), Column{});
    pending_.assign(static_cast<std::size_t>(cols), Change{});
    pending_row_ = -1;
    pending_m_ = -1;
    // Exceptions may not cross the parallel region; collect a flag instead.
    int failed = 0;
#pragma omp parallel for schedule(static) if (parallel_) reduction(+ : failed)
    for (Index j = 0; j < cols; ++j) {
        try {
            rebuild_column(j);
        } catch (const NumericalError&) {
            failed += 1;
        }
    }
    if (failed > 0) throw NumericalError("collapsed Gaussian: posterior precision not SPD");
}

double CollapsedGaussianEngine::column_loglik(Index j) const {
    const Column& col = columns_[static_cast<std::size_t>(j)];
    return loglik_of(col.n, col.logdet, col.c, col.quad);
}

double CollapsedGaussianEngine::total() const {
    double out = 0.0;
    for (Index j = 0; j < data_.cols(); ++j) out += column_loglik(j);
    return out;
}

void CollapsedGaussianEngine::prepare(Index j, MatrixXd u, const MatrixXd& c_inv, double log_abs_det_c,
                                      VectorXd g, Change& out) const {
    const Column& col = columns_[static_cast<std::size_t>(j)];
    out.a_inv_u = col.a_inv * u;
    const MatrixXd k = c_inv + u.transpose() * out.a_inv_u;
    Eigen::FullPivLU<MatrixXd> lu(k);
    out.k_inv = lu.inverse();
    out.a_inv_b = col.mean + out.a_inv_u * g;
    out.u_a_inv_b = u.transpose() * out.a_inv_b;
    const double bb = col.b.dot(out.a_inv_b) + g.dot(out.u_a_inv_b);
    out.quad = bb - out.u_a_inv_b.dot(out.k_inv * out.u_a_inv_b);
    out.logdet = col.logdet + std::log(std::abs(lu.determinant())) + log_abs_det_c;
    out.u = std::move(u);
    out.g = std::move(g);
    out.active = true;
}

void CollapsedGaussianEngine::apply(Index j, const Change& change) {
    if (!change.active) return;
    Column& col = columns_[static_cast<std::size_t>(j)];
    const MatrixXd t = change.a_inv_u * change.k_inv;
    col.a_inv.noalias() -= t * change.a_inv_u.transpose();
    col.mean = change.a_inv_b - t * change.u_a_inv_b;
    col.b += change.u * change.g;
    col.logdet = change.logdet;
    col.quad = change.quad;
}

double CollapsedGaussianEngine::pending_total() const {
    double out = 0.0;
    for (Index j = 0; j < data_.cols(); ++j) {
        const Change& ch = pending_[static_cast<std::size_t>(j)];
        const Column& col = columns_[static_cast<std::size_t>(j)];
        out += ch.active ? loglik_of(col.n, ch.logdet, col.c, ch.quad) : loglik_of(col.n, col.logdet, col.c, col.quad);
    }
    return out;
}

double CollapsedGaussianEngine::row_delta(Index i, const VectorXd& v) {
    pending_m_ = -1;
    pending_row_ = i;
    pending_v_ = v;
    pending_phi_ = feature_row(v, W_);
    const VectorXd old = phi_.row(i).transpose();
    const Index p = phi_.cols();
    MatrixXd c_inv = MatrixXd::Zero(2, 2);
    c_inv(0, 0) = 1.0;
    c_inv(1, 1) = -1.0;
    const Index cols = data_.cols();
#pragma omp parallel for schedule(static) if (parallel_)
    for (Index j = 0; j < cols; ++j) {
        Change& ch = pending_[static_cast<std::size_t>(j)];
        ch.active = false;
        if (!data_.mask(i, j)) continue;
        MatrixXd u(p, 2);
        u.col(0) = pending_phi_;
        u.col(1) = old;
        const double y = data_.Y(i, j);
        prepare(j, std::move(u), c_inv, 0.0, VectorXd{{y, -y}}, ch);
    }
    return pending_total() - total();
}

void CollapsedGaussianEngine::commit_row(Index i, const VectorXd& v) {
    if (pending_row_ != i || pending_v_.size() != v.size() || pending_v_ != v) row_delta(i, v);
    for (Index j = 0; j < data_.cols(); ++j) apply(j, pending_[static_cast<std::size_t>(j)]);
    phi_.row(i) = pending_phi_.transpose();
    latent_.row(i) = v.transpose();
    for (auto& ch : pending_) ch.active = false;
    pending_row_ = -1;
}

double CollapsedGaussianEngine::frequency_delta(Index m, const VectorXd& w) {
    pending_row_ = -1;
    pending_m_ = m;
    pending_w_ = w;
    pending_block_ = frequency_block(w);
    const MatrixXd delta = pending_block_ - phi_.middleCols(2 * m, 2);
    const Index p = phi_.cols();
    const Index cols = data_.cols();
#pragma omp parallel for schedule(static) if (parallel_)
    for (Index j = 0; j < cols; ++j) {
        Change& ch = pending_[static_cast<std::size_t>(j)];
        ch.active = false;
        const VectorXd mcol = data_.mask.col(j).cast<double>();
        const MatrixXd md = mcol.asDiagonal() * delta;
        const MatrixXd h = md.transpose() * delta;
        MatrixXd u = MatrixXd::Zero(p, 4);
        u(2 * m, 0) = 1.0;
        u(2 * m + 1, 1) = 1.0;
        u.rightCols(2) = phi_.transpose() * md;
        MatrixXd c_inv = MatrixXd::Zero(4, 4);
        c_inv.topRightCorner(2, 2).setIdentity();
        c_inv.bottomLeftCorner(2, 2).setIdentity();
        c_inv.bottomRightCorner(2, 2) = -h;
        VectorXd g = VectorXd::Zero(4);
        g.head(2) = md.transpose() * data_.Y.col(j);
        prepare(j, std::move(u), c_inv, 0.0, std::move(g), ch);
    }
    return pending_total() - total();
}

void CollapsedGaussianEngine::accept_frequency() {
    if (pending_m_ < 0) throw std::logic_error("accept_frequency without a pending proposal");
    for (Index j = 0; j < data_.cols(); ++j) apply(j, pending_[static_cast<std::size_t>(j)]);
    phi_.middleCols(2 * pending_m_, 2) = pending_block_;
    W_.row(pending_m_) = pending_w_.transpose();
    for (auto& ch : pending_) ch.active = false;
    pending_m_ = -1;
}

// ---------------------------------------------------------------------------

InstantiatedEngine::InstantiatedEngine(const Dataset& data, const Hyperparameters& hp, bool parallel)
    : LikelihoodEngine(data, hp, parallel) {
    if (data.likelihood == Likelihood::Gaussian)
        throw std::invalid_argument("InstantiatedEngine: Gaussian data use the collapsed engine");
}

VectorXd InstantiatedEngine::row_terms(Index i, const VectorXd& psi_row) const {
    const Index cols = data_.cols();
    VectorXd out = VectorXd::Zero(cols);
    if (data_.likelihood == Likelihood::Multinomial) {
        const VectorXd y = data_.Y.row(i).transpose();
        const Eigen::Matrix<bool, Eigen::Dynamic, 1> mask = data_.mask.row(i).transpose();
        if (mask.any()) out(0) = multinomial_row_loglik(y, mask, psi_row);
        return out;
    }
    for (Index j = 0; j < cols; ++j) {
        if (!data_.mask(i, j)) continue;
        const double theta = data_.likelihood == Likelihood::NegativeBinomial ? dispersion_(j) : 1.0;
        out(j) = pointwise_loglik(data_.Y(i, j), psi_row(j), data_.likelihood, theta);
    }
    return out;
}

double InstantiatedEngine::row_loglik(Index i, const VectorXd& psi_row) const { return row_terms(i, psi_row).sum(); }

void InstantiatedEngine::refresh_loglik() {
    psi_ = phi_ * beta_;
    entry_loglik_.resize(data_.rows(), data_.cols());
    for (Index i = 0; i < data_.rows(); ++i) entry_loglik_.row(i) = row_terms(i, psi_.row(i).transpose()).transpose();
}

void InstantiatedEngine::reset(const ModelState& state) {
    load_geometry(state);
    beta_ = state.beta;
    dispersion_ = state.dispersion;
    pending_row_ = -1;
    pending_m_ = -1;
    refresh_loglik();
}

void InstantiatedEngine::set_parameters(const ModelState& state) {
    beta_ = state.beta;
    dispersion_ = state.dispersion;
    refresh_loglik();
}

double InstantiatedEngine::total() const {
    double out = 0.0;
    for (Index i = 0; i < entry_loglik_.rows(); ++i) out += entry_loglik_.row(i).sum();
    return out;
}

double InstantiatedEngine::row_delta(Index i, const VectorXd& v) {
    pending_m_ = -1;
    pending_row_ = i;
    pending_v_ = v;
    pending_phi_ = feature_row(v, W_);
    const VectorXd psi_row = beta_.transpose() * pending_phi_;
    return row_loglik(i, psi_row) - entry_loglik_.row(i).sum();
}

void InstantiatedEngine::commit_row(Index i, const VectorXd& v) {
    if (pending_row_ != i || pending_v_.size() != v.size() || pending_v_ != v) row_delta(i, v);
    phi_.row(i) = pending_phi_.transpose();
    latent_.row(i) = v.transpose();
    psi_.row(i) = (beta_.transpose() * pending_phi_).transpose();
    entry_loglik_.row(i) = row_terms(i, psi_.row(i).transpose()).transpose();
    pending_row_ = -1;
}

double InstantiatedEngine::frequency_delta(Index m, const VectorXd& w) {
    pending_row_ = -1;
    pending_m_ = m;
    pending_w_ = w;
    pending_block_ = frequency_block(w);
    const MatrixXd delta = pending_block_ - phi_.middleCols(2 * m, 2);
    pending_psi_ = psi_ + delta * beta_.middleRows(2 * m, 2);
    pending_loglik_.resize(data_.rows(), data_.cols());
    const Index rows = data_.rows();
#pragma omp parallel for schedule(static) if (parallel_)
    for (Index i = 0; i < rows; ++i)
        pending_loglik_.row(i) = row_terms(i, pending_psi_.row(i).transpose()).transpose();
    double after = 0.0;
    for (Index i = 0; i < rows; ++i) after += pending_loglik_.row(i).sum();
    return after - total();
}

void InstantiatedEngine::accept_frequency() {
    if (pending_m_ < 0) throw std::logic_error("accept_frequency without a pending proposal");
    phi_.middleCols(2 * pending_m_, 2) = pending_block_;
    W_.row(pending_m_) = pending_w_.transpose();
    psi_ = pending_psi_;
    entry_loglik_ = pending_loglik_;
    pending_m_ = -1;
}

std::unique_ptr<LikelihoodEngine> make_engine(const Dataset& data, const Hyperparameters& hp, bool parallel) {
    if (data.likelihood == Likelihood::Gaussian) return std::make_unique<CollapsedGaussianEngine>(data, hp, parallel);
    return std::make_unique<InstantiatedEngine>(data, hp, parallel);
}

} // namespace sirf
