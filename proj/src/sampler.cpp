#include "sirf/sampler.hpp"

#include "sirf/errors.hpp"
#include "sirf/ibp.hpp"
#include "sirf/kernels.hpp"
#include "sirf/likelihood.hpp"
#include "sirf/mixture.hpp"

#include <stdexcept>

namespace sirf {

void update_latent_rows(MatrixXd& X, const Eigen::MatrixXi& Z, RowModel& model, Rng& rng) {
    const Index dims = X.cols();
    if (dims == 0) return;
    for (Index i = 0; i < X.rows(); ++i) {
        const VectorXd z = Z.row(i).transpose().cast<double>();
        const auto loglik = [&](const VectorXd& x) { return model.row_delta(i, x.cwiseProduct(z)); };
        const auto prior = [dims](Rng& r) -> VectorXd { return r.normal_vector(dims); };
        const EssResult res = elliptical_slice(X.row(i).transpose(), 0.0, prior, loglik, rng);
        model.commit_row(i, res.state.cwiseProduct(z));
        X.row(i) = res.state.transpose();
    }
}

void update_regression(ModelState& state, const Dataset& data, const Hyperparameters& hp,
                       const FeatureMatrix& phi, const Rng& rng, bool parallel) {
    const Index cols = data.cols();
    switch (data.likelihood) {
    case Likelihood::Gaussian:
        return;
    case Likelihood::Multinomial: {
        MatrixXd psi = phi * state.beta;
        for (Index j = 0; j + 1 < cols; ++j) {
            Rng col_rng = rng.split({tag(Stream::Regression), static_cast<std::uint64_t>(j)});
            const PgUpdate up = update_weights_pg(phi, data, j, psi, state.dispersion, hp, col_rng);
            state.beta.col(j) = up.beta;
            psi.col(j) = phi * up.beta;
        }
        state.beta.col(cols - 1).setZero();
        return;
    }
    default:
        break;
    }
    int failed = 0;
#pragma omp parallel for schedule(static) if (parallel) reduction(+ : failed)
    for (Index j = 0; j < cols; ++j) {
        try {
            Rng col_rng = rng.split({tag(Stream::Regression), static_cast<std::uint64_t>(j)});
            if (data.likelihood == Likelihood::Poisson) {
                state.beta.col(j) = update_weights_poisson(phi, data, j, state.beta.col(j), hp, col_rng);
                continue;
            }
            const MatrixXd psi_col = phi * state.beta.col(j);
            MatrixXd psi = MatrixXd::Zero(data.rows(), cols);
            psi.col(j) = psi_col;
            const PgUpdate up = update_weights_pg(phi, data, j, psi, state.dispersion, hp, col_rng);
            state.beta.col(j) = up.beta;
            if (data.likelihood == Likelihood::NegativeBinomial) {
                Rng r_rng = rng.split({tag(Stream::Dispersion), static_cast<std::uint64_t>(j)});
                state.dispersion(j) = update_nb_dispersion(data, j, phi * up.beta, state.dispersion(j), hp, r_rng);
            }
        } catch (const std::exception&) {
            failed += 1;
        }
    }
    if (failed > 0) throw NumericalError("regression update failed in " + std::to_string(failed) + " column(s)");
}

Snapshot make_snapshot(const ModelState& state, const Dataset& data, const Hyperparameters& hp,
                       const FeatureMatrix& phi, const Rng& rng, bool parallel) {
    Snapshot snap;
    snap.likelihood = data.likelihood;
    snap.dispersion = state.dispersion;
    if (data.likelihood != Likelihood::Gaussian) {
        snap.psi = phi * state.beta;
        return snap;
    }
    const Index cols = data.cols();
    snap.psi.resize(data.rows(), cols);
    snap.noise_var.resize(cols);
#pragma omp parallel for schedule(static) if (parallel)
    for (Index j = 0; j < cols; ++j) {
        Rng col_rng = rng.split({tag(Stream::Snapshot), static_cast<std::uint64_t>(j)});
        const GaussianTheta theta = update_gaussian_theta(phi, data, j, hp, col_rng);
        snap.psi.col(j) = phi * theta.beta;
        snap.noise_var(j) = theta.noise_var;
    }
    return snap;
}

namespace {

void frequency_pass(ModelState& state, LikelihoodEngine& engine, Rng& rng, SweepStats& stats) {
    for (Index m = 0; m < state.W.rows(); ++m)
        if (propose_frequency(state, m, engine, rng)) stats.frequency_accepts += 1;
}

} // namespace

SweepStats gibbs_sweep(ModelState& state, const Dataset& data, const Hyperparameters& hp,
                       LikelihoodEngine& engine, Rng& rng, const SweepOptions& options) {
    const ModelState saved = state;
    SweepStats stats;
    try {
        const Index n = data.rows();
        engine.reset(state);

        Rng latent_rng = rng.split(tag(Stream::Latent));
        update_latent_rows(state.X, state.Z, engine, latent_rng);

        Rng slice_rng = rng.split(tag(Stream::Slice));
        const SliceState slice = draw_slice(state.Z, state.pi, slice_rng);
        Rng extend_rng = rng.split(tag(Stream::Extend));
        stats.born = extend_dimensions(state, slice, hp, n, extend_rng);
        // The sparsity scan order must not depend on which dimensions are active.
        sort_by_weight(state);
        engine.reshape(state);

        Rng freq_rng = rng.split(tag(Stream::Frequencies));
        if (options.frequencies_first) frequency_pass(state, engine, freq_rng, stats);

        Rng sparsity_rng = rng.split(tag(Stream::Sparsity));
        sample_sparsity_indicators(state.Z, state.X, state.pi, slice, engine, sparsity_rng);
        stats.pruned = prune_inactive(state);

        Rng weight_rng = rng.split(tag(Stream::Weights));
        state.pi = resample_active_weights(state.Z, weight_rng, options.swap_active_weight_beta);
        sort_by_weight(state);
        engine.reshape(state);

        Rng alpha_rng = rng.split(tag(Stream::Concentration));
        state.ibp_alpha = sample_ibp_concentration(state.d_plus(), n, hp.ibp_shape, hp.ibp_rate, alpha_rng);

        if (!options.frequencies_first) frequency_pass(state, engine, freq_rng, stats);

        Rng assign_rng = rng.split(tag(Stream::Assignment));
        assign_clusters(state, hp, assign_rng);
        Rng loc_rng = rng.split(tag(Stream::Locations));
        resample_locations(state, hp, loc_rng);
        Rng eta_rng = rng.split(tag(Stream::DpConcentration));
        state.dp_eta = sample_dp_concentration(state.k_plus(), state.W.rows(), hp.dp_shape, hp.dp_rate,
                                               state.dp_eta, eta_rng);

        update_regression(state, data, hp, engine.features(), rng, engine.parallel());
        engine.set_parameters(state);

        if (options.validate) validate_state(state, data, hp);
    } catch (...) {
        state = saved;
        throw;
    }
    return stats;
}

std::vector<ChainRecord> run_chain(const Dataset& data, const Hyperparameters& hp, const ChainConfig& config) {
    if (config.iters < 1) throw std::invalid_argument("run_chain: iters must be >= 1");
    if (config.thin < 1) throw std::invalid_argument("run_chain: thin must be >= 1");
    if (config.burnin < 0) throw std::invalid_argument("run_chain: burnin must be >= 0");
    ModelState state = init_state(data, hp, config.seed, config.d_init);
    auto engine = make_engine(data, hp, config.parallel);
    const Rng root(config.seed);
    std::vector<ChainRecord> records;
    records.reserve(static_cast<std::size_t>(config.iters));
    for (int it = 1; it <= config.iters; ++it) {
        Rng rng = root.split({tag(Stream::Chain), static_cast<std::uint64_t>(it)});
        gibbs_sweep(state, data, hp, *engine, rng, config.sweep);
        ChainRecord rec;
        rec.iteration = it;
        rec.d_plus = state.d_plus();
        rec.k_plus = state.k_plus();
        rec.train_loglik = engine->total();
        if (it > config.burnin && (it - config.burnin - 1) % config.thin == 0)
            rec.snapshot = make_snapshot(state, data, hp, engine->features(), rng, config.parallel);
        records.push_back(std::move(rec));
    }
    return records;
}

} // namespace sirf
