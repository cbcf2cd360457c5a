#include "sirf/geweke.hpp"

#include "sirf/engine.hpp"
#include "sirf/ibp.hpp"
#include "sirf/likelihood.hpp"
#include "sirf/mixture.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace sirf {

ModelState sample_prior_state(Index n, Index cols, Likelihood family, const Hyperparameters& hp, Rng& rng) {
    ModelState s;
    s.ibp_alpha = rng.gamma(hp.ibp_shape, hp.ibp_rate);
    s.dp_eta = rng.gamma(hp.dp_shape, hp.dp_rate);

    s.Z = ibp_prior_draw(n, s.ibp_alpha, rng);
    const Index d = s.Z.cols();
    s.pi = d > 0 ? resample_active_weights(s.Z, rng) : VectorXd();
    s.X.resize(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < d; ++k) s.X(i, k) = rng.normal();

    const Index m = hp.num_features;
    s.zeta.assign(static_cast<std::size_t>(m), 0);
    std::vector<Index> sizes;
    for (Index r = 0; r < m; ++r) {
        std::vector<double> logw;
        for (Index size : sizes) logw.push_back(std::log(static_cast<double>(size)));
        logw.push_back(std::log(s.dp_eta));
        const std::size_t k = rng.categorical_log(logw);
        if (k == sizes.size()) sizes.push_back(0);
        sizes[k] += 1;
        s.zeta[static_cast<std::size_t>(r)] = static_cast<int>(k);
    }
    const NiwPosterior prior = niw_posterior(ClusterSummary(d), hp);
    for (std::size_t k = 0; k < sizes.size(); ++k) s.clusters.push_back(sample_niw(prior, rng));
    s.W.resize(m, d);
    for (Index r = 0; r < m; ++r) {
        const Cluster& c = s.clusters[static_cast<std::size_t>(s.zeta[static_cast<std::size_t>(r)])];
        s.W.row(r) = sample_mvn(c.mean, c.cov, rng).transpose();
    }
    sort_by_weight(s);

    const VectorXd b_mean = hp.weight_prior_mean();
    const VectorXd b_sd = hp.weight_prior_var().cwiseSqrt();
    s.beta.resize(hp.feature_count(), cols);
    s.noise_var.resize(cols);
    s.dispersion.resize(cols);
    for (Index j = 0; j < cols; ++j) {
        s.noise_var(j) = 1.0 / rng.gamma(hp.noise_shape, hp.noise_rate);
        s.dispersion(j) = rng.gamma(hp.dispersion_shape, hp.dispersion_rate);
        const double scale = family == Likelihood::Gaussian ? std::sqrt(s.noise_var(j)) : 1.0;
        for (Index p = 0; p < hp.feature_count(); ++p) s.beta(p, j) = b_mean(p) + scale * b_sd(p) * rng.normal();
    }
    if (family == Likelihood::Multinomial) s.beta.col(cols - 1).setZero();
    return s;
}

void simulate_data(ModelState& state, Dataset& data, const Hyperparameters& hp, Rng& rng) {
    const Index n = data.rows();
    const Index cols = data.cols();
    if (data.likelihood == Likelihood::Gaussian) {
        const VectorXd b_mean = hp.weight_prior_mean();
        const VectorXd b_sd = hp.weight_prior_var().cwiseSqrt();
        for (Index j = 0; j < cols; ++j) {
            state.noise_var(j) = 1.0 / rng.gamma(hp.noise_shape, hp.noise_rate);
            const double scale = std::sqrt(state.noise_var(j));
            for (Index p = 0; p < hp.feature_count(); ++p)
                state.beta(p, j) = b_mean(p) + scale * b_sd(p) * rng.normal();
        }
    }
    const MatrixXd psi = feature_map_serial(state.masked_latent(), state.W) * state.beta;
    switch (data.likelihood) {
    case Likelihood::Gaussian:
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < cols; ++j) data.Y(i, j) = psi(i, j) + std::sqrt(state.noise_var(j)) * rng.normal();
        break;
    case Likelihood::Bernoulli:
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < cols; ++j) data.Y(i, j) = rng.bernoulli(logistic(psi(i, j))) ? 1.0 : 0.0;
        break;
    case Likelihood::NegativeBinomial:
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < cols; ++j) {
                const double lambda = rng.gamma(state.dispersion(j), std::exp(-psi(i, j)));
                data.Y(i, j) = static_cast<double>(rng.poisson(lambda));
            }
        break;
    case Likelihood::Poisson:
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < cols; ++j) data.Y(i, j) = static_cast<double>(rng.poisson(std::exp(psi(i, j))));
        break;
    case Likelihood::Multinomial:
        for (Index i = 0; i < n; ++i) {
            const VectorXd logits = psi.row(i).transpose();
            std::vector<double> logw(logits.data(), logits.data() + cols);
            data.Y.row(i).setZero();
            for (int t = 0; t < data.row_totals(i); ++t) data.Y(i, static_cast<Index>(rng.categorical_log(logw))) += 1.0;
        }
        break;
    }
}

double prior_dplus_tail(Index cap, Index n, double shape, double rate) {
    const double h = harmonic_number(n);
    const double log_p = std::log(h / (rate + h));
    const double log_q = std::log(rate / (rate + h));
    double tail = 0.0;
    for (Index k = cap + 1; k < cap + 100000; ++k) {
        const double kd = static_cast<double>(k);
        const double term = std::exp(std::lgamma(kd + shape) - std::lgamma(kd + 1.0) - std::lgamma(shape) +
                                     shape * log_q + kd * log_p);
        tail += term;
        if (term < tail * 1e-17) break;
    }
    return tail;
}

bool GewekeReport::passed(double level) const {
    if (!valid || diverged) return false;
    return std::all_of(stats.begin(), stats.end(), [level](const GewekeStatistic& s) { return s.p_value > level; });
}

double GewekeReport::min_p_value() const {
    double out = 1.0;
    for (const auto& s : stats) out = std::min(out, s.p_value);
    return out;
}

namespace {

constexpr int kStatCount = 6;
const char* const kStatNames[kStatCount] = {"d_plus", "mean_pi", "alpha", "eta", "mean_x2", "train_loglik"};

std::array<double, kStatCount> statistics(const ModelState& s, double loglik) {
    const double d = static_cast<double>(s.d_plus());
    const double mean_pi = s.d_plus() > 0 ? s.pi.mean() : 0.0;
    const double mean_x2 = s.X.size() > 0 ? s.X.squaredNorm() / static_cast<double>(s.X.size()) : 0.0;
    return {d, mean_pi, s.ibp_alpha, s.dp_eta, mean_x2, loglik};
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

} // namespace

GewekeReport geweke_check(const Hyperparameters& hp, const GewekeConfig& config) {
    GewekeReport report;
    const int batches = std::max(config.batches, 2);
    if (config.iters < 2 * batches) return report;

    Hyperparameters h = hp;
    h.num_features = config.shape.features;
    const Index n = config.shape.n;
    const Index cols = config.shape.cols;

    Dataset data = make_dataset(MatrixXd::Zero(n, cols), config.family);
    if (config.family == Likelihood::Multinomial) data.row_totals = Eigen::VectorXi::Constant(n, 5);

    const Rng root(config.seed);
    std::vector<std::array<double, kStatCount>> forward(static_cast<std::size_t>(config.iters));
    for (int t = 0; t < config.iters; ++t) {
        Rng rng = root.split({tag(Stream::Forward), static_cast<std::uint64_t>(t)});
        ModelState s = sample_prior_state(n, cols, config.family, h, rng);
        simulate_data(s, data, h, rng);
        auto engine = make_engine(data, h, false);
        engine->reset(s);
        forward[static_cast<std::size_t>(t)] = statistics(s, engine->total());
    }

    Rng init_rng = root.split(tag(Stream::Init));
    ModelState state = sample_prior_state(n, cols, config.family, h, init_rng);
    simulate_data(state, data, h, init_rng);
    auto engine = make_engine(data, h, false);
    std::vector<std::array<double, kStatCount>> chain;
    chain.reserve(static_cast<std::size_t>(config.iters));
    for (int t = 0; t < config.iters; ++t) {
        Rng rng = root.split({tag(Stream::Chain), static_cast<std::uint64_t>(t)});
        gibbs_sweep(state, data, h, *engine, rng, config.sweep);
        if (state.d_plus() > config.max_dimensions) {
            report.diverged = true;
            break;
        }
        Rng data_rng = rng.split(tag(Stream::Data));
        simulate_data(state, data, h, data_rng);
        engine->reset(state);
        chain.push_back(statistics(state, engine->total()));
    }
    report.chain_samples = static_cast<int>(chain.size());
    report.valid = true;
    const double divergence_p =
        std::min(1.0, static_cast<double>(chain.size() + 1) *
                          prior_dplus_tail(config.max_dimensions, n, h.ibp_shape, h.ibp_rate));
    if (chain.size() < 8) {
        GewekeStatistic st;
        st.name = kStatNames[0];
        st.p_value = divergence_p;
        report.stats.push_back(st);
        return report;
    }

    const auto count = static_cast<double>(config.iters);
    const int used_batches = std::min(batches, static_cast<int>(chain.size()) / 4);
    const int per_batch = static_cast<int>(chain.size()) / used_batches;
    for (int k = 0; k < kStatCount; ++k) {
        GewekeStatistic st;
        st.name = kStatNames[k];
        double sum = 0.0, sq = 0.0;
        for (const auto& f : forward) {
            sum += f[static_cast<std::size_t>(k)];
            sq += f[static_cast<std::size_t>(k)] * f[static_cast<std::size_t>(k)];
        }
        st.forward_mean = sum / count;
        st.forward_se = std::sqrt(std::max(sq / count - st.forward_mean * st.forward_mean, 0.0) / (count - 1.0));

        std::vector<double> means(static_cast<std::size_t>(used_batches), 0.0);
        for (int b = 0; b < used_batches; ++b) {
            for (int t = b * per_batch; t < (b + 1) * per_batch; ++t)
                means[static_cast<std::size_t>(b)] += chain[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
            means[static_cast<std::size_t>(b)] /= per_batch;
        }
        const double grand = std::accumulate(means.begin(), means.end(), 0.0) / used_batches;
        double var = 0.0;
        for (double mb : means) var += (mb - grand) * (mb - grand);
        var /= static_cast<double>(used_batches - 1);
        st.chain_mean = grand;
        st.chain_se = std::sqrt(var / used_batches);

        const double se = std::hypot(st.forward_se, st.chain_se);
        st.z = se > 0.0 ? (st.chain_mean - st.forward_mean) / se : 0.0;
        st.p_value = se > 0.0 ? normal_two_sided_p(st.z) : (st.chain_mean == st.forward_mean ? 1.0 : 0.0);
        if (k == 0 && report.diverged) st.p_value = std::min(st.p_value, divergence_p);
        report.stats.push_back(st);
    }
    return report;
}

} // namespace sirf
