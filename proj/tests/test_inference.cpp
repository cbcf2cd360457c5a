#include "support.hpp"

#include "sirf/engine.hpp"
#include "sirf/eval.hpp"
#include "sirf/errors.hpp"
#include "sirf/geweke.hpp"
#include "sirf/ibp.hpp"
#include "sirf/lfm.hpp"
#include "sirf/likelihood.hpp"
#include "sirf/rff.hpp"
#include "sirf/sampler.hpp"

#include <doctest.h>

#include <map>

using namespace sirf;

namespace {

Dataset family_data(Likelihood family, Index n, Index j, std::uint64_t seed) {
    Rng rng(seed);
    MatrixXd y(n, j);
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < j; ++c) {
            switch (family) {
            case Likelihood::Gaussian: y(r, c) = rng.normal(); break;
            case Likelihood::Bernoulli: y(r, c) = rng.bernoulli(0.4) ? 1.0 : 0.0; break;
            default: y(r, c) = static_cast<double>(rng.poisson(2.0)); break;
            }
        }
    Dataset d = make_dataset(y, family);
    d.mask(0, j - 1) = false;
    return d;
}

ModelState random_state(const Dataset& data, const Hyperparameters& hp, std::uint64_t seed, int d) {
    ModelState s = init_state(data, hp, seed, d);
    Rng rng(seed + 100);
    for (Index i = 0; i < s.Z.rows(); ++i)
        for (Index k = 0; k < d; ++k) s.Z(i, k) = rng.bernoulli(0.6) ? 1 : 0;
    s.Z.row(0).setOnes();
    if (s.dispersion.size() > 0) s.dispersion.setConstant(1.7);
    return s;
}

/// Training log-likelihood from scratch, without any engine cache.
double brute_total(const ModelState& s, const Dataset& data, const Hyperparameters& hp) {
    const MatrixXd phi = feature_map(s.masked_latent(), s.W);
    double total = 0.0;
    if (data.likelihood == Likelihood::Gaussian) {
        for (Index j = 0; j < data.cols(); ++j)
            total += gaussian_collapsed_loglik(phi, data.Y.col(j), data.mask.col(j), hp);
        return total;
    }
    const MatrixXd psi = phi * s.beta;
    for (Index i = 0; i < data.rows(); ++i) {
        if (data.likelihood == Likelihood::Multinomial) {
            total += multinomial_row_loglik(data.Y.row(i).transpose(), data.mask.row(i).transpose(),
                                            psi.row(i).transpose());
            continue;
        }
        for (Index j = 0; j < data.cols(); ++j) {
            if (!data.mask(i, j)) continue;
            const double theta = data.likelihood == Likelihood::NegativeBinomial ? s.dispersion(j) : 1.0;
            total += pointwise_loglik(data.Y(i, j), psi(i, j), data.likelihood, theta);
        }
    }
    return total;
}

} // namespace

TEST_CASE("engine totals and deltas agree with a from-scratch computation") {
    Hyperparameters hp;
    hp.num_features = 4;
    for (auto family : {Likelihood::Gaussian, Likelihood::Bernoulli, Likelihood::NegativeBinomial,
                        Likelihood::Poisson, Likelihood::Multinomial}) {
        CAPTURE(to_string(family));
        const Dataset data = family_data(family, 7, 3, 1);
        ModelState s = random_state(data, hp, 2, 3);
        for (bool parallel : {false, true}) {
            auto engine = make_engine(data, hp, parallel);
            engine->reset(s);
            const double before = engine->total();
            CHECK(before == doctest::Approx(brute_total(s, data, hp)).epsilon(1e-9));

            Rng rng(3);
            const VectorXd v = rng.normal_vector(3);
            ModelState moved = s;
            moved.X.row(4) = v.transpose();
            moved.Z.row(4).setOnes();
            const double expected = brute_total(moved, data, hp) - before;
            CHECK(engine->row_delta(4, v) == doctest::Approx(expected).epsilon(1e-8));
            engine->commit_row(4, v);
            CHECK(engine->total() == doctest::Approx(before + expected).epsilon(1e-9));

            const VectorXd w = rng.normal_vector(3);
            ModelState freq = moved;
            freq.W.row(2) = w.transpose();
            const double fexp = brute_total(freq, data, hp) - brute_total(moved, data, hp);
            CHECK(engine->frequency_delta(2, w) == doctest::Approx(fexp).epsilon(1e-8));
            engine->accept_frequency();
            CHECK(engine->total() == doctest::Approx(brute_total(freq, data, hp)).epsilon(1e-9));
        }
    }
}

TEST_CASE("a sweep changes the latent inputs and keeps the invariants") {
    const Dataset data = family_data(Likelihood::Gaussian, 12, 4, 4);
    Hyperparameters hp;
    hp.num_features = 6;
    ModelState s = init_state(data, hp, 5, 3);
    auto engine = make_engine(data, hp, false);
    Rng root(6);
    for (int it = 0; it < 10; ++it) {
        const MatrixXd before = s.X;
        SweepOptions opt;
        opt.validate = true;
        Rng rng = root.split(static_cast<std::uint64_t>(it));
        CHECK_NOTHROW(gibbs_sweep(s, data, hp, *engine, rng, opt));
        if (before.cols() == s.X.cols()) CHECK(before != s.X);
        for (Index d = 0; d < s.d_plus(); ++d) CHECK(s.Z.col(d).sum() >= 1);
        CHECK(engine->total() == doctest::Approx(brute_total(s, data, hp)).epsilon(1e-8));
    }
}

TEST_CASE("every family survives a few validated sweeps") {
    Hyperparameters hp;
    hp.num_features = 5;
    for (auto family : {Likelihood::Bernoulli, Likelihood::NegativeBinomial, Likelihood::Poisson,
                        Likelihood::Multinomial}) {
        CAPTURE(to_string(family));
        const Dataset data = family_data(family, 10, 3, 7);
        ModelState s = init_state(data, hp, 8, 2);
        auto engine = make_engine(data, hp, true);
        SweepOptions opt;
        opt.validate = true;
        for (int it = 0; it < 5; ++it) {
            Rng rng = Rng(9).split(static_cast<std::uint64_t>(it));
            CHECK_NOTHROW(gibbs_sweep(s, data, hp, *engine, rng, opt));
        }
        if (family == Likelihood::Multinomial) CHECK(s.beta.col(2).cwiseAbs().maxCoeff() == 0.0);
        if (family == Likelihood::NegativeBinomial) CHECK((s.dispersion.array() > 0.0).all());
    }
}

TEST_CASE("a failing sweep leaves the state untouched") {
    const Dataset data = family_data(Likelihood::Gaussian, 6, 2, 10);
    Hyperparameters hp;
    hp.num_features = 3;
    ModelState s = init_state(data, hp, 11, 2);
    for (auto& c : s.clusters) c.cov = -MatrixXd::Identity(2, 2);
    const ModelState saved = s;
    auto engine = make_engine(data, hp, false);
    Rng rng(12);
    CHECK_THROWS_AS(gibbs_sweep(s, data, hp, *engine, rng), NumericalError);
    CHECK(s.X == saved.X);
    CHECK(s.Z == saved.Z);
    CHECK(s.pi == saved.pi);
    CHECK(s.W == saved.W);
    CHECK(s.clusters[0].cov == saved.clusters[0].cov);
}

TEST_CASE("run_chain bookkeeping") {
    const Dataset data = family_data(Likelihood::Gaussian, 8, 3, 13);
    Hyperparameters hp;
    hp.num_features = 4;
    ChainConfig cfg;
    cfg.iters = 7;
    cfg.burnin = 2;
    cfg.thin = 2;
    cfg.seed = 14;
    const auto records = run_chain(data, hp, cfg);
    REQUIRE(records.size() == 7);
    std::vector<int> snaps;
    for (std::size_t k = 0; k < records.size(); ++k) {
        CHECK(records[k].iteration == static_cast<int>(k) + 1);
        CHECK(records[k].d_plus >= 1);
        CHECK(records[k].k_plus >= 1);
        CHECK(std::isfinite(records[k].train_loglik));
        if (records[k].snapshot) snaps.push_back(records[k].iteration);
    }
    CHECK(snaps == std::vector<int>{3, 5, 7});
    const Snapshot& snap = *records[2].snapshot;
    CHECK(snap.psi.rows() == 8);
    CHECK(snap.psi.cols() == 3);
    CHECK(snap.noise_var.size() == 3);

    SUBCASE("deterministic and thread-independent") {
        ChainConfig serial = cfg;
        serial.parallel = false;
        const auto again = run_chain(data, hp, cfg);
        const auto ser = run_chain(data, hp, serial);
        for (std::size_t k = 0; k < records.size(); ++k) {
            CHECK(again[k].train_loglik == records[k].train_loglik);
            CHECK(ser[k].train_loglik == records[k].train_loglik);
            CHECK(ser[k].d_plus == records[k].d_plus);
        }
        CHECK(ser[6].snapshot->psi == records[6].snapshot->psi);
    }
    SUBCASE("bad configuration") {
        ChainConfig bad = cfg;
        bad.iters = 0;
        CHECK_THROWS_AS(run_chain(data, hp, bad), std::invalid_argument);
        bad = cfg;
        bad.thin = 0;
        CHECK_THROWS_AS(run_chain(data, hp, bad), std::invalid_argument);
    }
}

TEST_CASE("prior sampling and Geweke plumbing") {
    Hyperparameters hp;
    hp.num_features = 2;
    Rng rng(15);
    for (int r = 0; r < 50; ++r) {
        ModelState s = sample_prior_state(4, 2, Likelihood::Gaussian, hp, rng);
        Dataset data = make_dataset(MatrixXd::Zero(4, 2), Likelihood::Gaussian);
        simulate_data(s, data, hp, rng);
        if (s.d_plus() > 0) CHECK_NOTHROW(validate_state(s, data, hp));
        CHECK(data.Y.allFinite());
    }

    // P(D+ > 0) = 1 - E[exp(-alpha H_N)] = 1 - (b / (b + H_N))^a
    const double h = harmonic_number(4);
    CHECK(prior_dplus_tail(0, 4, 1.0, 1.0) == doctest::Approx(1.0 - 1.0 / (1.0 + h)).epsilon(1e-10));
    // shape 1 makes D+ geometric: P(D+ > c) = q^(c + 1) with q = H_N / (1 + H_N)
    CHECK(prior_dplus_tail(60, 4, 1.0, 1.0) == doctest::Approx(std::pow(h / (1.0 + h), 61)).epsilon(1e-8));

    GewekeConfig cfg;
    cfg.iters = 0;
    const GewekeReport empty = geweke_check(hp, cfg);
    CHECK_FALSE(empty.valid);
    CHECK_FALSE(empty.passed());
}

TEST_CASE("Geweke test with frequencies proposed before the sparsity update") {
    Hyperparameters hp;
    hp.num_features = 2;
    GewekeConfig cfg;
    cfg.iters = 6000;
    cfg.seed = 16;
    cfg.sweep.frequencies_first = true;
    const GewekeReport report = geweke_check(hp, cfg);
    for (const auto& s : report.stats) {
        CAPTURE(s.name);
        CAPTURE(s.z);
        CHECK(s.p_value > 1e-3);
    }
    CHECK(report.valid);
}

TEST_CASE("IBP linear factor model baseline") {
    Hyperparameters hp;
    SUBCASE("records have the chain layout") {
        const Dataset data = family_data(Likelihood::Gaussian, 10, 4, 17);
        ChainConfig cfg;
        cfg.iters = 6;
        cfg.burnin = 3;
        cfg.seed = 18;
        const auto recs = run_ibp_lfm(data, hp, cfg);
        REQUIRE(recs.size() == 6);
        for (const auto& r : recs) {
            CHECK(r.k_plus == 0);
            CHECK(r.snapshot.has_value() == (r.iteration > 3));
        }
        CHECK(recs.back().snapshot->psi.cols() == 4);
        CHECK_THROWS_AS(run_ibp_lfm(make_dataset(MatrixXd::Zero(3, 3), Likelihood::Poisson), hp, cfg),
                        std::invalid_argument);
    }
    SUBCASE("training log-likelihood is the Gaussian density of the residual") {
        const Dataset data = family_data(Likelihood::Gaussian, 5, 2, 19);
        LfmState s = init_lfm_state(data, hp, 20, 2);
        const MatrixXd mean = s.design() * s.A;
        double expected = 0.0;
        for (Index i = 0; i < 5; ++i)
            for (Index j = 0; j < 2; ++j)
                if (data.mask(i, j))
                    expected += pointwise_loglik(data.Y(i, j), mean(i, j), Likelihood::Gaussian, s.noise_var);
        CHECK(lfm_train_loglik(s, data) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("noise variance on noise-dominated data") {
        Rng rng(23);
        MatrixXd y(200, 6);
        for (Index i = 0; i < 200; ++i)
            for (Index c = 0; c < 6; ++c) y(i, c) = rng.normal();
        const Dataset data = make_dataset(y, Likelihood::Gaussian);
        LfmState s = init_lfm_state(data, hp, 24, 2);
        Rng root(25);
        double sum = 0.0;
        int kept = 0;
        for (int it = 0; it < 200; ++it) {
            Rng r = root.split(static_cast<std::uint64_t>(it));
            lfm_sweep(s, data, hp, r);
            if (it >= 50) {
                sum += s.noise_var;
                ++kept;
            }
        }
        CHECK(std::fabs(sum / kept - 1.0) < 0.2);
    }
    SUBCASE("both models beat an intercept-only predictive on linear data") {
        Rng rng(26);
        const Index n = 60, j = 8;
        MatrixXd loadings(2, j);
        for (Index d = 0; d < 2; ++d)
            for (Index c = 0; c < j; ++c) loadings(d, c) = rng.normal();
        MatrixXd y(n, j);
        for (Index i = 0; i < n; ++i) {
            const double f0 = rng.normal(), f1 = rng.bernoulli(0.5) ? rng.normal() : 0.0;
            for (Index c = 0; c < j; ++c) y(i, c) = f0 * loadings(0, c) + f1 * loadings(1, c) + 0.3 * rng.normal();
        }
        const Dataset data = holdout_split(make_dataset(y, Likelihood::Gaussian), 0.2, 27);
        double intercept_only = 0.0;
        for (Index c = 0; c < j; ++c) {
            double sum = 0.0, sq = 0.0, cnt = 0.0;
            for (Index i = 0; i < n; ++i)
                if (data.mask(i, c)) {
                    sum += data.Y(i, c);
                    sq += data.Y(i, c) * data.Y(i, c);
                    cnt += 1.0;
                }
            const double mean = sum / cnt, var = sq / cnt - mean * mean;
            for (Index i = 0; i < n; ++i)
                if (!data.mask(i, c)) intercept_only += pointwise_loglik(data.Y(i, c), mean, Likelihood::Gaussian, var);
        }
        ChainConfig cfg;
        cfg.iters = 60;
        cfg.burnin = 30;
        cfg.seed = 28;
        Hyperparameters h = hp;
        h.num_features = 10;
        CHECK(score(run_ibp_lfm(data, h, cfg), data).test_loglik > intercept_only);
        CHECK(score(run_chain(data, h, cfg), data).test_loglik > intercept_only);
    }
    SUBCASE("recovers the number of factors of linear data") {
        Rng rng(21);
        const Index n = 120, j = 12;
        MatrixXd loadings(3, j);
        for (Index d = 0; d < 3; ++d)
            for (Index c = 0; c < j; ++c) loadings(d, c) = 2.0 * rng.normal();
        MatrixXd y(n, j);
        for (Index i = 0; i < n; ++i) {
            VectorXd f(3);
            for (Index d = 0; d < 3; ++d) f(d) = rng.bernoulli(0.5) ? rng.normal() : 0.0;
            for (Index c = 0; c < j; ++c) y(i, c) = f.dot(loadings.col(c)) + 0.3 * rng.normal();
        }
        const Dataset data = make_dataset(y, Likelihood::Gaussian);
        ChainConfig cfg;
        cfg.iters = 300;
        cfg.burnin = 150;
        std::map<Index, int> counts;
        for (std::uint64_t seed = 22; seed < 27; ++seed) {
            cfg.seed = seed;
            for (const auto& r : run_ibp_lfm(data, hp, cfg))
                if (r.iteration > cfg.burnin) counts[r.d_plus] += 1;
        }
        Index mode = 0;
        int best = -1;
        for (const auto& [d, c] : counts)
            if (c > best) {
                best = c;
                mode = d;
            }
        CHECK(mode >= 2);
        CHECK(mode <= 5);
    }
}
