#include "support.hpp"

#include "sirf/errors.hpp"
#include "sirf/eval.hpp"
#include "sirf/likelihood.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sstream>

using namespace sirf;

namespace {

Dataset from_text(const std::string& text, Likelihood family = Likelihood::Gaussian, bool header = false) {
    std::istringstream in(text);
    LoadOptions opt;
    opt.likelihood = family;
    opt.header = header;
    return load_matrix(in, opt);
}

ChainRecord record_with(Snapshot snap, int iteration = 1) {
    ChainRecord r;
    r.iteration = iteration;
    r.snapshot = std::move(snap);
    return r;
}

} // namespace

TEST_CASE("load_matrix standardizes Gaussian columns") {
    const Dataset d = from_text("1.0,10\n2.5,-3\n-0.5,7\n");
    REQUIRE(d.rows() == 3);
    REQUIRE(d.cols() == 2);
    for (Index j = 0; j < 2; ++j) {
        CHECK(std::fabs(d.Y.col(j).mean()) < 1e-12);
        CHECK((d.Y.col(j).array() - d.Y.col(j).mean()).square().mean() == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(d.mask.all());

    const Dataset h = from_text("a,b\n1,2\n3,5\n", Likelihood::Gaussian, true);
    CHECK(h.rows() == 2);
}

TEST_CASE("load_matrix rejects malformed input") {
    CHECK_THROWS_AS(from_text("1,2\n"), DataError); // single row: zero variance
    CHECK_THROWS_AS(from_text("1,2\n3\n"), DataError);
    CHECK_THROWS_AS(from_text("1,x\n3,4\n"), DataError);
    try {
        from_text("1,0\n-1,2\n", Likelihood::Poisson);
        FAIL("expected a DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row") != std::string::npos);
        CHECK(msg.find("column") != std::string::npos);
    }
    CHECK_THROWS_AS(from_text("1,0.5\n1,2\n", Likelihood::NegativeBinomial), DataError);

    const Dataset counts = from_text("1,0\n3,2\n", Likelihood::Poisson);
    CHECK(counts.Y(1, 0) == 3.0); // raw counts kept

    std::istringstream tsv("1\t4\n9\t16\n");
    LoadOptions opt;
    opt.format = TextFormat::Tsv;
    opt.sqrt_transform = true;
    const Dataset root = load_matrix(tsv, opt);
    CHECK(root.Y(0, 0) == doctest::Approx(-1.0));
    CHECK(root.Y(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("holdout_split") {
    const Dataset d = make_dataset(MatrixXd::Random(10, 10), Likelihood::Gaussian);
    const Dataset h = holdout_split(d, 0.2, 1);
    CHECK((h.mask.array() == false).count() == 20);
    for (Index i = 0; i < 10; ++i) CHECK(h.mask.row(i).any());
    for (Index j = 0; j < 10; ++j) CHECK(h.mask.col(j).any());
    CHECK(holdout_split(d, 0.2, 1).mask == h.mask);
    CHECK(holdout_split(d, 0.2, 2).mask != h.mask);
    CHECK(holdout_split(d, 1e-9, 1).mask.all());

    const Dataset small = make_dataset(MatrixXd::Random(2, 2), Likelihood::Gaussian);
    const Dataset s = holdout_split(small, 0.25, 3);
    CHECK((s.mask.array() == false).count() == 1);
    for (Index i = 0; i < 2; ++i) {
        CHECK(s.mask.row(i).any());
        CHECK(s.mask.col(i).any());
    }
    CHECK_THROWS_AS(holdout_split(small, 0.75, 3), DataError);
    CHECK_THROWS_AS(holdout_split(small, 0.0, 3), std::invalid_argument);
}

TEST_CASE("scoring held-out entries") {
    SUBCASE("single snapshot, single Gaussian entry") {
        Dataset d = make_dataset(MatrixXd::Constant(2, 2, 0.3), Likelihood::Gaussian);
        d.mask(1, 0) = false;
        Snapshot s;
        s.likelihood = Likelihood::Gaussian;
        s.psi = MatrixXd::Constant(2, 2, -0.2);
        s.noise_var = VectorXd::Constant(2, 0.7);
        const TrialScore t = score({record_with(s)}, d);
        CHECK(t.test_entries == 1);
        CHECK(t.snapshots == 1);
        CHECK(t.test_loglik == doctest::Approx(pointwise_loglik(0.3, -0.2, Likelihood::Gaussian, 0.7)));
    }
    SUBCASE("certain predictions give perplexity one") {
        Dataset d = make_dataset(MatrixXd::Zero(2, 2), Likelihood::Bernoulli);
        d.Y(0, 1) = 1.0;
        d.mask(0, 1) = false;
        Snapshot s;
        s.likelihood = Likelihood::Bernoulli;
        s.psi = MatrixXd::Constant(2, 2, 800.0);
        const TrialScore t = score({record_with(s)}, d);
        CHECK(t.test_loglik == doctest::Approx(0.0));
        CHECK(t.perplexity == doctest::Approx(1.0));
    }
    SUBCASE("uniform multinomial over four categories has perplexity four") {
        MatrixXd y(2, 4);
        y << 3, 1, 0, 2, 1, 1, 4, 0;
        Dataset d = make_dataset(y, Likelihood::Multinomial);
        d.mask(0, 0) = false;
        d.mask(1, 2) = false;
        Snapshot s;
        s.likelihood = Likelihood::Multinomial;
        s.psi = MatrixXd::Zero(2, 4);
        const TrialScore t = score({record_with(s)}, d);
        CHECK(t.normalizer == 7.0);
        CHECK(t.perplexity == doctest::Approx(4.0));
    }
    SUBCASE("posterior average over snapshots, independent of order") {
        Dataset d = make_dataset(MatrixXd::Constant(1, 2, 2.0), Likelihood::Poisson);
        d.mask(0, 0) = false;
        Snapshot a, b;
        a.likelihood = b.likelihood = Likelihood::Poisson;
        a.psi = MatrixXd::Constant(1, 2, 0.1);
        b.psi = MatrixXd::Constant(1, 2, 1.4);
        const double expected = std::log(0.5 * (std::exp(pointwise_loglik(2.0, 0.1, Likelihood::Poisson)) +
                                                std::exp(pointwise_loglik(2.0, 1.4, Likelihood::Poisson))));
        const TrialScore ab = score({record_with(a, 1), record_with(b, 2)}, d);
        const TrialScore ba = score({record_with(b, 1), record_with(a, 2)}, d);
        CHECK(ab.test_loglik == doctest::Approx(expected));
        CHECK(ab.test_loglik == ba.test_loglik);
        CHECK(ab.perplexity == doctest::Approx(std::exp(-expected / 2.0)));
    }
    SUBCASE("no snapshots") {
        ChainRecord r;
        const Dataset d = make_dataset(MatrixXd::Zero(1, 1), Likelihood::Gaussian);
        CHECK_THROWS_AS(score({r}, d), std::invalid_argument);
    }
}

TEST_CASE("Cambridge generator") {
    SUBCASE("noise-free zero input maps to the zero row") {
        const CambridgeData g = generate_cambridge(1, 0.0, 4);
        CHECK(g.d_true == 4);
        CHECK(g.data.cols() == 36);
        const MatrixXd zero = cambridge_mean(g.model, MatrixXd::Zero(1, 4), BinaryMatrix::Ones(1, 4));
        CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
        CHECK((g.data.Y - cambridge_mean(g.model, g.X, g.Z)).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("templates and weights") {
        const CambridgeData g = generate_cambridge(5, 0.1, 5);
        CHECK(g.model.templates.rows() == 4);
        CHECK(g.model.templates.cols() == 36);
        for (Index k = 0; k < 4; ++k) CHECK(g.model.templates.row(k).any());
        for (Index j = 0; j < 36; ++j)
            if (!g.model.templates.col(j).any()) CHECK(g.model.coefficients.col(j).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("activation rates match the configured Bernoulli rates") {
        const CambridgeData g = generate_cambridge(10000, 0.1, 6);
        std::vector<double> active;
        for (Index i = 0; i < g.Z.rows(); ++i) active.push_back(static_cast<double>(g.Z.row(i).sum()));
        const auto m = testsupport::iid_moments(active);
        CHECK(std::fabs(m.mean - g.activation.sum()) < 3.0 * m.se);
    }
    SUBCASE("deterministic in the seed") {
        CHECK(generate_cambridge(20, 0.1, 7).data.Y == generate_cambridge(20, 0.1, 7).data.Y);
        CHECK(generate_cambridge(20, 0.1, 7).data.Y != generate_cambridge(20, 0.1, 8).data.Y);
    }
}

TEST_CASE("mean_se") {
    const MeanSe one = mean_se({2.5});
    CHECK(one.mean == 2.5);
    CHECK(one.se == 0.0);
    const MeanSe m = mean_se({1.0, 2.0, 3.0, 6.0});
    CHECK(m.mean == doctest::Approx(3.0));
    CHECK(m.se == doctest::Approx(std::sqrt(14.0 / 3.0) / 2.0));
}

TEST_CASE("fit report") {
    const CambridgeData g = generate_cambridge(15, 0.2, 9);
    FitConfig cfg;
    cfg.iters = 4;
    cfg.features = 5;
    cfg.trials = 2;
    cfg.seed = 10;
    const Hyperparameters hp;
    const EvalReport report = run_fit(g.data, cfg, hp);
    REQUIRE(report.trials.size() == 2);
    CHECK(report.trials[0].seed != report.trials[1].seed);
    CHECK(report.test_logliks().size() == 2);
    const DPlusSummary dp = report.d_plus();
    CHECK(dp.final_per_trial.size() == 2);
    CHECK(dp.min <= dp.mode);
    CHECK(dp.mode <= dp.max);

    const auto j = nlohmann::json::parse(report_json(report, true));
    CHECK(j.contains("test_loglik"));
    CHECK(j["test_loglik"]["per_trial"].size() == 2);
    CHECK(j.contains("d_plus"));
    CHECK(j.contains("config_echo"));
    CHECK(j.contains("runtime_s"));
    CHECK_FALSE(nlohmann::json::parse(report_json(report, false)).contains("runtime_s"));
    CHECK(report_json(run_fit(g.data, cfg, hp), false) == report_json(report, false));

    const std::string csv = diagnostics_csv(report);
    CHECK(csv.rfind("trial,iteration,d_plus,k_plus,train_loglik", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 4);

    SUBCASE("baseline and count families") {
        FitConfig lfm = cfg;
        lfm.baseline_lfm = true;
        const auto jl = nlohmann::json::parse(report_json(run_fit(g.data, lfm, hp), false));
        CHECK(jl["model"] == "ibp-lfm");

        MatrixXd counts(12, 4);
        Rng rng(11);
        for (Index i = 0; i < 12; ++i)
            for (Index c = 0; c < 4; ++c) counts(i, c) = static_cast<double>(rng.poisson(3.0));
        FitConfig pc = cfg;
        pc.likelihood = Likelihood::Poisson;
        const EvalReport pr = run_fit(make_dataset(counts, Likelihood::Poisson), pc, hp);
        for (double p : pr.perplexities()) CHECK(p >= 1.0);
        CHECK(nlohmann::json::parse(report_json(pr, false)).contains("perplexity"));
    }
}
