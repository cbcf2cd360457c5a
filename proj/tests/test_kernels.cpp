#include "support.hpp"

#include "sirf/errors.hpp"
#include "sirf/kernels.hpp"
#include "sirf/rng.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <doctest.h>

#include <limits>

using namespace sirf;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("split streams depend only on lineage") {
    Rng a(5), b(5);
    for (int i = 0; i < 100; ++i) a.normal();
    Rng ca = a.split({3, 7}), cb = b.split(3).split(7);
    for (int i = 0; i < 10; ++i) CHECK(ca.normal() == cb.normal());
    CHECK(Rng(5).split(1).uniform() != Rng(5).split(2).uniform());
    CHECK(Rng(5).split(1).uniform() != Rng(6).split(1).uniform());
    CHECK(Rng(5).split(1).lineage() != Rng(5).lineage());
}

TEST_CASE("basic distributions") {
    Rng rng(1);
    std::vector<double> u, g, be, po;
    for (int i = 0; i < 20000; ++i) {
        const double x = rng.uniform();
        CHECK((x > 0.0 && x < 1.0));
        u.push_back(x);
        g.push_back(rng.gamma(2.5, 4.0));
        be.push_back(rng.beta(2.0, 5.0));
        po.push_back(static_cast<double>(rng.poisson(3.2)));
    }
    CHECK(testsupport::ks_one_sample(u, [](double x) { return std::clamp(x, 0.0, 1.0); }) > 0.001);
    const boost::math::gamma_distribution<> gd(2.5, 0.25);
    CHECK(testsupport::ks_one_sample(g, [&](double x) { return x <= 0 ? 0.0 : cdf(gd, x); }) > 0.001);
    const boost::math::beta_distribution<> bd(2.0, 5.0);
    CHECK(testsupport::ks_one_sample(be, [&](double x) { return std::clamp(x, 0.0, 1.0) == x ? cdf(bd, x) : (x < 0 ? 0.0 : 1.0); }) > 0.001);
    const auto mp = testsupport::iid_moments(po);
    CHECK(std::fabs(mp.mean - 3.2) < 3.0 * mp.se);

    // tiny shapes stay finite on the log scale
    for (int i = 0; i < 100; ++i) CHECK(std::isfinite(rng.log_gamma(1e-8)));
}

TEST_CASE("categorical_log draws in proportion to the weights") {
    Rng rng(2);
    const std::vector<double> lw = {std::log(0.2) + 700.0, std::log(0.5) + 700.0, std::log(0.3) + 700.0,
                                    -std::numeric_limits<double>::infinity()};
    std::vector<double> counts(4, 0.0);
    for (int i = 0; i < 30000; ++i) counts[rng.categorical_log(lw)] += 1.0;
    CHECK(counts[3] == 0.0);
    counts.pop_back();
    CHECK(testsupport::chi_square_gof(counts, {0.2, 0.5, 0.3}) > 0.001);
}

TEST_CASE("elliptical slice sampling reproduces a conjugate Gaussian posterior") {
    // prior N(0, diag(1, 4)), likelihood N(y | x, s^2 I)
    Rng rng(3);
    VectorXd y(2);
    y << 1.5, -0.7;
    const double s2 = 0.5;
    VectorXd prior_var(2);
    prior_var << 1.0, 4.0;
    MatrixXd chol = prior_var.cwiseSqrt().asDiagonal();
    auto loglik = [&](const VectorXd& x) { return -0.5 * (x - y).squaredNorm() / s2; };
    VectorXd x = VectorXd::Zero(2);
    std::vector<double> a, b, a2;
    for (int it = 0; it < 60000; ++it) {
        x = elliptical_slice_step(x, chol, loglik, rng);
        a.push_back(x(0));
        b.push_back(x(1));
        a2.push_back(x(0) * x(0));
    }
    for (int d = 0; d < 2; ++d) {
        const double post_var = 1.0 / (1.0 / prior_var(d) + 1.0 / s2);
        const double post_mean = post_var * y(d) / s2;
        const auto m = testsupport::batch_moments(d == 0 ? a : b);
        CHECK(std::fabs(m.mean - post_mean) < 3.0 * m.se);
        if (d == 0) {
            const auto m2 = testsupport::batch_moments(a2);
            CHECK(std::fabs(m2.mean - (post_var + post_mean * post_mean)) < 3.0 * m2.se);
        }
    }
}

TEST_CASE("elliptical slice bookkeeping") {
    Rng rng(4);
    auto loglik = [](const VectorXd& x) { return -x.squaredNorm(); };
    auto prior = [](Rng& r) { return r.normal_vector(3); };
    const VectorXd start = VectorXd::Ones(3);
    const EssResult r = elliptical_slice(start, loglik(start), prior, loglik, rng);
    CHECK(r.proposals >= 1);
    CHECK(r.loglik == doctest::Approx(loglik(r.state)));
    CHECK(r.state != start);

    SUBCASE("flat likelihood accepts the first proposal") {
        auto flat = [](const VectorXd&) { return 0.0; };
        for (int i = 0; i < 50; ++i) CHECK(elliptical_slice(start, 0.0, prior, flat, rng).proposals == 1);
    }
    SUBCASE("non-finite likelihood everywhere but the start fails") {
        auto spike = [&](const VectorXd& x) {
            return (x - start).norm() < 1e-300 ? 0.0 : -std::numeric_limits<double>::infinity();
        };
        CHECK_THROWS_AS(elliptical_slice(start, 0.0, prior, spike, rng), NumericalError);
    }
}

TEST_CASE("univariate slice sampler") {
    Rng rng(5);
    SUBCASE("Beta(3, 2) target") {
        auto logf = [](double p) { return 2.0 * std::log(p) + std::log1p(-p); };
        double x = 0.5;
        std::vector<double> draws;
        for (int it = 0; it < 40000; ++it) {
            x = slice_sample_univariate(logf, 0.0, 1.0, x, rng);
            draws.push_back(x);
        }
        const auto m = testsupport::batch_moments(draws);
        CHECK(std::fabs(m.mean - 0.6) < 3.0 * m.se);
    }
    SUBCASE("errors") {
        auto logf = [](double p) { return std::log(p); };
        CHECK_THROWS_AS(slice_sample_univariate(logf, 0.0, 1.0, 0.0, rng), NumericalError);
        CHECK_THROWS_AS(slice_sample_univariate(logf, 1.0, 1.0, 1.0, rng), std::invalid_argument);
    }
    SUBCASE("draws stay inside the bracket") {
        auto logf = [](double v) { return -v * v; };
        double x = 0.1;
        for (int it = 0; it < 1000; ++it) {
            x = slice_sample_univariate(logf, -0.2, 0.3, x, rng);
            CHECK((x > -0.2 && x < 0.3));
        }
    }
}
