#include "sirf/kernels.hpp"

#include "sirf/errors.hpp"

#include <cmath>
#include <numbers>

namespace sirf {

EssResult elliptical_slice(const Eigen::VectorXd& current, double current_loglik,
                           const PriorDraw& prior_draw, const VectorLogDensity& loglik, Rng& rng) {
    if (!std::isfinite(current_loglik))
        throw NumericalError("elliptical slice: non-finite log-likelihood at the current state");
    const Eigen::VectorXd nu = prior_draw(rng);
    const double threshold = current_loglik + std::log(rng.uniform());
    double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double lo = angle - 2.0 * std::numbers::pi;
    double hi = angle;

    EssResult out;
    for (;;) {
        ++out.proposals;
        out.state = current * std::cos(angle) + nu * std::sin(angle);
        out.loglik = loglik(out.state);
        if (out.loglik > threshold) return out;
        if (angle < 0.0)
            lo = angle;
        else
            hi = angle;
        if (hi - lo < 1e-14)
            throw NumericalError("elliptical slice: angle bracket collapsed");
        angle = rng.uniform(lo, hi);
    }
}

Eigen::VectorXd elliptical_slice_step(const Eigen::VectorXd& current,
                                      const Eigen::MatrixXd& prior_cov_chol,
                                      const VectorLogDensity& loglik, Rng& rng) {
    auto draw = [&](Rng& r) -> Eigen::VectorXd {
        return prior_cov_chol * r.normal_vector(current.size());
    };
    return elliptical_slice(current, loglik(current), draw, loglik, rng).state;
}

double slice_sample_univariate(const ScalarLogDensity& log_density, double lower, double upper,
                               double init, Rng& rng, int max_shrink) {
    if (!(lower < upper)) throw std::invalid_argument("slice sampler: empty support");
    const double f0 = log_density(init);
    if (!std::isfinite(f0)) throw NumericalError("slice sampler: non-finite density at init");
    const double level = f0 - rng.exponential();
    double lo = lower;
    double hi = upper;
    for (int step = 0; step < max_shrink; ++step) {
        const double x = rng.uniform(lo, hi);
        const double f = log_density(x);
        if (f > level) return x;
        if (x < init)
            lo = x;
        else
            hi = x;
    }
    throw NumericalError("slice sampler: no acceptable point after shrinkage limit");
}

} // namespace sirf
