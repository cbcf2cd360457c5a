#include "sirf/ibp.hpp"

#include "sirf/errors.hpp"
#include "sirf/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sirf {

double harmonic_number(Index n) {
    double h = 0.0;
    for (Index i = 1; i <= n; ++i) h += 1.0 / static_cast<double>(i);
    return h;
}

BinaryMatrix ibp_prior_draw(Index n, double alpha, Rng& rng) {
    if (n < 1 || !(alpha > 0.0)) throw std::invalid_argument("ibp_prior_draw: need N >= 1, alpha > 0");
    std::vector<std::vector<int>> columns;
    std::vector<Index> counts;
    for (Index i = 0; i < n; ++i) {
        const double customer = static_cast<double>(i + 1);
        for (std::size_t d = 0; d < columns.size(); ++d) {
            const int take = rng.uniform() < static_cast<double>(counts[d]) / customer ? 1 : 0;
            columns[d][static_cast<std::size_t>(i)] = take;
            counts[d] += take;
        }
        const long fresh = rng.poisson(alpha / customer);
        for (long k = 0; k < fresh; ++k) {
            columns.emplace_back(static_cast<std::size_t>(n), 0);
            columns.back()[static_cast<std::size_t>(i)] = 1;
            counts.push_back(1);
        }
    }
    BinaryMatrix z(n, static_cast<Index>(columns.size()));
    for (std::size_t d = 0; d < columns.size(); ++d)
        for (Index i = 0; i < n; ++i) z(i, static_cast<Index>(d)) = columns[d][static_cast<std::size_t>(i)];
    return z;
}

double min_active_weight(const BinaryMatrix& Z, const VectorXd& pi) {
    double out = 1.0;
    for (Index d = 0; d < Z.cols(); ++d)
        if (Z.col(d).any()) out = std::min(out, pi(d));
    return out;
}

SliceState draw_slice(const BinaryMatrix& Z, const VectorXd& pi, Rng& rng) {
    SliceState slice;
    slice.pi_star = min_active_weight(Z, pi);
    slice.s = rng.uniform() * slice.pi_star;
    return slice;
}

SparsityPrior sparsity_prior(const VectorXd& pi, const Eigen::VectorXi& counts, Index d, int current,
                             double s) {
    double min_others = 1.0;
    for (Index e = 0; e < pi.size(); ++e)
        if (e != d && counts(e) > 0) min_others = std::min(min_others, pi(e));
    const double star_on = std::min(min_others, pi(d));
    const double star_off = counts(d) - current > 0 ? star_on : min_others;
    SparsityPrior out;
    // Switching on would put pi* below the slice: probability zero.
    out.feasible = star_on > s;
    out.log_odds = std::log(pi(d)) - std::log1p(-pi(d)) - std::log(star_on) + std::log(star_off);
    return out;
}

void sample_sparsity_indicators(BinaryMatrix& Z, const Eigen::MatrixXd& X, const VectorXd& pi,
                                const SliceState& slice, RowModel& model, Rng& rng) {
    const Index n = Z.rows();
    const Index dims = Z.cols();
    Eigen::VectorXi counts = Z.colwise().sum().transpose();
    for (Index i = 0; i < n; ++i) {
        VectorXd v = X.row(i).transpose().cwiseProduct(Z.row(i).transpose().cast<double>());
        for (Index d = 0; d < dims; ++d) {
            const int current = Z(i, d);
            const SparsityPrior prior = sparsity_prior(pi, counts, d, current, slice.s);
            if (!prior.feasible) {
                if (current == 1) {
                    std::ostringstream msg;
                    msg << "sparsity update: active weight below slice at (" << i << ", " << d << ")";
                    throw NumericalError(msg.str());
                }
                continue;
            }
            VectorXd flipped = v;
            flipped(d) = current == 1 ? 0.0 : X(i, d);
            const double other = model.row_delta(i, flipped);
            if (!std::isfinite(other)) {
                std::ostringstream msg;
                msg << "sparsity update: non-finite likelihood at (" << i << ", " << d << ")";
                throw NumericalError(msg.str());
            }
            const double lik_on = current == 1 ? 0.0 : other;
            const double lik_off = current == 1 ? other : 0.0;
            const double log_odds = prior.log_odds + lik_on - lik_off;
            const double p_on = 1.0 / (1.0 + std::exp(-log_odds));
            const int next = rng.uniform() < p_on ? 1 : 0;
            if (next != current) {
                model.commit_row(i, flipped);
                v = flipped;
                Z(i, d) = next;
                counts(d) += next - current;
            }
        }
    }
}

VectorXd resample_active_weights(const BinaryMatrix& Z, Rng& rng, bool swap_parameters) {
    const double n = static_cast<double>(Z.rows());
    VectorXd pi(Z.cols());
    for (Index d = 0; d < Z.cols(); ++d) {
        const double active = static_cast<double>(Z.col(d).sum());
        if (active < 1.0)
            throw std::invalid_argument("resample_active_weights: dimension " + std::to_string(d) +
                                        " is inactive");
        pi(d) = swap_parameters ? rng.beta(1.0 + n - active, active) : rng.beta(active, 1.0 + n - active);
    }
    return pi;
}

double inactive_mass_above(double pi, Index n, double alpha) {
    double tail = 0.0;
    double power = 1.0;
    const double q = 1.0 - pi;
    for (Index i = 1; i <= n; ++i) {
        power *= q;
        tail += power / static_cast<double>(i);
    }
    return alpha * (-std::log(pi) - tail);
}

std::vector<double> draw_inactive_weights(double slice, Index n, double alpha, Rng& rng) {
    std::vector<double> out;
    if (!(slice > 0.0) || !(slice < 1.0)) {
        if (slice >= 1.0) return out;
        throw std::invalid_argument("draw_inactive_weights: slice must be in (0, 1)");
    }
    double previous = 1.0;
    double mass = 0.0;
    for (;;) {
        const double target = mass + rng.exponential();
        // Lambda is decreasing in pi: the next weight is below the slice iff
        // Lambda(slice) <= target.
        if (inactive_mass_above(slice, n, alpha) <= target) break;
        double lo = std::log(slice);
        double hi = std::log(previous);
        for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (inactive_mass_above(std::exp(mid), n, alpha) > target)
                lo = mid;
            else
                hi = mid;
        }
        double next = std::exp(0.5 * (lo + hi));
        if (next >= previous) next = std::nextafter(previous, 0.0);
        if (next >= 1.0) next = std::nextafter(1.0, 0.0);
        out.push_back(next);
        previous = next;
        mass = target;
    }
    return out;
}

Index extend_dimensions(ModelState& state, const SliceState& slice, const Hyperparameters& hp, Index n,
                        Rng& rng) {
    const auto weights = draw_inactive_weights(slice.s, n, state.ibp_alpha, rng);
    for (double w : weights) {
        const Index d = state.d_plus();
        state.X.conservativeResize(Eigen::NoChange, d + 1);
        for (Index i = 0; i < state.X.rows(); ++i) state.X(i, d) = rng.normal();
        state.Z.conservativeResize(Eigen::NoChange, d + 1);
        state.Z.col(d).setZero();
        state.pi.conservativeResize(d + 1);
        state.pi(d) = w;
        extend_mixture_dimension(state, hp, rng);
    }
    return static_cast<Index>(weights.size());
}

double sample_ibp_concentration(Index d_plus, Index n, double shape, double rate, Rng& rng) {
    if (d_plus < 0) throw std::invalid_argument("sample_ibp_concentration: D+ < 0");
    return rng.gamma(shape + static_cast<double>(d_plus), rate + harmonic_number(n));
}

} // namespace sirf
