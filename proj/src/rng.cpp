#include "sirf/rng.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace sirf {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 seeded_engine(std::uint64_t lineage) {
    std::seed_seq seq{static_cast<std::uint32_t>(lineage),
                      static_cast<std::uint32_t>(lineage >> 32),
                      static_cast<std::uint32_t>(splitmix64(lineage)),
                      static_cast<std::uint32_t>(splitmix64(lineage) >> 32)};
    return std::mt19937_64(seq);
}

} // namespace

Rng::Rng(std::uint64_t seed)
    : lineage_(splitmix64(seed)), engine_(seeded_engine(lineage_)) {}

Rng Rng::split(std::uint64_t tag) const {
    Rng child(0);
    child.lineage_ = splitmix64(lineage_ ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
    child.engine_ = seeded_engine(child.lineage_);
    return child;
}

Rng Rng::split(std::initializer_list<std::uint64_t> path) const {
    Rng out = split(*path.begin());
    for (auto it = path.begin() + 1; it != path.end(); ++it) out = out.split(*it);
    return out;
}

double Rng::uniform() {
    for (;;) {
        const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        if (u > 0.0) return u;
    }
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    // Marsaglia polar method without caching so every call is self-contained.
    for (;;) {
        const double a = 2.0 * uniform() - 1.0;
        const double b = 2.0 * uniform() - 1.0;
        const double s = a * a + b * b;
        if (s < 1.0 && s > 0.0) return a * std::sqrt(-2.0 * std::log(s) / s);
    }
}

double Rng::normal(double mean, double sd) { return mean + sd * normal(); }

Eigen::VectorXd Rng::normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
}

double Rng::exponential() { return -std::log(uniform()); }

double Rng::gamma(double shape, double rate) {
    if (shape < 1.0) {
        return std::exp(log_gamma(shape)) / rate;
    }
    // Marsaglia-Tsang.
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
}

double Rng::log_gamma(double shape) {
    if (shape >= 1.0) return std::log(gamma(shape, 1.0));
    // G(a) = G(a + 1) * U^(1/a)
    return std::log(gamma(shape + 1.0, 1.0)) + std::log(uniform()) / shape;
}

double Rng::beta(double a, double b) {
    const double lx = log_gamma(a);
    const double ly = log_gamma(b);
    // x / (x + y) evaluated in log space.
    double out = 1.0 / (1.0 + std::exp(ly - lx));
    if (out <= 0.0) out = std::numeric_limits<double>::min();
    if (out >= 1.0) out = std::nextafter(1.0, 0.0);
    return out;
}

long Rng::poisson(double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<long> dist(mean);
    return dist(engine_);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

std::size_t Rng::categorical_log(const std::vector<double>& log_weights) {
    double top = -std::numeric_limits<double>::infinity();
    for (double w : log_weights) top = std::max(top, w);
    double total = 0.0;
    std::vector<double> w(log_weights.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] = std::exp(log_weights[k] - top);
        total += w[k];
    }
    double u = uniform() * total;
    for (std::size_t k = 0; k < w.size(); ++k) {
        u -= w[k];
        if (u <= 0.0) return k;
    }
    return w.size() - 1;
}

} // namespace sirf
