#include "sirf/likelihood.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sirf {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTrunc = 0.64;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// P(X < t) for X ~ InverseGaussian(1/z, 1).
double inverse_gaussian_cdf(double t, double z) {
    const double root = 1.0 / std::sqrt(t);
    const double b = root * (t * z - 1.0);
    const double a = -root * (t * z + 1.0);
    return normal_cdf(b) + std::exp(2.0 * z + std::log(normal_cdf(a)));
}

// Inverse Gaussian(1/z, 1) truncated to (0, t).
double truncated_inverse_gaussian(double z, double t, Rng& rng) {
    double x = t + 1.0;
    if (z < 1.0 / t) {
        double accept = 0.0;
        while (rng.uniform() > accept) {
            double e1, e2;
            do {
                e1 = rng.exponential();
                e2 = rng.exponential();
            } while (e1 * e1 > 2.0 * e2 / t);
            x = t / ((1.0 + t * e1) * (1.0 + t * e1));
            accept = std::exp(-0.5 * z * z * x);
        }
        return x;
    }
    const double mu = 1.0 / z;
    while (x > t) {
        const double y = rng.normal();
        const double mu_y = mu * y * y;
        x = mu + 0.5 * mu * mu_y - 0.5 * mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
        if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
    }
    return x;
}

// n-th coefficient of the alternating series for the J*(1, z) density.
double series_term(int n, double x) {
    const double k = n + 0.5;
    if (x > kTrunc) return kPi * k * std::exp(-0.5 * k * k * kPi * kPi * x);
    return std::pow(2.0 / (kPi * x), 1.5) * kPi * k * std::exp(-2.0 * k * k / x);
}

// PG(1, c) by Devroye-style alternating series rejection.
double pg_unit(double c, Rng& rng) {
    const double z = 0.5 * std::fabs(c);
    const double k = 0.125 * kPi * kPi + 0.5 * z * z;
    const double p = 0.5 * kPi / k * std::exp(-k * kTrunc);
    const double q = 2.0 * std::exp(-z) * inverse_gaussian_cdf(kTrunc, z);
    for (;;) {
        double x;
        if (rng.uniform() < p / (p + q))
            x = kTrunc + rng.exponential() / k;
        else
            x = truncated_inverse_gaussian(z, kTrunc, rng);
        double s = series_term(0, x);
        const double y = rng.uniform() * s;
        for (int n = 1;; ++n) {
            if (n % 2 == 1) {
                s -= series_term(n, x);
                if (y <= s) return 0.25 * x;
            } else {
                s += series_term(n, x);
                if (y > s) break;
            }
        }
    }
}

// sum_{k>=1} 1/d_k and sum 1/d_k^2 with d_k = (k - 1/2)^2 + c^2 / (4 pi^2).
void series_totals(double c, double& first, double& second) {
    const double ac = std::fabs(c);
    if (ac < 1e-4) {
        first = 0.5 * kPi * kPi * (1.0 - ac * ac / 12.0);
        second = std::pow(kPi, 4) / 6.0 * (1.0 - ac * ac / 10.0);
        return;
    }
    const double ch = std::cosh(0.5 * ac);
    first = kPi * kPi * std::tanh(0.5 * ac) / ac;
    second = std::pow(kPi, 4) * (std::sinh(ac) - ac) / (ac * ac * ac * ch * ch);
}

double pg_truncated_series(double b, double c, Rng& rng) {
    constexpr int kTerms = 200;
    const double shift = c * c / (4.0 * kPi * kPi);
    double acc = 0.0;
    double head1 = 0.0;
    double head2 = 0.0;
    for (int k = 1; k <= kTerms; ++k) {
        const double h = k - 0.5;
        const double d = h * h + shift;
        acc += rng.gamma(b, 1.0) / d;
        head1 += 1.0 / d;
        head2 += 1.0 / (d * d);
    }
    double total1, total2;
    series_totals(c, total1, total2);
    // Tail sum_{k > K} g_k / d_k matched in mean and variance by a Gamma.
    const double tail_mean = b * std::max(total1 - head1, 0.0);
    const double tail_var = b * std::max(total2 - head2, 0.0);
    double tail = 0.0;
    if (tail_mean > 0.0 && tail_var > 0.0) {
        const double shape = tail_mean * tail_mean / tail_var;
        tail = rng.gamma(shape, shape / tail_mean);
    }
    return (acc + tail) / (2.0 * kPi * kPi);
}

} // namespace

double pg_draw(double b, double c, Rng& rng) {
    if (!(b > 0.0)) throw std::invalid_argument("pg_draw: b must be positive");
    const double rounded = std::round(b);
    if (std::fabs(b - rounded) < 1e-12 && rounded <= 64.0) {
        double out = 0.0;
        for (int k = 0; k < static_cast<int>(rounded); ++k) out += pg_unit(c, rng);
        return out;
    }
    return pg_truncated_series(b, c, rng);
}

long crt_draw(long y, double r, Rng& rng) {
    long tables = 0;
    for (long t = 0; t < y; ++t)
        if (rng.uniform() < r / (r + static_cast<double>(t))) ++tables;
    return tables;
}

} // namespace sirf
