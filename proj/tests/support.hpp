#pragma once

// Small statistics helpers shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace testsupport {

struct Moments {
    double mean = 0.0;
    double se = 0.0;
};

/// Mean with the iid standard error.
inline Moments iid_moments(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

/// Mean with a batch-means standard error for autocorrelated chains.
inline Moments batch_moments(const std::vector<double>& x, std::size_t batches = 50) {
    const std::size_t size = x.size() / batches;
    std::vector<double> means;
    for (std::size_t b = 0; b < batches; ++b) {
        double s = 0.0;
        for (std::size_t k = 0; k < size; ++k) s += x[b * size + k];
        means.push_back(s / static_cast<double>(size));
    }
    Moments m = iid_moments(means);
    m.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    return m;
}

inline double normal_two_sided_p(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

/// Kolmogorov limiting tail probability P(sqrt(n) D > lambda).
inline double kolmogorov_p(double lambda) {
    if (lambda < 0.2) return 1.0;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        p += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(p, 0.0, 1.0);
}

/// One-sample KS test against a continuous CDF; returns the p-value.
inline double ks_one_sample(std::vector<double> x, const std::function<double(double)>& cdf) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return kolmogorov_p(d * std::sqrt(n));
}

/// Two-sample KS test; returns the p-value.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return kolmogorov_p(d * std::sqrt(na * nb / (na + nb)));
}

/// Upper tail of the chi-square distribution (regularized incomplete gamma).
inline double chi_square_p(double stat, int dof) {
    const double a = 0.5 * dof;
    const double x = 0.5 * stat;
    if (x <= 0.0) return 1.0;
    if (x < a + 1.0) {
        double sum = 1.0 / a, term = sum;
        for (int n = 1; n < 1000; ++n) {
            term *= x / (a + n);
            sum += term;
            if (term < sum * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    // Lentz continued fraction for Q(a, x).
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::fabs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

/// Pearson goodness of fit of observed counts against expected probabilities.
inline double chi_square_gof(const std::vector<double>& counts, const std::vector<double>& probs) {
    const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
    double stat = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        const double e = n * probs[k];
        stat += (counts[k] - e) * (counts[k] - e) / e;
    }
    return chi_square_p(stat, static_cast<int>(counts.size()) - 1);
}

/// Trapezoid rule on [a, b] with n intervals.
inline double trapezoid(const std::function<double(double)>& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = 0.5 * (f(a) + f(b));
    for (int k = 1; k < n; ++k) s += f(a + k * h);
    return s * h;
}

} // namespace testsupport
