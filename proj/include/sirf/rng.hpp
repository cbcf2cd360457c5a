#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <random>

namespace sirf {

/**
 * Seeded random stream with a split lineage.
 *
 * Child streams are derived from the parent's lineage (root seed plus the
 * path of tags), never from its engine state, so `split(a).split(b)` yields
 * the same draws no matter how much the parent has been consumed or which
 * thread asks for it.
 */
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    Rng split(std::uint64_t tag) const;
    Rng split(std::initializer_list<std::uint64_t> path) const;
    std::uint64_t lineage() const { return lineage_; }

    /// Uniform on the open interval (0, 1).
    double uniform();
    double uniform(double lo, double hi);
    double normal();
    double normal(double mean, double sd);
    Eigen::VectorXd normal_vector(Eigen::Index n);
    double exponential();
    /// Gamma with the given shape and *rate*.
    double gamma(double shape, double rate);
    /// log of a Gamma(shape, 1) draw; stable for tiny shapes.
    double log_gamma(double shape);
    double beta(double a, double b);
    long poisson(double mean);
    bool bernoulli(double p);
    std::size_t categorical_log(const std::vector<double>& log_weights);

    std::mt19937_64& engine() { return engine_; }

  private:
    std::uint64_t lineage_;
    std::mt19937_64 engine_;
};

/// Tags for the per-sweep stream layout.
enum class Stream : std::uint64_t {
    Init = 1,
    Latent,
    Slice,
    Extend,
    Sparsity,
    Weights,
    Concentration,
    Frequencies,
    Assignment,
    Locations,
    DpConcentration,
    Regression,
    Dispersion,
    Snapshot,
    Holdout,
    Chain,
    Data,
    Forward,
    Loadings,
    Noise,
};

inline std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

} // namespace sirf
