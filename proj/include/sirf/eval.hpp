#pragma once

#include "sirf/model.hpp"
#include "sirf/sampler.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sirf {

enum class TextFormat { Csv, Tsv };

struct LoadOptions {
    TextFormat format = TextFormat::Csv;
    bool header = false;
    Likelihood likelihood = Likelihood::Gaussian;
    /// Square-root transform of count data before standardization (Gaussian fits only).
    bool sqrt_transform = false;
};

/// Parses a rectangular numeric table. Throws DataError on ragged rows or
/// non-numeric cells, naming the line and field.
MatrixXd parse_matrix(std::istream& in, char delimiter, bool header);

/// Zero mean and unit (population) variance per column; a constant column is a DataError.
void standardize_columns(MatrixXd& Y);

Dataset load_matrix(const std::string& path, const LoadOptions& options);
Dataset load_matrix(std::istream& in, const LoadOptions& options);

/// Holds out floor(fraction * N * J) entries uniformly at random while keeping
/// at least one training entry in every row and column. Draws that would
/// break the guarantee are skipped; DataError if the target cannot be met.
Dataset holdout_split(const Dataset& data, double fraction, std::uint64_t seed);

struct TrialScore {
    double test_loglik = 0.0;
    double perplexity = 0.0; ///< count families only
    double normalizer = 0.0; ///< held-out count mass (entry count for Bernoulli)
    Index test_entries = 0;
    Index snapshots = 0;
};

/// Posterior-averaged predictive score over the held-out (mask == false)
/// entries of `data`. Throws std::invalid_argument without snapshots.
TrialScore score(const std::vector<ChainRecord>& chain, const Dataset& data);

/// Held-out log predictive of one snapshot at entry (i, j); multinomial
/// entries use y_ij log softmax_j over all categories.
double snapshot_entry_loglik(const Snapshot& snap, const Dataset& data, Index i, Index j);

struct CambridgeModel {
    Mask templates;            ///< 4 x 36 pixel membership
    MatrixXd frequencies;      ///< K x 4, rows drawn from N(0, I)
    MatrixXd coefficients;     ///< 2K x 36, one shared column per template, zero off-template
};

struct CambridgeData {
    Dataset data;
    MatrixXd X;
    BinaryMatrix Z;
    CambridgeModel model;
    VectorXd activation; ///< per-dimension Bernoulli rate of Z
    int d_true = 4;
};

/// Noise-free output of the generator for latent inputs (X, Z). An inactive
/// dimension contributes exactly zero.
MatrixXd cambridge_mean(const CambridgeModel& model, const MatrixXd& X, const BinaryMatrix& Z);

/// 6x6 images (J = 36) from a random-feature map of four sparse latent
/// dimensions. Each bar or corner template shares one output weight vector,
/// so its pixels move together; off-template pixels carry only noise.
CambridgeData generate_cambridge(Index n, double noise, std::uint64_t seed);

struct FitConfig {
    Likelihood likelihood = Likelihood::Gaussian;
    int iters = 100;
    int features = 50;
    double holdout = 0.2;
    int trials = 5;
    std::uint64_t seed = 0;
    int d_init = 2;
    int burnin = -1; ///< negative: half of iters
    int thin = 1;
    bool baseline_lfm = false;
    bool sqrt_transform = false;
    bool parallel = true;

    int effective_burnin() const { return burnin < 0 ? iters / 2 : burnin; }
};

struct TrialResult {
    std::uint64_t seed = 0;
    TrialScore score;
    std::vector<ChainRecord> records; ///< snapshots dropped after scoring
    double runtime_s = 0.0;
};

struct DPlusSummary {
    Index mode = 0;
    double mean = 0.0;
    Index min = 0;
    Index max = 0;
    std::vector<Index> final_per_trial;
};

struct EvalReport {
    FitConfig config;
    std::vector<TrialResult> trials;
    double runtime_s = 0.0;

    std::vector<double> test_logliks() const;
    std::vector<double> perplexities() const;
    /// Pooled over post-burn-in iterations of every trial.
    DPlusSummary d_plus() const;
};

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};
/// Sample mean and sample SD / sqrt(n); se is zero for a single value.
MeanSe mean_se(const std::vector<double>& values);

/// Runs `config.trials` independent holdout splits and chains on `data`.
EvalReport run_fit(const Dataset& data, const FitConfig& config, const Hyperparameters& hp);

/// JSON report; runtime is omitted when `include_runtime` is false so equal
/// inputs give byte-identical output.
std::string report_json(const EvalReport& report, bool include_runtime);

/// trial,iteration,d_plus,k_plus,train_loglik
std::string diagnostics_csv(const EvalReport& report);

} // namespace sirf
