#include "sirf/eval.hpp"

#include "sirf/errors.hpp"
#include "sirf/lfm.hpp"
#include "sirf/likelihood.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace sirf {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delimiter, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double log_mean_exp(const std::vector<double>& v) {
    const double top = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(top)) return top;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - top);
    return top + std::log(acc / static_cast<double>(v.size()));
}

} // namespace

MatrixXd parse_matrix(std::istream& in, char delimiter, bool header) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    bool skipped_header = !header;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        if (!skipped_header) {
            skipped_header = true;
            continue;
        }
        const auto fields = split_fields(line, delimiter);
        std::vector<double> row;
        row.reserve(fields.size());
        for (std::size_t f = 0; f < fields.size(); ++f) {
            double value = 0.0;
            const auto field = fields[f];
            const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
            if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(value)) {
                std::ostringstream msg;
                msg << "line " << line_no << ", field " << f + 1 << ": not a number: '" << field << "'";
                throw DataError(msg.str());
            }
            row.push_back(value);
        }
        if (rows.empty()) width = row.size();
        if (row.size() != width) {
            std::ostringstream msg;
            msg << "line " << line_no << ": expected " << width << " fields, found " << row.size();
            throw DataError(msg.str());
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("no data rows");
    MatrixXd Y(static_cast<Index>(rows.size()), static_cast<Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j) Y(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    return Y;
}

void standardize_columns(MatrixXd& Y) {
    const double n = static_cast<double>(Y.rows());
    for (Index j = 0; j < Y.cols(); ++j) {
        const double mean = Y.col(j).sum() / n;
        Y.col(j).array() -= mean;
        const double var = Y.col(j).squaredNorm() / n;
        if (!(var > 1e-300)) throw DataError("column " + std::to_string(j) + " has zero variance");
        Y.col(j) /= std::sqrt(var);
    }
}

Dataset load_matrix(std::istream& in, const LoadOptions& options) {
    MatrixXd Y = parse_matrix(in, options.format == TextFormat::Csv ? ',' : '\t', options.header);
    if (options.likelihood == Likelihood::Gaussian) {
        if (options.sqrt_transform) {
            for (Index i = 0; i < Y.rows(); ++i)
                for (Index j = 0; j < Y.cols(); ++j)
                    if (Y(i, j) < 0.0)
                        throw DataError("sqrt transform: negative entry at row " + std::to_string(i) + ", column " +
                                        std::to_string(j));
            Y = Y.cwiseSqrt();
        }
        standardize_columns(Y);
    } else if (options.sqrt_transform) {
        throw DataError("the square-root transform applies to Gaussian fits only");
    }
    return make_dataset(std::move(Y), options.likelihood);
}

Dataset load_matrix(const std::string& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return load_matrix(in, options);
}

Dataset holdout_split(const Dataset& data, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("holdout fraction must lie in (0, 1)");
    const Index n = data.rows();
    const Index cols = data.cols();
    const auto target = static_cast<Index>(std::floor(fraction * static_cast<double>(n * cols)));
    Dataset out = data;
    out.mask = Mask::Constant(n, cols, true);
    if (target == 0) return out;

    Rng rng = Rng(seed).split(tag(Stream::Holdout));
    std::vector<Index> order(static_cast<std::size_t>(n * cols));
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<Index>(k);
    for (std::size_t k = order.size() - 1; k > 0; --k) {
        const auto pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(k + 1));
        std::swap(order[k], order[std::min(pick, k)]);
    }
    Eigen::VectorXi row_left = Eigen::VectorXi::Constant(n, static_cast<int>(cols));
    Eigen::VectorXi col_left = Eigen::VectorXi::Constant(cols, static_cast<int>(n));
    Index held = 0;
    for (Index entry : order) {
        if (held == target) break;
        const Index i = entry / cols;
        const Index j = entry % cols;
        if (row_left(i) < 2 || col_left(j) < 2) continue;
        out.mask(i, j) = false;
        row_left(i) -= 1;
        col_left(j) -= 1;
        ++held;
    }
    if (held < target)
        throw DataError("holdout fraction " + std::to_string(fraction) +
                        " leaves some row or column without a training entry");
    return out;
}

double snapshot_entry_loglik(const Snapshot& snap, const Dataset& data, Index i, Index j) {
    const double y = data.Y(i, j);
    switch (snap.likelihood) {
    case Likelihood::Gaussian:
        return pointwise_loglik(y, snap.psi(i, j), Likelihood::Gaussian, snap.noise_var(j));
    case Likelihood::NegativeBinomial:
        return pointwise_loglik(y, snap.psi(i, j), Likelihood::NegativeBinomial, snap.dispersion(j));
    case Likelihood::Multinomial: {
        const VectorXd row = snap.psi.row(i).transpose();
        const double top = row.maxCoeff();
        const double lse = top + std::log((row.array() - top).exp().sum());
        return y * (snap.psi(i, j) - lse);
    }
    default:
        return pointwise_loglik(y, snap.psi(i, j), snap.likelihood);
    }
}

TrialScore score(const std::vector<ChainRecord>& chain, const Dataset& data) {
    std::vector<const Snapshot*> snaps;
    for (const auto& rec : chain)
        if (rec.snapshot) snaps.push_back(&*rec.snapshot);
    if (snaps.empty()) throw std::invalid_argument("score: no post-burn-in snapshots");
    TrialScore out;
    out.snapshots = static_cast<Index>(snaps.size());
    std::vector<double> values(snaps.size());
    double mass = 0.0;
    if (data.likelihood == Likelihood::Multinomial) {
        // The predictive of a held-out multinomial entry is the posterior-mean
        // category probability raised to the held-out count.
        for (Index i = 0; i < data.rows(); ++i)
            for (Index j = 0; j < data.cols(); ++j) {
                if (data.mask(i, j)) continue;
                for (std::size_t s = 0; s < snaps.size(); ++s)
                    values[s] = snapshot_entry_loglik(*snaps[s], data, i, j) / std::max(data.Y(i, j), 1.0);
                const double y = data.Y(i, j);
                out.test_loglik += y * log_mean_exp(values);
                mass += y;
                out.test_entries += 1;
            }
    } else {
        for (Index i = 0; i < data.rows(); ++i)
            for (Index j = 0; j < data.cols(); ++j) {
                if (data.mask(i, j)) continue;
                for (std::size_t s = 0; s < snaps.size(); ++s) values[s] = snapshot_entry_loglik(*snaps[s], data, i, j);
                out.test_loglik += log_mean_exp(values);
                mass += data.Y(i, j);
                out.test_entries += 1;
            }
    }
    if (is_count_family(data.likelihood)) {
        out.normalizer = data.likelihood == Likelihood::Bernoulli || mass <= 0.0 ? static_cast<double>(out.test_entries)
                                                                                  : mass;
        out.perplexity = out.normalizer > 0.0 ? std::exp(-out.test_loglik / out.normalizer) : 1.0;
    }
    return out;
}

// ---------------------------------------------------------------------------

MatrixXd cambridge_mean(const CambridgeModel& model, const MatrixXd& X, const BinaryMatrix& Z) {
    const Index k = model.frequencies.rows();
    MatrixXd basis(X.rows(), 2 * k);
    for (Index i = 0; i < X.rows(); ++i) {
        VectorXd v(X.cols());
        for (Index d = 0; d < X.cols(); ++d) v(d) = Z(i, d) ? X(i, d) : 0.0;
        const VectorXd proj = model.frequencies * v;
        for (Index f = 0; f < k; ++f) {
            basis(i, 2 * f) = std::sin(proj(f));
            basis(i, 2 * f + 1) = std::cos(proj(f)) - 1.0;
        }
    }
    return basis * model.coefficients;
}

namespace {

constexpr int kSide = 6;
constexpr int kDims = 4;
constexpr int kFrequencies = 16;
constexpr double kActivation = 0.5;

Mask cambridge_templates() {
    Mask t = Mask::Constant(kDims, kSide * kSide, false);
    auto set = [&](int d, int r, int c) { t(d, r * kSide + c) = true; };
    for (int c = 0; c < kSide; ++c) set(0, 0, c);              // top bar
    for (int r = 1; r < kSide; ++r) set(1, r, 0);              // left bar
    for (int c = 2; c < kSide; ++c) set(2, kSide - 1, c);      // bottom-right corner
    for (int r = 2; r < kSide - 1; ++r) set(2, r, kSide - 1);
    for (int k = 1; k < kSide - 1; ++k) set(3, k, k);          // diagonal
    return t;
}

} // namespace

CambridgeData generate_cambridge(Index n, double noise, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("generate_cambridge: n must be >= 1");
    if (!(noise >= 0.0)) throw std::invalid_argument("generate_cambridge: noise must be >= 0");
    Rng rng = Rng(seed).split(tag(Stream::Data));
    CambridgeData out;
    CambridgeModel& model = out.model;
    model.templates = cambridge_templates();
    model.frequencies.resize(kFrequencies, kDims);
    for (Index f = 0; f < kFrequencies; ++f)
        for (Index d = 0; d < kDims; ++d) model.frequencies(f, d) = rng.normal();
    // Each template's pixels share one output weight vector.
    model.coefficients = MatrixXd::Zero(2 * kFrequencies, kSide * kSide);
    const double coef_sd = 1.0 / std::sqrt(static_cast<double>(kFrequencies));
    for (int d = 0; d < kDims; ++d) {
        VectorXd w(2 * kFrequencies);
        for (Index f = 0; f < w.size(); ++f) w(f) = coef_sd * rng.normal();
        for (Index j = 0; j < kSide * kSide; ++j)
            if (model.templates(d, j)) model.coefficients.col(j) = w;
    }
    out.activation = VectorXd::Constant(kDims, kActivation);
    out.X.resize(n, kDims);
    out.Z.resize(n, kDims);
    for (Index i = 0; i < n; ++i)
        for (Index d = 0; d < kDims; ++d) {
            out.X(i, d) = rng.normal();
            out.Z(i, d) = rng.bernoulli(out.activation(d)) ? 1 : 0;
        }
    MatrixXd Y = cambridge_mean(model, out.X, out.Z);
    if (noise > 0.0)
        for (Index i = 0; i < Y.rows(); ++i)
            for (Index j = 0; j < Y.cols(); ++j) Y(i, j) += noise * rng.normal();
    out.data = make_dataset(std::move(Y), Likelihood::Gaussian);
    return out;
}

// ---------------------------------------------------------------------------

std::vector<double> EvalReport::test_logliks() const {
    std::vector<double> out;
    for (const auto& t : trials) out.push_back(t.score.test_loglik);
    return out;
}

std::vector<double> EvalReport::perplexities() const {
    std::vector<double> out;
    for (const auto& t : trials) out.push_back(t.score.perplexity);
    return out;
}

DPlusSummary EvalReport::d_plus() const {
    DPlusSummary out;
    std::map<Index, Index> counts;
    double sum = 0.0;
    Index total = 0;
    out.min = std::numeric_limits<Index>::max();
    const int burnin = config.effective_burnin();
    for (const auto& t : trials) {
        if (!t.records.empty()) out.final_per_trial.push_back(t.records.back().d_plus);
        for (const auto& r : t.records) {
            if (r.iteration <= burnin) continue;
            counts[r.d_plus] += 1;
            sum += static_cast<double>(r.d_plus);
            total += 1;
            out.min = std::min(out.min, r.d_plus);
            out.max = std::max(out.max, r.d_plus);
        }
    }
    if (total == 0) {
        out.min = 0;
        return out;
    }
    out.mean = sum / static_cast<double>(total);
    Index best = -1;
    for (const auto& [d, c] : counts)
        if (c > best) {
            best = c;
            out.mode = d;
        }
    return out;
}

MeanSe mean_se(const std::vector<double>& values) {
    MeanSe out;
    if (values.empty()) return out;
    const double n = static_cast<double>(values.size());
    for (double v : values) out.mean += v;
    out.mean /= n;
    if (values.size() < 2) return out;
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return out;
}

EvalReport run_fit(const Dataset& data, const FitConfig& config, const Hyperparameters& hp) {
    if (config.trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (!(config.holdout > 0.0)) throw std::invalid_argument("scoring needs a positive holdout fraction");
    if (config.baseline_lfm && data.likelihood != Likelihood::Gaussian)
        throw std::invalid_argument("the IBP LFM baseline supports Gaussian data only");
    Hyperparameters h = hp;
    h.num_features = config.features;
    validate_hyperparameters(h);

    EvalReport report;
    report.config = config;
    const auto start = std::chrono::steady_clock::now();
    for (int t = 0; t < config.trials; ++t) {
        const auto trial_start = std::chrono::steady_clock::now();
        TrialResult trial;
        trial.seed = config.seed + static_cast<std::uint64_t>(t);
        const Dataset split = holdout_split(data, config.holdout, trial.seed);
        validate_dataset(split, true);
        ChainConfig chain;
        chain.iters = config.iters;
        chain.burnin = config.effective_burnin();
        chain.thin = config.thin;
        chain.seed = trial.seed;
        chain.d_init = config.d_init;
        chain.parallel = config.parallel;
        trial.records = config.baseline_lfm ? run_ibp_lfm(split, h, chain) : run_chain(split, h, chain);
        trial.score = score(trial.records, split);
        for (auto& r : trial.records) r.snapshot.reset();
        trial.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - trial_start).count();
        report.trials.push_back(std::move(trial));
    }
    report.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::string report_json(const EvalReport& report, bool include_runtime) {
    using nlohmann::ordered_json;
    const FitConfig& c = report.config;
    ordered_json j;
    j["model"] = c.baseline_lfm ? "ibp-lfm" : "ibp-rflvm";
    j["likelihood"] = std::string(to_string(c.likelihood));
    const auto ll = report.test_logliks();
    const MeanSe ll_stats = mean_se(ll);
    j["test_loglik"] = {{"mean", ll_stats.mean}, {"se", ll_stats.se}, {"per_trial", ll}};
    if (is_count_family(c.likelihood)) {
        const auto px = report.perplexities();
        const MeanSe px_stats = mean_se(px);
        j["perplexity"] = {{"mean", px_stats.mean},
                           {"se", px_stats.se},
                           {"per_trial", px},
                           {"normalizer", c.likelihood == Likelihood::Bernoulli ? "held-out entries"
                                                                                : "held-out count mass"}};
    }
    const DPlusSummary d = report.d_plus();
    j["d_plus"] = {{"trajectory_summary",
                    {{"mode", d.mode}, {"mean", d.mean}, {"min", d.min}, {"max", d.max},
                     {"final_per_trial", d.final_per_trial}}}};
    j["config_echo"] = {{"likelihood", std::string(to_string(c.likelihood))},
                        {"iters", c.iters},
                        {"burnin", c.effective_burnin()},
                        {"thin", c.thin},
                        {"features", c.features},
                        {"holdout", c.holdout},
                        {"trials", c.trials},
                        {"seed", c.seed},
                        {"d_init", c.d_init},
                        {"baseline", c.baseline_lfm ? "ibp-lfm" : "none"},
                        {"sqrt_transform", c.sqrt_transform}};
    if (include_runtime) j["runtime_s"] = report.runtime_s;
    return j.dump(2) + "\n";
}

std::string diagnostics_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "trial,iteration,d_plus,k_plus,train_loglik\n";
    out << std::setprecision(17);
    for (std::size_t t = 0; t < report.trials.size(); ++t)
        for (const auto& r : report.trials[t].records)
            out << t << ',' << r.iteration << ',' << r.d_plus << ',' << r.k_plus << ',' << r.train_loglik << '\n';
    return out.str();
}

} // namespace sirf
