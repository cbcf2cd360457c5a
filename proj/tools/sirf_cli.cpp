// Command-line front end: fit, synth cambridge, geweke.

#include "sirf/errors.hpp"
#include "sirf/eval.hpp"
#include "sirf/geweke.hpp"

#include <CLI11.hpp>

#include <omp.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace {

constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw sirf::DataError("cannot write " + path.string());
    out << text;
}

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
    std::ostringstream out;
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
        out << '\n';
    }
    write_file(path, out.str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse infinite random-feature latent variable model"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);

    sirf::FitConfig fit;
    std::string data_path, out_dir, likelihood = "gaussian", baseline = "none", format = "csv";
    bool header = false, reproducible = false;
    auto* fit_cmd = app.add_subcommand("fit", "Holdout evaluation of the model on a data matrix");
    fit_cmd->add_option("--data", data_path, "Input matrix")->required();
    fit_cmd->add_option("--likelihood", likelihood)
        ->check(CLI::IsMember({"gaussian", "bernoulli", "nb", "poisson", "multinomial"}));
    fit_cmd->add_option("--iters", fit.iters)->check(CLI::PositiveNumber);
    fit_cmd->add_option("--features", fit.features, "Number of random frequencies M")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--holdout", fit.holdout, "Held-out entry fraction in (0, 1)")->check(CLI::Range(1e-12, 1.0 - 1e-12));
    fit_cmd->add_option("--trials", fit.trials)->check(CLI::PositiveNumber);
    fit_cmd->add_option("--seed", fit.seed);
    fit_cmd->add_option("--out", out_dir, "Output directory")->required();
    fit_cmd->add_flag("--sqrt-transform", fit.sqrt_transform, "Square-root transform counts before a Gaussian fit");
    fit_cmd->add_option("--baseline", baseline)->check(CLI::IsMember({"none", "ibp-lfm"}));
    fit_cmd->add_option("--d-init", fit.d_init)->check(CLI::PositiveNumber);
    fit_cmd->add_option("--burnin", fit.burnin, "Burn-in iterations (default: half of --iters)");
    fit_cmd->add_option("--thin", fit.thin)->check(CLI::PositiveNumber);
    fit_cmd->add_option("--format", format)->check(CLI::IsMember({"csv", "tsv"}));
    fit_cmd->add_flag("--header", header, "First line is a header");
    fit_cmd->add_flag("--reproducible", reproducible, "Omit wall-clock fields from the report");

    auto* synth_cmd = app.add_subcommand("synth", "Synthetic data generators");
    synth_cmd->require_subcommand(1);
    auto* cambridge_cmd = synth_cmd->add_subcommand("cambridge", "Sparse nonlinear 6x6 image data");
    long synth_n = 150;
    double synth_noise = 0.1;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    cambridge_cmd->add_option("--n", synth_n)->check(CLI::PositiveNumber);
    cambridge_cmd->add_option("--noise", synth_noise)->check(CLI::NonNegativeNumber);
    cambridge_cmd->add_option("--seed", synth_seed);
    cambridge_cmd->add_option("--out", synth_out, "CSV path; ground-truth Z goes to <out>.z.csv")->required();

    auto* geweke_cmd = app.add_subcommand("geweke", "Joint-distribution test of the sampler");
    sirf::GewekeConfig geweke;
    std::string geweke_family = "gaussian";
    bool mutate = false;
    geweke_cmd->add_option("--family", geweke_family)
        ->check(CLI::IsMember({"gaussian", "bernoulli", "nb", "poisson", "multinomial"}));
    geweke_cmd->add_option("--iters", geweke.iters)->check(CLI::NonNegativeNumber);
    geweke_cmd->add_option("--seed", geweke.seed);
    geweke_cmd->add_flag("--mutate", mutate, "Swap the Beta shapes of the stick-weight update");

    CLI11_PARSE(app, argc, argv);
    if (threads > 0) omp_set_num_threads(threads);

    try {
        if (*fit_cmd) {
            fit.likelihood = sirf::parse_likelihood(likelihood);
            fit.baseline_lfm = baseline == "ibp-lfm";
            sirf::LoadOptions load;
            load.format = format == "tsv" ? sirf::TextFormat::Tsv : sirf::TextFormat::Csv;
            load.header = header;
            load.likelihood = fit.likelihood;
            load.sqrt_transform = fit.sqrt_transform;
            const sirf::Dataset data = sirf::load_matrix(data_path, load);
            const sirf::EvalReport report = sirf::run_fit(data, fit, sirf::Hyperparameters{});
            std::filesystem::create_directories(out_dir);
            write_file(std::filesystem::path(out_dir) / "report.json", sirf::report_json(report, !reproducible));
            write_file(std::filesystem::path(out_dir) / "diagnostics.csv", sirf::diagnostics_csv(report));
            const auto ll = sirf::mean_se(report.test_logliks());
            std::cout << "test_loglik " << ll.mean << " (" << ll.se << ")\n";
            if (sirf::is_count_family(fit.likelihood)) {
                const auto px = sirf::mean_se(report.perplexities());
                std::cout << "perplexity " << px.mean << " (" << px.se << ")\n";
            }
            return 0;
        }
        if (*cambridge_cmd) {
            const auto gen = sirf::generate_cambridge(synth_n, synth_noise, synth_seed);
            write_matrix(synth_out, gen.data.Y);
            write_matrix(synth_out + ".z.csv", gen.Z.cast<double>());
            return 0;
        }
        if (*geweke_cmd) {
            geweke.family = sirf::parse_likelihood(geweke_family);
            geweke.sweep.swap_active_weight_beta = mutate;
            const auto report = sirf::geweke_check(sirf::Hyperparameters{}, geweke);
            if (!report.valid) {
                std::cerr << "geweke: too few iterations for a valid report\n";
                return 1;
            }
            std::cout << std::left << std::setw(14) << "statistic" << std::setw(14) << "forward" << std::setw(14)
                      << "chain" << std::setw(10) << "z" << "p\n";
            for (const auto& s : report.stats)
                std::cout << std::setw(14) << s.name << std::setw(14) << s.forward_mean << std::setw(14)
                          << s.chain_mean << std::setw(10) << s.z << s.p_value << '\n';
            if (report.diverged)
                std::cout << "chain diverged after " << report.chain_samples << " sweeps\n";
            std::cout << (report.passed() ? "PASS" : "FAIL") << '\n';
            return report.passed() ? 0 : 1;
        }
    } catch (const sirf::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const sirf::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
