#pragma once

#include "sirf/mixture.hpp"
#include "sirf/model.hpp"
#include "sirf/rff.hpp"
#include "sirf/row_model.hpp"

#include <memory>

namespace sirf {

/**
 * Training log-likelihood of a dataset as a function of (X .* Z, W), with the
 * caches needed for cheap single-row and single-frequency deltas.
 *
 * The engine keeps its own copy of the masked latent matrix, W and the
 * feature matrix. Callers mutate the state through commit_row and
 * accept_frequency, or call reset() after editing the state directly.
 */
class LikelihoodEngine : public RowModel, public FrequencyModel {
  public:
    LikelihoodEngine(const Dataset& data, const Hyperparameters& hp, bool parallel);

    /// Recomputes features and every cache from the state.
    virtual void reset(const ModelState& state) = 0;
    /// Adopts a new dimension layout that leaves the features unchanged
    /// (zero-activation births, pruning, reordering).
    void reshape(const ModelState& state);
    /// Replaces the regression parameters; no-op for collapsed engines.
    virtual void set_parameters(const ModelState& state) { (void)state; }
    virtual double total() const = 0;

    const FeatureMatrix& features() const { return phi_; }
    const MatrixXd& latent() const { return latent_; }
    bool parallel() const { return parallel_; }

  protected:
    void load_geometry(const ModelState& state);
    /// New sin/cos pair of frequency m for every row.
    MatrixXd frequency_block(const VectorXd& w) const;

    const Dataset& data_;
    Hyperparameters hp_;
    bool parallel_;
    MatrixXd latent_;
    MatrixXd W_;
    FeatureMatrix phi_;
};

/// beta and sigma^2 integrated out column by column.
class CollapsedGaussianEngine final : public LikelihoodEngine {
  public:
    CollapsedGaussianEngine(const Dataset& data, const Hyperparameters& hp, bool parallel = true);

    void reset(const ModelState& state) override;
    double total() const override;
    double column_loglik(Index j) const;

    double row_delta(Index i, const VectorXd& v) override;
    void commit_row(Index i, const VectorXd& v) override;
    double frequency_delta(Index m, const VectorXd& w) override;
    void accept_frequency() override;

    struct Column {
        MatrixXd a_inv;
        VectorXd b;
        VectorXd mean; ///< A^{-1} b
        double c = 0.0;
        double logdet = 0.0;
        double quad = 0.0; ///< b^T A^{-1} b
        Index n = 0;
    };
    struct Change {
        MatrixXd u;
        MatrixXd a_inv_u;
        MatrixXd k_inv;
        VectorXd g;
        VectorXd a_inv_b;
        VectorXd u_a_inv_b;
        double logdet = 0.0;
        double quad = 0.0;
        bool active = false;
    };

  private:
    void rebuild_column(Index j);
    double loglik_of(Index n, double logdet, double c, double quad) const;
    void prepare(Index j, MatrixXd u, const MatrixXd& c_inv, double log_abs_det_c, VectorXd g,
                 Change& out) const;
    void apply(Index j, const Change& change);
    double pending_total() const;

    std::vector<Column> columns_;
    std::vector<Change> pending_;
    VectorXd prior_prec_;
    double prior_logdet_prec_ = 0.0;
    Index pending_row_ = -1;
    VectorXd pending_v_;
    VectorXd pending_phi_;
    Index pending_m_ = -1;
    VectorXd pending_w_;
    MatrixXd pending_block_;
};

/// Explicit beta (and dispersion) for the non-Gaussian families.
class InstantiatedEngine final : public LikelihoodEngine {
  public:
    InstantiatedEngine(const Dataset& data, const Hyperparameters& hp, bool parallel = true);

    void reset(const ModelState& state) override;
    void set_parameters(const ModelState& state) override;
    double total() const override;
    const MatrixXd& psi() const { return psi_; }

    double row_delta(Index i, const VectorXd& v) override;
    void commit_row(Index i, const VectorXd& v) override;
    double frequency_delta(Index m, const VectorXd& w) override;
    void accept_frequency() override;

  private:
    void refresh_loglik();
    double row_loglik(Index i, const VectorXd& psi_row) const;
    VectorXd row_terms(Index i, const VectorXd& psi_row) const;

    MatrixXd beta_;
    VectorXd dispersion_;
    MatrixXd psi_;
    MatrixXd entry_loglik_; ///< per entry; multinomial keeps the row total in column 0
    Index pending_row_ = -1;
    VectorXd pending_v_;
    VectorXd pending_phi_;
    Index pending_m_ = -1;
    VectorXd pending_w_;
    MatrixXd pending_block_;
    MatrixXd pending_psi_;
    MatrixXd pending_loglik_;
};

std::unique_ptr<LikelihoodEngine> make_engine(const Dataset& data, const Hyperparameters& hp,
                                              bool parallel = true);

} // namespace sirf
