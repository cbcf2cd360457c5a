#pragma once

#include "sirf/rng.hpp"

#include <Eigen/Core>

namespace sirf {

/// Data log-likelihood viewed as a function of one row's masked latent input
/// v_i = x_i .* z_i. Implementations keep whatever caches make the delta cheap.
class RowModel {
  public:
    virtual ~RowModel() = default;
    /// Change in the training log-likelihood if row i's input became v.
    virtual double row_delta(Eigen::Index i, const Eigen::VectorXd& v) = 0;
    virtual void commit_row(Eigen::Index i, const Eigen::VectorXd& v) = 0;
};

/// One elliptical slice step per row of X under its N(0, I) prior.
void update_latent_rows(Eigen::MatrixXd& X, const Eigen::MatrixXi& Z, RowModel& model, Rng& rng);

} // namespace sirf
