#pragma once

#include <Eigen/Core>

namespace sirf {

/// N x (2M+1) random Fourier basis: [sin(w_1.v), cos(w_1.v), ..., sin(w_M.v),
/// cos(w_M.v)] / sqrt(M) followed by a constant intercept column of ones.
using FeatureMatrix = Eigen::MatrixXd;

inline Eigen::Index feature_count(Eigen::Index num_frequencies) { return 2 * num_frequencies + 1; }

/// Rows of `latent` are the masked inputs v_i = x_i .* z_i. Parallel over rows.
FeatureMatrix feature_map(const Eigen::MatrixXd& latent, const Eigen::MatrixXd& W);

/// Single-threaded reference for feature_map; results are bitwise identical.
FeatureMatrix feature_map_serial(const Eigen::MatrixXd& latent, const Eigen::MatrixXd& W);

/// Basis evaluation of one input.
Eigen::VectorXd feature_row(const Eigen::VectorXd& v, const Eigen::MatrixXd& W);

/// Overwrites the sin/cos pair of frequency m in every row of phi.
void refresh_frequency(FeatureMatrix& phi, const Eigen::MatrixXd& latent,
                       const Eigen::VectorXd& w, Eigen::Index m, Eigen::Index num_frequencies);

/// Monte Carlo kernel estimate <phi(x), phi(xp)> over the non-intercept block.
double kernel_estimate(const Eigen::VectorXd& x, const Eigen::VectorXd& xp, const Eigen::MatrixXd& W);

} // namespace sirf
