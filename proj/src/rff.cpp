#include "sirf/rff.hpp"

#include <cmath>
#include <stdexcept>

namespace sirf {

namespace {

void check_shapes(Eigen::Index latent_cols, const Eigen::MatrixXd& W) {
    if (latent_cols != W.cols())
        throw std::invalid_argument("feature map: latent dimension " + std::to_string(latent_cols) +
                                    " != frequency dimension " + std::to_string(W.cols()));
}

template <class RowIn, class RowOut>
void fill_row(const RowIn& v, const Eigen::MatrixXd& W, double scale, RowOut&& out) {
    const Eigen::Index m = W.rows();
    for (Eigen::Index r = 0; r < m; ++r) {
        const double proj = W.row(r).dot(v);
        out(2 * r) = scale * std::sin(proj);
        out(2 * r + 1) = scale * std::cos(proj);
    }
    out(2 * m) = 1.0;
}

} // namespace

FeatureMatrix feature_map(const Eigen::MatrixXd& latent, const Eigen::MatrixXd& W) {
    check_shapes(latent.cols(), W);
    const Eigen::Index n = latent.rows();
    const double scale = 1.0 / std::sqrt(static_cast<double>(W.rows()));
    FeatureMatrix phi(n, feature_count(W.rows()));
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        fill_row(latent.row(i).transpose(), W, scale, phi.row(i));
    }
    return phi;
}

FeatureMatrix feature_map_serial(const Eigen::MatrixXd& latent, const Eigen::MatrixXd& W) {
    check_shapes(latent.cols(), W);
    const double scale = 1.0 / std::sqrt(static_cast<double>(W.rows()));
    FeatureMatrix phi(latent.rows(), feature_count(W.rows()));
    for (Eigen::Index i = 0; i < latent.rows(); ++i) fill_row(latent.row(i).transpose(), W, scale, phi.row(i));
    return phi;
}

Eigen::VectorXd feature_row(const Eigen::VectorXd& v, const Eigen::MatrixXd& W) {
    check_shapes(v.size(), W);
    Eigen::VectorXd out(feature_count(W.rows()));
    fill_row(v, W, 1.0 / std::sqrt(static_cast<double>(W.rows())), out);
    return out;
}

void refresh_frequency(FeatureMatrix& phi, const Eigen::MatrixXd& latent, const Eigen::VectorXd& w,
                       Eigen::Index m, Eigen::Index num_frequencies) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(num_frequencies));
    for (Eigen::Index i = 0; i < latent.rows(); ++i) {
        const double proj = latent.row(i).dot(w);
        phi(i, 2 * m) = scale * std::sin(proj);
        phi(i, 2 * m + 1) = scale * std::cos(proj);
    }
}

double kernel_estimate(const Eigen::VectorXd& x, const Eigen::VectorXd& xp, const Eigen::MatrixXd& W) {
    if (x.size() != xp.size()) throw std::invalid_argument("kernel_estimate: input sizes differ");
    const Eigen::VectorXd a = feature_row(x, W);
    const Eigen::VectorXd b = feature_row(xp, W);
    const Eigen::Index k = 2 * W.rows();
    return a.head(k).dot(b.head(k));
}

} // namespace sirf
