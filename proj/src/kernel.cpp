#include "gradlearn/kernel.hpp"

#include "gradlearn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace gradlearn {

void KernelSpec::validate() const {
    if (!(sigma > 0.0))
        throw std::invalid_argument("kernel: sigma must be positive");
}

void WeightSpec::validate() const {
    if (!(s > 0.0))
        throw std::invalid_argument("weight: bandwidth s must be positive");
}

double gaussian_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                       const KernelSpec& spec) {
    spec.validate();
    if (x.size() != u.size())
        throw std::invalid_argument("gaussian_kernel: dimension mismatch");
    const double d2 = (x - u).squaredNorm();
    return std::exp(-d2 / (spec.sigma * spec.sigma));
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& X) {
    const Eigen::VectorXd sq = X.rowwise().squaredNorm();
    Eigen::MatrixXd D2 = sq.replicate(1, X.rows()) + sq.transpose().replicate(X.rows(), 1)
                       - 2.0 * X * X.transpose();
    return D2.cwiseMax(0.0);
}

namespace {

Eigen::MatrixXd exp_of_scaled_distances(const Eigen::MatrixXd& X, double denom) {
    Eigen::MatrixXd M = (-squared_distances(X) / denom).array().exp().matrix();
    M.diagonal().setOnes();
    // Enforce exact symmetry; the distance expansion is symmetric only up to
    // rounding.
    M = ((M + M.transpose()) * 0.5).eval();
    return M;
}

} // namespace

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, const KernelSpec& spec) {
    spec.validate();
    return exp_of_scaled_distances(X, spec.sigma * spec.sigma);
}

Eigen::MatrixXd kernel_cross_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                    const KernelSpec& spec) {
    spec.validate();
    if (A.cols() != B.cols())
        throw std::invalid_argument("kernel_cross_matrix: dimension mismatch");
    Eigen::MatrixXd out(A.rows(), B.rows());
    const double denom = spec.sigma * spec.sigma;
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < B.rows(); ++j)
            out(i, j) = std::exp(-(A.row(i) - B.row(j)).squaredNorm() / denom);
    return out;
}

Eigen::MatrixXd weight_matrix(const Eigen::MatrixXd& X, const WeightSpec& spec) {
    spec.validate();
    return exp_of_scaled_distances(X, spec.denominator());
}

double median_pairwise_distance(const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows();
    if (n < 2)
        throw std::invalid_argument("median_pairwise_distance: need at least 2 points");
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            d.push_back((X.row(i) - X.row(j)).norm());
    std::sort(d.begin(), d.end());
    const std::size_t m = d.size();
    if (m % 2 == 1) return d[m / 2];
    return 0.5 * (d[m / 2 - 1] + d[m / 2]);
}

std::pair<double, double> default_bandwidths(const Eigen::MatrixXd& X) {
    const double s = median_pairwise_distance(X);
    if (s <= 0.0)
        throw NumericalError("default_bandwidths: degenerate data, median pairwise distance is zero");
    return {s, 0.2 * s};
}

PsdFactor cholesky_psd(const Eigen::MatrixXd& M) {
    if (M.rows() != M.cols())
        throw std::invalid_argument("cholesky_psd: matrix must be square");
    if (!M.isApprox(M.transpose(), 1e-10))
        throw std::invalid_argument("cholesky_psd: matrix must be symmetric");
    const Eigen::Index n = M.rows();
    const double base = 1e-12 * M.trace() / static_cast<double>(n);

    double jitter = 0.0;
    for (int attempt = 0; attempt <= 6; ++attempt) {
        Eigen::MatrixXd shifted = M;
        if (jitter > 0.0) shifted.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(shifted);
        if (llt.info() == Eigen::Success)
            return PsdFactor{llt.matrixL(), jitter};
        jitter = (jitter == 0.0) ? base : jitter * 10.0;
        if (jitter <= 0.0) break; // trace 0 leaves no jitter to escalate
    }
    throw NumericalError("cholesky_psd: factorization failed at maximum jitter (input not PSD)");
}

} // namespace gradlearn
