#include "gradlearn/spectral.hpp"

#include "gradlearn/errors.hpp"

#include <cmath>
#include <limits>

namespace gradlearn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

LowRankGram gop_from_coefficients(const MatrixXd& coefficients, const MatrixXd& train_points,
                                  const KernelSpec& kernel, const MatrixXd& X_eval) {
    if (X_eval.cols() != train_points.cols())
        throw std::invalid_argument("gradient_outer_product: dimension mismatch");
    const Index m = X_eval.rows();
    LowRankGram gram;
    gram.kind = GramKind::gop;
    gram.factor = coefficients * kernel_cross_matrix(train_points, X_eval, kernel)
                / std::sqrt(static_cast<double>(m));
    return gram;
}

LowRankGram egcm_from_coefficients(const MatrixXd& coefficients, const PsdFactor& K_factor) {
    if (K_factor.L.rows() != coefficients.cols())
        throw std::invalid_argument("egcm: kernel factor size does not match coefficient count");
    LowRankGram gram;
    gram.kind = GramKind::egcm;
    gram.factor = coefficients * K_factor.L;
    return gram;
}

void make_largest_component_positive(Eigen::Ref<MatrixXd> U) {
    for (Index c = 0; c < U.cols(); ++c) {
        Index arg = 0;
        double best = -1.0;
        for (Index i = 0; i < U.rows(); ++i) {
            const double a = std::abs(U(i, c));
            if (a > best) { best = a; arg = i; }
        }
        if (U(arg, c) < 0.0) U.col(c) = -U.col(c);
    }
}

} // namespace

LowRankGram gradient_outer_product(const GradientModel& model, const Eigen::MatrixXd& X_eval) {
    return gop_from_coefficients(model.coefficients, model.train_points, model.kernel, X_eval);
}

LowRankGram gradient_outer_product(const ClassGradientModel& model, const Eigen::MatrixXd& X_eval) {
    return gop_from_coefficients(model.grad_coefficients, model.train_points, model.kernel,
                                 X_eval);
}

LowRankGram egcm(const GradientModel& model, const PsdFactor& K_factor) {
    return egcm_from_coefficients(model.coefficients, K_factor);
}

LowRankGram egcm(const ClassGradientModel& model, const PsdFactor& K_factor) {
    return egcm_from_coefficients(model.grad_coefficients, K_factor);
}

SpectralResult top_eigen(const LowRankGram& gram, Eigen::Index k_max) {
    if (k_max < 0 || k_max > gram.factor.cols())
        throw std::invalid_argument("top_eigen: k_max must lie in [0, n]");
    SpectralResult out;
    out.kind = gram.kind;

    Eigen::BDCSVD<MatrixXd> svd(gram.factor, Eigen::ComputeThinU);
    const VectorXd& s = svd.singularValues();
    Index rank = 0;
    if (s.size() > 0 && s[0] > 0.0) {
        const double cutoff = s[0] * std::numeric_limits<double>::epsilon()
                            * static_cast<double>(std::max(gram.factor.rows(), gram.factor.cols()));
        while (rank < s.size() && s[rank] > cutoff) ++rank;
    }
    const Index k = std::min(k_max, rank);
    out.eigenvalues = s.head(k).array().square().matrix();
    out.eigenvectors = svd.matrixU().leftCols(k);
    make_largest_component_positive(out.eigenvectors);

    out.has_degenerate_cluster = false;
    if (k > 1) {
        const double gap_floor = 1e-10 * out.eigenvalues[0];
        for (Index i = 0; i + 1 < k; ++i)
            if (out.eigenvalues[i] - out.eigenvalues[i + 1] < gap_floor)
                out.has_degenerate_cluster = true;
    }
    return out;
}

EdrEstimate edr_estimate(const SpectralResult& spec, Eigen::Index k) {
    if (k < 0 || k > spec.eigenvalues.size())
        throw std::invalid_argument("edr_estimate: k exceeds the available eigenpairs");
    EdrEstimate out;
    out.k = k;
    out.B_hat = spec.eigenvectors.leftCols(k);
    out.eigenvalues_used = spec.eigenvalues.head(k);
    return out;
}

Eigen::MatrixXd project(const Eigen::MatrixXd& X, const EdrEstimate& edr) {
    if (X.cols() != edr.B_hat.rows())
        throw std::invalid_argument("project: dimension mismatch");
    return X * edr.B_hat;
}

std::pair<double, double> trailing_eigenvalue_profile(const SpectralResult& spec,
                                                      Eigen::Index k_true) {
    const Index count = spec.eigenvalues.size();
    if (count == 0)
        throw std::invalid_argument("trailing_eigenvalue_profile: empty spectrum");
    if (k_true < 1 || k_true > count)
        throw std::invalid_argument("trailing_eigenvalue_profile: k_true out of range");

    const double num = (k_true < count) ? spec.eigenvalues[k_true] : 0.0;
    const double den = spec.eigenvalues[k_true - 1];
    const double ratio = (den == 0.0) ? 0.0 : num / den;

    const double total = spec.eigenvalues.sum();
    double trailing = 0.0;
    for (Index i = k_true; i < count; ++i) trailing += spec.eigenvalues[i];
    const double residual_mass = (total == 0.0) ? 0.0 : trailing / total;
    return {ratio, residual_mass};
}

} // namespace gradlearn
