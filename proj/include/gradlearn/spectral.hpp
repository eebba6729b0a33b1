#pragma once

#include "gradlearn/gradient_classification.hpp"
#include "gradlearn/gradient_regression.hpp"
#include "gradlearn/kernel.hpp"

#include <Eigen/Dense>

#include <utility>

namespace gradlearn {

enum class GramKind { gop, egcm };

// A symmetric PSD matrix represented by its factor: the matrix is
// factor * factor^T and is never materialized.  For the gradient outer
// product the factor columns are f(x_l)/sqrt(n); for the gradient covariance
// they are c_D * L with L the Cholesky factor of the kernel matrix.
struct LowRankGram {
    Eigen::MatrixXd factor; // p x n
    GramKind kind = GramKind::gop;
};

struct SpectralResult {
    Eigen::VectorXd eigenvalues;  // descending, nonnegative, at most n entries
    Eigen::MatrixXd eigenvectors; // p x k, orthonormal columns
    GramKind kind = GramKind::gop;
    // True when two retained eigenvalues are closer than 1e-10 * largest:
    // the individual vectors inside such a cluster are arbitrary up to
    // rotation, only their span is meaningful.
    bool has_degenerate_cluster = false;
};

// Retained predictive directions (columns orthonormal).
struct EdrEstimate {
    Eigen::MatrixXd B_hat; // p x k
    Eigen::Index k = 0;
    Eigen::VectorXd eigenvalues_used;
};

// Factor of (1/m) sum_l f(x_l) f(x_l)^T over the rows of X_eval.
LowRankGram gradient_outer_product(const GradientModel& model, const Eigen::MatrixXd& X_eval);
LowRankGram gradient_outer_product(const ClassGradientModel& model, const Eigen::MatrixXd& X_eval);

// Factor of the gradient covariance matrix c_D K c_D^T via the PSD factor
// of the training kernel matrix.
LowRankGram egcm(const GradientModel& model, const PsdFactor& K_factor);
LowRankGram egcm(const ClassGradientModel& model, const PsdFactor& K_factor);

// Top eigenpairs of factor * factor^T computed through a thin SVD of the
// p x n factor alone (O(pn) memory, no p x p allocation).  Returns the top
// min(k_max, numerical rank) pairs; each eigenvector's largest-magnitude
// component is made positive.
SpectralResult top_eigen(const LowRankGram& gram, Eigen::Index k_max);

// Retains the first k eigenvectors.  Throws when k exceeds the available pairs.
EdrEstimate edr_estimate(const SpectralResult& spec, Eigen::Index k);

// X * B_hat.
Eigen::MatrixXd project(const Eigen::MatrixXd& X, const EdrEstimate& edr);

// (ratio, residual_mass) with ratio = lambda_{k_true+1}/lambda_{k_true} and
// residual_mass the trailing eigenvalue fraction past position k_true.
// Eigenvalues beyond the retained spectrum count as exact zeros, so
// k_true == count is allowed (both quantities are then zero).
std::pair<double, double> trailing_eigenvalue_profile(const SpectralResult& spec,
                                                      Eigen::Index k_true);

} // namespace gradlearn
