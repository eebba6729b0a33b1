#pragma once

#include <Eigen/Dense>

#include <utility>

namespace gradlearn {

enum class KernelFamily { gaussian };

// Gaussian kernel K(x,u) = exp(-||x-u||^2 / sigma^2).  Note the denominator
// is sigma^2, not 2*sigma^2: K(x,u) = 1/e exactly when ||x-u|| = sigma.
struct KernelSpec {
    KernelFamily family = KernelFamily::gaussian;
    double sigma = 1.0;

    void validate() const;
};

// Locality weight w(x,u) = exp(-||x-u||^2 / (f * s^2)) with f selected by
// denominator_factor.  Both forms appear in practice; one_s_sq is the
// default used throughout the bundled experiments.
enum class DenominatorFactor { one_s_sq, two_s_sq };

struct WeightSpec {
    double s = 1.0;
    DenominatorFactor factor = DenominatorFactor::one_s_sq;

    void validate() const;
    double denominator() const {
        return (factor == DenominatorFactor::two_s_sq ? 2.0 : 1.0) * s * s;
    }
};

// Lower-triangular factor of a PSD matrix: L * L^T = M + jitter_used * I.
struct PsdFactor {
    Eigen::MatrixXd L;
    double jitter_used = 0.0;
};

double gaussian_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                       const KernelSpec& spec);

// n x n matrix of pairwise kernel values over the rows of X; symmetric with
// unit diagonal.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, const KernelSpec& spec);

// Kernel evaluations between two point sets: result(i, j) = K(A_i, B_j).
Eigen::MatrixXd kernel_cross_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                    const KernelSpec& spec);

// n x n locality weights w_ij over the rows of X; symmetric, w_ii = 1.
Eigen::MatrixXd weight_matrix(const Eigen::MatrixXd& X, const WeightSpec& spec);

// Median of the n(n-1)/2 distinct-pair Euclidean distances (mean of the two
// middle order statistics when the pair count is even).  Returns 0 when all
// points coincide -- callers needing a usable bandwidth must treat 0 as a
// degenerate signal.  Throws for n < 2.
double median_pairwise_distance(const Eigen::MatrixXd& X);

// Bandwidth heuristic: s = median pairwise distance, sigma = 0.2 * s.
// Throws NumericalError when the median is degenerate (zero).
std::pair<double, double> default_bandwidths(const Eigen::MatrixXd& X);

// Cholesky factorization with escalating diagonal jitter.  Starts at
// 1e-12 * trace(M)/n and multiplies by 10 per retry (at most 6 retries);
// throws NumericalError if the largest jitter still fails, which signals a
// genuinely non-PSD input.
PsdFactor cholesky_psd(const Eigen::MatrixXd& M);

// Squared Euclidean distances between all row pairs, clamped at zero.
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& X);

} // namespace gradlearn
