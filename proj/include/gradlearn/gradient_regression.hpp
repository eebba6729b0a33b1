#pragma once

#include "gradlearn/dataset.hpp"
#include "gradlearn/kernel.hpp"

#include <Eigen/Dense>

#include <vector>

namespace gradlearn {

// Orthonormal basis of the centered data span.  coords * basis^T plus the
// row mean reproduces X up to the dropped singular directions (those below
// 1e-10 of the largest singular value).
struct SpanBasis {
    Eigen::MatrixXd basis;   // p x r, orthonormal columns
    Eigen::MatrixXd coords;  // n x r
    Eigen::RowVectorXd mean; // 1 x p
    Eigen::Index r = 0;
};

SpanBasis span_basis(const Eigen::MatrixXd& X);

// Per-point second moments B_i = sum_j w_ij v_ij v_ij^T and first moments
// h_i = sum_j w_ij (y_j - y_i) v_ij, with v_ij = basis^T (x_j - x_i).
struct LocalMoments {
    std::vector<Eigen::MatrixXd> B; // n matrices, r x r, symmetric PSD
    std::vector<Eigen::VectorXd> h; // n vectors, r
    Eigen::MatrixXd basis;          // p x r
    Eigen::Index r = 0;
};

LocalMoments assemble_local_moments(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                    const WeightSpec& weight, const Eigen::MatrixXd& basis);

// Fitted gradient estimate in representer form: f(x) = sum_i c_i K(x, x_i)
// with c_i the columns of `coefficients`.
struct GradientModel {
    Eigen::MatrixXd coefficients; // p x n
    Eigen::MatrixXd train_points; // n x p
    KernelSpec kernel;
    WeightSpec weight;
    double lambda = 0.0;
    double objective_value = 0.0;
};

enum class RegressionSolver { automatic, dense, iterative };

struct RegressionSolverOptions {
    RegressionSolver solver = RegressionSolver::automatic;
    // automatic: dense direct solve while n*r stays at or below this bound,
    // otherwise restarted GMRES with a block-diagonal preconditioner.
    Eigen::Index dense_size_limit = 2000;
    double iterative_tol = 1e-12; // relative residual target
    int gmres_restart = 60;
    int max_iterations = 5000;
};

// Minimizes
//   (1/n^2) sum_ij w_ij (y_j - y_i - f(x_i).(x_j - x_i))^2 + lambda ||f||_K^2
// over vector-valued representer expansions by solving the stationarity
// system  B_i (sum_l K_il c_l) + n^2 lambda c_i = h_i  in span-reduced
// coordinates, then mapping back to p dimensions.
GradientModel fit_gradient_regression(const Dataset& data, const KernelSpec& kernel,
                                      const WeightSpec& weight, double lambda = 1e-4,
                                      const RegressionSolverOptions& opts = {});

// Test oracle: builds and solves the full n*p x n*p stationarity system with
// no span reduction.  Guarded to n*p <= 2000.
GradientModel dense_oracle_fit(const Dataset& data, const KernelSpec& kernel,
                               const WeightSpec& weight, double lambda);

// f(x) = coefficients * k(x) with k(x)_i = K(x, x_i); valid out of sample.
Eigen::VectorXd predict_gradient(const GradientModel& model, const Eigen::VectorXd& x);

// Column j holds the predicted gradient at row j of X_eval (p x m).
Eigen::MatrixXd predict_gradient_matrix(const GradientModel& model,
                                        const Eigen::MatrixXd& X_eval);

// Regularized empirical objective at the model's coefficients.
double regression_objective(const GradientModel& model, const Dataset& data);

// max_i || B_i (sum_l K_il c_l) + n^2 lambda c_i - h_i || / (1 + max_i ||h_i||),
// evaluated in ambient coordinates.  The fit contract keeps this below 1e-8.
double stationarity_residual(const GradientModel& model, const Dataset& data);

// RKHS norm squared of the fitted function: trace(c K c^T).
double rkhs_norm_squared(const GradientModel& model);

} // namespace gradlearn
