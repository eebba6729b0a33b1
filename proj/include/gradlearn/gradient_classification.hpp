#pragma once

#include "gradlearn/dataset.hpp"
#include "gradlearn/kernel.hpp"

#include <Eigen/Dense>

#include <vector>

namespace gradlearn {

// Joint fit of a log-odds function g(x) = sum_i alpha_i K(x, x_i) and its
// gradient field f(x) = sum_i c_i K(x, x_i) under the pairwise logistic
// objective (see fit_gradient_classification).
struct ClassGradientModel {
    Eigen::VectorXd g_coefficients;    // alpha, length n
    Eigen::MatrixXd grad_coefficients; // c_D, p x n
    Eigen::MatrixXd train_points;      // n x p
    KernelSpec kernel;
    WeightSpec weight;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double objective_value = 0.0;
    int iterations = 0;
    bool converged = false;
    // Objective after the initial point and after every accepted step;
    // non-increasing by the line-search contract.
    std::vector<double> objective_history;
};

// phi(t) = log(1 + exp(-t)), evaluated without overflow for any t.
double logistic_loss(double t);
double logistic_loss_derivative(double t);        // phi'(t) = -1 / (1 + e^t)
double logistic_loss_second_derivative(double t); // phi''(t) in (0, 1/4]

// (1/n^2) sum_ij w_ij phi(y_i (g(x_j) + f(x_i).(x_i - x_j))) with g and f
// expanded through the representer coefficients.
double classification_risk(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& c_D,
                           const Dataset& data, const KernelSpec& kernel,
                           const WeightSpec& weight);

// Full regularized objective and its analytic gradient with respect to
// (alpha, c_D), computed directly in ambient coordinates.  Used to verify
// the span-reduced solver through an independent path.
struct ClassificationObjective {
    double value = 0.0;
    Eigen::VectorXd grad_alpha; // n
    Eigen::MatrixXd grad_c;     // p x n
};

ClassificationObjective classification_objective_with_gradient(
    const Eigen::VectorXd& alpha, const Eigen::MatrixXd& c_D, const Dataset& data,
    const KernelSpec& kernel, const WeightSpec& weight, double lambda1, double lambda2);

struct ClassifySolverOptions {
    double tol = 1e-8;   // Euclidean norm of the full parameter gradient
    int max_iters = 100; // damped Newton iterations
    // Dense Newton while n*(1+r) stays at or below this bound; otherwise an
    // inexact Newton step via preconditioned conjugate gradients.
    Eigen::Index dense_size_limit = 800;
    int cg_max_iterations = 400;
};

// Minimizes
//   (1/n^2) sum_ij w_ij phi(y_i (g(x_j) + f(x_i).(x_i - x_j)))
//     + lambda1 ||g||_K^2 + lambda2 ||f||_K^2
// by damped Newton iteration with backtracking line search (monotone
// objective decrease per accepted step).  Labels must be +1 or -1; both
// classes need not be present.  Returns the best iterate with
// converged = false if the gradient criterion is not met within max_iters.
ClassGradientModel fit_gradient_classification(const Dataset& data, const KernelSpec& kernel,
                                               const WeightSpec& weight, double lambda1,
                                               double lambda2,
                                               const ClassifySolverOptions& opts = {});

double predict_logodds(const ClassGradientModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd predict_class_gradient(const ClassGradientModel& model, const Eigen::VectorXd& x);
// Sign of the log-odds; exactly 0 maps to +1.
double predict_class_label(const ClassGradientModel& model, const Eigen::VectorXd& x);

// Column j holds the gradient estimate at row j of X_eval (p x m).
Eigen::MatrixXd predict_class_gradient_matrix(const ClassGradientModel& model,
                                              const Eigen::MatrixXd& X_eval);

} // namespace gradlearn
