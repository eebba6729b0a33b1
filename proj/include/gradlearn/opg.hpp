#pragma once

#include "gradlearn/dataset.hpp"
#include "gradlearn/kernel.hpp"
#include "gradlearn/spectral.hpp"

#include <Eigen/Dense>

#include <optional>

namespace gradlearn {

// Per-point weighted linear fits: for each j, (a_j, b_j) minimizes
//   sum_i w_ij (y_i - a - b.(x_i - x_j))^2   (+ ridge ||b||^2)
// so b_j estimates the gradient at x_j with a locally free intercept.
struct OpgFit {
    Eigen::VectorXd intercepts; // n
    Eigen::MatrixXd slopes;     // p x n, column j = b_j
    double ridge_used = 0.0;
};

struct PcaMap {
    Eigen::VectorXd mean;       // p
    Eigen::MatrixXd components; // p x m, orthonormal columns
    Eigen::Index m = 0;
};

// ridge semantics: an explicit value is applied to the b-block of every
// local normal-equation system; ridge 0 requires each local system to have
// full rank p+1 and throws otherwise.  When unset, ridge defaults to 0 for
// p < n and to 1e-8 * trace(local weighted second moment) per point when
// p >= n (ridge_used then records the largest value applied).
OpgFit opg_fit(const Dataset& data, const WeightSpec& weight,
               std::optional<double> ridge = std::nullopt);

// Factor with column j = b_j / sqrt(n), representing (1/n) sum_j b_j b_j^T.
LowRankGram opg_gram(const OpgFit& fit);

// Top-m principal directions of the centered data (1 <= m <= min(n-1, p)).
PcaMap pca_fit(const Eigen::MatrixXd& X, Eigen::Index m);

// Rows of X mapped to PC coordinates: (X - mean) * components.
Eigen::MatrixXd pca_apply(const PcaMap& map, const Eigen::MatrixXd& X);

// Directions (columns) in PC space mapped back to the ambient space:
// components * directions.  Used to compare PC-space gradient estimates
// with full-space ones.
Eigen::MatrixXd pca_lift(const PcaMap& map, const Eigen::MatrixXd& directions);

} // namespace gradlearn
