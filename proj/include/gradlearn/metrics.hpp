#pragma once

#include "gradlearn/dataset.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace gradlearn {

// Canonical angles between two subspaces given by orthonormal bases.
struct SubspaceReport {
    std::vector<double> principal_angles; // radians, ascending, in [0, pi/2]
    double max_angle = 0.0;
    double alignment = 1.0; // product of the cosines
};

struct ErrorReport {
    double error_rate = 0.0;
    Eigen::Index n_test = 0;
    std::string method_label;
    Eigen::Index dimension_used = 0;
};

// Angles are arccos of the singular values of A^T B; both inputs must have
// orthonormal columns (checked to 1e-8).
SubspaceReport principal_angles(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

// Majority vote over the k nearest Euclidean neighbors.  Distance ties break
// toward the lower training index; vote ties (possible with even k) break
// toward +1.  Train labels must be +1/-1.
Eigen::VectorXd knn_classify(const Dataset& train, const Eigen::MatrixXd& test_points, int k);

ErrorReport error_rate(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual,
                       const std::string& method_label = "", Eigen::Index dimension_used = 0);

// Number of misclassified held-out points over n single-point folds.  The
// method receives the fold's training set and the held-out point and returns
// a predicted label; any failure is rethrown with the fold index attached.
using FitPredictMethod =
    std::function<double(const Dataset& train, const Eigen::RowVectorXd& query)>;

int loo_error(const Dataset& data, const FitPredictMethod& method);

} // namespace gradlearn
