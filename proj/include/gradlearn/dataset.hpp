#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace gradlearn {

// A sample of n points in R^p with one response per point.  Rows of X are
// samples.  For classification tasks the responses must be exactly +1 or -1.
struct Dataset {
    Eigen::MatrixXd X; // n x p
    Eigen::VectorXd y; // n

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index p() const { return X.cols(); }

    void check_consistent() const {
        if (X.rows() != y.size())
            throw std::invalid_argument("dataset: row count does not match response length");
    }

    bool labels_are_binary() const {
        for (Eigen::Index i = 0; i < y.size(); ++i)
            if (y[i] != 1.0 && y[i] != -1.0) return false;
        return true;
    }
};

} // namespace gradlearn
