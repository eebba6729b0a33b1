#include "gradlearn/metrics.hpp"

#include "gradlearn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace gradlearn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void require_orthonormal(const MatrixXd& A, const char* which) {
    const MatrixXd gram = A.transpose() * A;
    const MatrixXd eye = MatrixXd::Identity(A.cols(), A.cols());
    if ((gram - eye).cwiseAbs().maxCoeff() > 1e-8)
        throw std::invalid_argument(std::string("principal_angles: ") + which
                                    + " does not have orthonormal columns");
}

} // namespace

SubspaceReport principal_angles(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.rows() != B.rows())
        throw std::invalid_argument("principal_angles: ambient dimensions differ");
    require_orthonormal(A, "first argument");
    require_orthonormal(B, "second argument");

    Eigen::BDCSVD<MatrixXd> svd(A.transpose() * B);
    const VectorXd& s = svd.singularValues();

    SubspaceReport report;
    report.alignment = 1.0;
    for (Index i = 0; i < s.size(); ++i) {
        const double c = std::clamp(s[i], 0.0, 1.0);
        report.principal_angles.push_back(std::acos(c));
        report.alignment *= c;
    }
    std::sort(report.principal_angles.begin(), report.principal_angles.end());
    report.max_angle = report.principal_angles.empty() ? 0.0 : report.principal_angles.back();
    return report;
}

Eigen::VectorXd knn_classify(const Dataset& train, const Eigen::MatrixXd& test_points, int k) {
    train.check_consistent();
    if (train.n() == 0)
        throw std::invalid_argument("knn_classify: empty training set");
    if (k < 1 || k > train.n())
        throw std::invalid_argument("knn_classify: k must lie in [1, n_train]");
    if (test_points.cols() != train.p())
        throw std::invalid_argument("knn_classify: dimension mismatch");
    if (!train.labels_are_binary())
        throw std::invalid_argument("knn_classify: training labels must be +1 or -1");

    const Index n = train.n();
    VectorXd labels(test_points.rows());
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index q = 0; q < test_points.rows(); ++q) {
        VectorXd d2(n);
        for (Index i = 0; i < n; ++i)
            d2[i] = (train.X.row(i) - test_points.row(q)).squaredNorm();
        std::iota(order.begin(), order.end(), Index{0});
        std::sort(order.begin(), order.end(), [&](Index a, Index b) {
            if (d2[a] != d2[b]) return d2[a] < d2[b];
            return a < b; // distance ties resolve to the lower training index
        });
        double votes = 0.0;
        for (int i = 0; i < k; ++i) votes += train.y[order[static_cast<std::size_t>(i)]];
        labels[q] = (votes >= 0.0) ? 1.0 : -1.0; // vote ties resolve to +1
    }
    return labels;
}

ErrorReport error_rate(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual,
                       const std::string& method_label, Eigen::Index dimension_used) {
    if (predicted.size() != actual.size())
        throw std::invalid_argument("error_rate: prediction/label length mismatch");
    Index wrong = 0;
    for (Index i = 0; i < predicted.size(); ++i)
        if (predicted[i] != actual[i]) ++wrong;
    ErrorReport report;
    report.n_test = predicted.size();
    report.error_rate = predicted.size() == 0
                            ? 0.0
                            : static_cast<double>(wrong) / static_cast<double>(predicted.size());
    report.method_label = method_label;
    report.dimension_used = dimension_used;
    return report;
}

int loo_error(const Dataset& data, const FitPredictMethod& method) {
    data.check_consistent();
    const Index n = data.n();
    if (n < 2)
        throw std::invalid_argument("loo_error: need at least 2 points");

    int wrong = 0;
    Dataset fold;
    fold.X.resize(n - 1, data.p());
    fold.y.resize(n - 1);
    for (Index hold = 0; hold < n; ++hold) {
        Index row = 0;
        for (Index i = 0; i < n; ++i) {
            if (i == hold) continue;
            fold.X.row(row) = data.X.row(i);
            fold.y[row] = data.y[i];
            ++row;
        }
        double predicted = 0.0;
        try {
            predicted = method(fold, data.X.row(hold));
        } catch (const std::exception& e) {
            throw NumericalError("loo_error: method failed at fold " + std::to_string(hold)
                                 + ": " + e.what());
        }
        if (predicted != data.y[hold]) ++wrong;
    }
    return wrong;
}

} // namespace gradlearn
