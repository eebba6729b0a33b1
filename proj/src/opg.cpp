#include "gradlearn/opg.hpp"

#include "gradlearn/errors.hpp"

#include <cmath>

namespace gradlearn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

OpgFit opg_fit(const Dataset& data, const WeightSpec& weight, std::optional<double> ridge) {
    data.check_consistent();
    weight.validate();
    const Index n = data.n();
    const Index p = data.p();
    if (n < 2)
        throw std::invalid_argument("opg_fit: need at least 2 points");
    if (ridge && *ridge < 0.0)
        throw std::invalid_argument("opg_fit: ridge must be nonnegative");

    const MatrixXd W = weight_matrix(data.X, weight);
    const bool auto_ridge = !ridge.has_value() && p >= n;

    OpgFit fit;
    fit.intercepts.resize(n);
    fit.slopes.resize(p, n);
    fit.ridge_used = ridge.value_or(0.0);

    MatrixXd design(n, p + 1);
    design.col(0).setOnes();
    for (Index j = 0; j < n; ++j) {
        design.rightCols(p) = data.X.rowwise() - data.X.row(j);
        const VectorXd wj = W.col(j);
        MatrixXd G = design.transpose() * wj.asDiagonal() * design;
        const VectorXd rhs = design.transpose() * wj.cwiseProduct(data.y);

        double rj = ridge.value_or(0.0);
        if (auto_ridge) rj = 1e-8 * G.bottomRightCorner(p, p).trace();
        if (rj > 0.0) {
            G.bottomRightCorner(p, p).diagonal().array() += rj;
            fit.ridge_used = std::max(fit.ridge_used, rj);
        } else {
            Eigen::FullPivLU<MatrixXd> lu(G);
            if (lu.rank() < p + 1)
                throw NumericalError("opg_fit: singular local normal equations with ridge 0 "
                                     "(point index " + std::to_string(j) + ")");
        }
        const VectorXd sol = G.ldlt().solve(rhs);
        if (!sol.allFinite())
            throw NumericalError("opg_fit: local solve failed at point index " + std::to_string(j));
        fit.intercepts[j] = sol[0];
        fit.slopes.col(j) = sol.tail(p);
    }
    return fit;
}

LowRankGram opg_gram(const OpgFit& fit) {
    LowRankGram gram;
    gram.kind = GramKind::gop;
    gram.factor = fit.slopes / std::sqrt(static_cast<double>(fit.slopes.cols()));
    return gram;
}

PcaMap pca_fit(const Eigen::MatrixXd& X, Eigen::Index m) {
    const Index n = X.rows();
    const Index p = X.cols();
    if (m < 1 || m > std::min(n - 1, p))
        throw std::invalid_argument("pca_fit: m must lie in [1, min(n-1, p)]");
    PcaMap map;
    map.m = m;
    map.mean = X.colwise().mean().transpose();
    const MatrixXd Xc = X.rowwise() - map.mean.transpose();
    Eigen::BDCSVD<MatrixXd> svd(Xc, Eigen::ComputeThinV);
    map.components = svd.matrixV().leftCols(m);
    return map;
}

Eigen::MatrixXd pca_apply(const PcaMap& map, const Eigen::MatrixXd& X) {
    if (X.cols() != map.components.rows())
        throw std::invalid_argument("pca_apply: dimension mismatch");
    return (X.rowwise() - map.mean.transpose()) * map.components;
}

Eigen::MatrixXd pca_lift(const PcaMap& map, const Eigen::MatrixXd& directions) {
    if (directions.rows() != map.m)
        throw std::invalid_argument("pca_lift: dimension mismatch");
    return map.components * directions;
}

} // namespace gradlearn
