#pragma once

#include "gradlearn/dataset.hpp"
#include "gradlearn/rng.hpp"

#include <Eigen/Dense>

namespace test_support {

// Deterministic random inputs for tests; seeded through the same stream
// machinery as the simulation generators so results never depend on library
// distribution internals.
inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    gradlearn::RandomStream stream(seed, 0xABCD);
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = stream.gaussian();
    return M;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed) {
    gradlearn::RandomStream stream(seed, 0xDCBA);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = stream.gaussian();
    return v;
}

// Random p x p orthogonal matrix from the QR factorization of a Gaussian
// matrix, with the R diagonal sign fixed so the distribution is proper.
inline Eigen::MatrixXd random_orthogonal(Eigen::Index p, std::uint64_t seed) {
    const Eigen::MatrixXd G = random_matrix(p, p, seed);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd Q = qr.householderQ();
    const Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < p; ++i)
        if (R(i, i) < 0) Q.col(i) = -Q.col(i);
    return Q;
}

inline gradlearn::Dataset random_dataset(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
    gradlearn::Dataset ds;
    ds.X = random_matrix(n, p, seed);
    ds.y = random_vector(n, seed + 1);
    return ds;
}

inline gradlearn::Dataset random_binary_dataset(Eigen::Index n, Eigen::Index p,
                                                std::uint64_t seed) {
    gradlearn::Dataset ds;
    ds.X = random_matrix(n, p, seed);
    gradlearn::RandomStream stream(seed, 0xFACE);
    ds.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) ds.y[i] = (stream.uniform01() < 0.5) ? -1.0 : 1.0;
    // guarantee both classes when n >= 2 so fits stay well-behaved
    if (n >= 2) {
        ds.y[0] = -1.0;
        ds.y[1] = 1.0;
    }
    return ds;
}

inline double max_abs_diff(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    return (A - B).cwiseAbs().maxCoeff();
}

} // namespace test_support
