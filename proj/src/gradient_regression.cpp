#include "gradlearn/gradient_regression.hpp"

#include "gradlearn/errors.hpp"

#include <cmath>
#include <iostream>

namespace gradlearn {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Reduced-coordinate stationarity system: row block i of the operator maps
// Z (n x r, row i = z_i^T) to  B_i (K Z)_i + n^2 lambda z_i.
struct ReducedSystem {
    const std::vector<MatrixXd>& B;
    const MatrixXd& K;
    double n2_lambda;

    MatrixXd apply(const MatrixXd& Z) const {
        MatrixXd F = K * Z;
        MatrixXd out(Z.rows(), Z.cols());
        for (Index i = 0; i < Z.rows(); ++i)
            out.row(i) = (B[static_cast<std::size_t>(i)] * F.row(i).transpose()).transpose()
                       + n2_lambda * Z.row(i);
        return out;
    }
};

MatrixXd stack_rows(const std::vector<VectorXd>& rows, Index r) {
    MatrixXd M(static_cast<Index>(rows.size()), r);
    for (Index i = 0; i < M.rows(); ++i) M.row(i) = rows[static_cast<std::size_t>(i)].transpose();
    return M;
}

MatrixXd solve_reduced_dense(const LocalMoments& lm, const MatrixXd& K, double n2_lambda) {
    const Index n = static_cast<Index>(lm.B.size());
    const Index r = lm.r;
    const Index N = n * r;
    MatrixXd M = MatrixXd::Zero(N, N);
    for (Index i = 0; i < n; ++i) {
        const MatrixXd& Bi = lm.B[static_cast<std::size_t>(i)];
        for (Index l = 0; l < n; ++l)
            M.block(i * r, l * r, r, r) = K(i, l) * Bi;
        M.block(i * r, i * r, r, r).diagonal().array() += n2_lambda;
    }
    VectorXd b(N);
    for (Index i = 0; i < n; ++i) b.segment(i * r, r) = lm.h[static_cast<std::size_t>(i)];

    Eigen::PartialPivLU<MatrixXd> lu(M);
    VectorXd z = lu.solve(b);
    const double resid = (M * z - b).norm();
    if (!z.allFinite() || resid > 1e-8 * (1.0 + b.norm())) {
        Eigen::FullPivLU<MatrixXd> flu(M);
        z = flu.solve(b);
        if (!z.allFinite() || (M * z - b).norm() > 1e-8 * (1.0 + b.norm()))
            throw NumericalError("fit_gradient_regression: stationarity system is numerically "
                                 "singular (lambda too small for this geometry)");
    }
    MatrixXd Z(n, r);
    for (Index i = 0; i < n; ++i) Z.row(i) = z.segment(i * r, r).transpose();
    return Z;
}

// Restarted GMRES, right-preconditioned by the block diagonal
// (B_i + n^2 lambda I)^{-1}.  Operates on Z matrices flattened row-by-row.
MatrixXd solve_reduced_gmres(const LocalMoments& lm, const MatrixXd& K, double n2_lambda,
                             const RegressionSolverOptions& opts, bool& converged) {
    const Index n = static_cast<Index>(lm.B.size());
    const Index r = lm.r;
    const Index N = n * r;
    ReducedSystem sys{lm.B, K, n2_lambda};

    std::vector<Eigen::LDLT<MatrixXd>> blocks;
    blocks.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        MatrixXd P = lm.B[static_cast<std::size_t>(i)];
        P.diagonal().array() += n2_lambda;
        blocks.emplace_back(P);
    }

    auto to_vec = [&](const MatrixXd& Z) {
        VectorXd v(N);
        for (Index i = 0; i < n; ++i) v.segment(i * r, r) = Z.row(i).transpose();
        return v;
    };
    auto to_mat = [&](const VectorXd& v) {
        MatrixXd Z(n, r);
        for (Index i = 0; i < n; ++i) Z.row(i) = v.segment(i * r, r).transpose();
        return Z;
    };
    auto apply_op = [&](const VectorXd& v) { return to_vec(sys.apply(to_mat(v))); };
    auto apply_prec = [&](const VectorXd& v) {
        VectorXd out(N);
        for (Index i = 0; i < n; ++i)
            out.segment(i * r, r) = blocks[static_cast<std::size_t>(i)].solve(v.segment(i * r, r));
        return out;
    };

    VectorXd b = to_vec(stack_rows(lm.h, r));
    const double bn = b.norm();
    VectorXd x = VectorXd::Zero(N);
    converged = true;
    if (bn == 0.0) return to_mat(x);

    const int restart = opts.gmres_restart;
    const double tol = opts.iterative_tol;
    int it_total = 0;
    converged = false;

    while (it_total < opts.max_iterations) {
        VectorXd res = b - apply_op(x);
        double beta = res.norm();
        if (beta <= tol * bn) { converged = true; break; }

        std::vector<VectorXd> Q;
        Q.reserve(static_cast<std::size_t>(restart) + 1);
        Q.push_back(res / beta);
        MatrixXd H = MatrixXd::Zero(restart + 1, restart);
        VectorXd cs = VectorXd::Zero(restart), sn = VectorXd::Zero(restart);
        VectorXd g = VectorXd::Zero(restart + 1);
        g[0] = beta;

        int k = 0;
        bool inner_done = false;
        for (k = 0; k < restart; ++k) {
            VectorXd w = apply_op(apply_prec(Q[static_cast<std::size_t>(k)]));
            for (int j = 0; j <= k; ++j) {
                H(j, k) = w.dot(Q[static_cast<std::size_t>(j)]);
                w -= H(j, k) * Q[static_cast<std::size_t>(j)];
            }
            H(k + 1, k) = w.norm();
            if (H(k + 1, k) > 0.0) Q.push_back(w / H(k + 1, k));
            for (int j = 0; j < k; ++j) {
                const double t = cs[j] * H(j, k) + sn[j] * H(j + 1, k);
                H(j + 1, k) = -sn[j] * H(j, k) + cs[j] * H(j + 1, k);
                H(j, k) = t;
            }
            const double d = std::hypot(H(k, k), H(k + 1, k));
            if (d == 0.0) { ++k; inner_done = true; break; }
            cs[k] = H(k, k) / d;
            sn[k] = H(k + 1, k) / d;
            H(k, k) = d;
            H(k + 1, k) = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            ++it_total;
            if (std::abs(g[k + 1]) <= tol * bn || it_total >= opts.max_iterations) {
                ++k;
                inner_done = true;
                break;
            }
        }
        if (!inner_done && k == 0) break; // no progress possible
        VectorXd yk = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        VectorXd dx = VectorXd::Zero(N);
        for (int j = 0; j < k; ++j) dx += yk[j] * Q[static_cast<std::size_t>(j)];
        x += apply_prec(dx);
        if (std::abs(g[k]) <= tol * bn) { converged = true; break; }
    }
    if (!converged) {
        // final check against the actual residual before reporting failure
        converged = (b - apply_op(x)).norm() <= 1e-8 * (1.0 + bn);
    }
    return to_mat(x);
}

} // namespace

SpanBasis span_basis(const Eigen::MatrixXd& X) {
    if (X.rows() < 2)
        throw std::invalid_argument("span_basis: need at least 2 points");
    SpanBasis sb;
    sb.mean = X.colwise().mean();
    MatrixXd Xc = X.rowwise() - sb.mean;
    Eigen::BDCSVD<MatrixXd> svd(Xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd& S = svd.singularValues();
    Index r = 0;
    if (S.size() > 0 && S[0] > 0.0) {
        const double cutoff = 1e-10 * S[0];
        while (r < S.size() && S[r] > cutoff) ++r;
    }
    sb.r = r;
    sb.basis = svd.matrixV().leftCols(r);
    sb.coords = Xc * sb.basis;
    return sb;
}

LocalMoments assemble_local_moments(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                    const WeightSpec& weight, const Eigen::MatrixXd& basis) {
    if (X.rows() != y.size())
        throw std::invalid_argument("assemble_local_moments: row/response mismatch");
    if (basis.rows() != X.cols())
        throw std::invalid_argument("assemble_local_moments: basis dimension mismatch");
    weight.validate();
    const Index n = X.rows();
    const Index r = basis.cols();
    const MatrixXd W = weight_matrix(X, weight);
    const MatrixXd T = X * basis; // reduced coordinates (translation cancels in differences)

    LocalMoments lm;
    lm.basis = basis;
    lm.r = r;
    lm.B.reserve(static_cast<std::size_t>(n));
    lm.h.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        MatrixXd V = T.rowwise() - T.row(i); // row j = v_ij^T
        VectorXd wi = W.row(i).transpose();
        lm.B.push_back(V.transpose() * wi.asDiagonal() * V);
        lm.h.push_back(V.transpose() * ((wi.array() * (y.array() - y[i])).matrix()));
    }
    return lm;
}

GradientModel fit_gradient_regression(const Dataset& data, const KernelSpec& kernel,
                                      const WeightSpec& weight, double lambda,
                                      const RegressionSolverOptions& opts) {
    data.check_consistent();
    kernel.validate();
    weight.validate();
    if (data.n() < 2)
        throw std::invalid_argument("fit_gradient_regression: need at least 2 points");
    if (!(lambda > 0.0))
        throw std::invalid_argument("fit_gradient_regression: lambda must be positive");

    const Index n = data.n();
    const Index p = data.p();
    GradientModel model;
    model.train_points = data.X;
    model.kernel = kernel;
    model.weight = weight;
    model.lambda = lambda;

    SpanBasis sb = span_basis(data.X);
    if (sb.r == 0) {
        std::cerr << "warning: fit_gradient_regression: all points coincide, returning the zero model\n";
        model.coefficients = MatrixXd::Zero(p, n);
        model.objective_value = regression_objective(model, data);
        return model;
    }

    LocalMoments lm = assemble_local_moments(data.X, data.y, weight, sb.basis);
    const MatrixXd K = kernel_matrix(data.X, kernel);
    const double n2_lambda = static_cast<double>(n) * static_cast<double>(n) * lambda;

    const Index system_size = n * sb.r;
    bool use_dense = (opts.solver == RegressionSolver::dense)
                  || (opts.solver == RegressionSolver::automatic && system_size <= opts.dense_size_limit);

    MatrixXd Z;
    if (use_dense) {
        Z = solve_reduced_dense(lm, K, n2_lambda);
    } else {
        bool converged = false;
        Z = solve_reduced_gmres(lm, K, n2_lambda, opts, converged);
        if (!converged) {
            if (system_size <= 6000) {
                Z = solve_reduced_dense(lm, K, n2_lambda);
            } else {
                throw NumericalError("fit_gradient_regression: iterative solver did not converge");
            }
        }
    }

    model.coefficients = sb.basis * Z.transpose();
    model.objective_value = regression_objective(model, data);
    return model;
}

GradientModel dense_oracle_fit(const Dataset& data, const KernelSpec& kernel,
                               const WeightSpec& weight, double lambda) {
    data.check_consistent();
    kernel.validate();
    weight.validate();
    if (!(lambda > 0.0))
        throw std::invalid_argument("dense_oracle_fit: lambda must be positive");
    const Index n = data.n();
    const Index p = data.p();
    if (n < 1)
        throw std::invalid_argument("dense_oracle_fit: empty dataset");
    if (n * p > 2000)
        throw std::invalid_argument("dense_oracle_fit: size guard exceeded (n*p must be <= 2000)");

    const MatrixXd W = weight_matrix(data.X, weight);
    const MatrixXd K = kernel_matrix(data.X, kernel);
    const double n2_lambda = static_cast<double>(n) * static_cast<double>(n) * lambda;

    const Index N = n * p;
    MatrixXd M = MatrixXd::Zero(N, N);
    VectorXd b(N);
    for (Index i = 0; i < n; ++i) {
        MatrixXd V = data.X.rowwise() - data.X.row(i);
        VectorXd wi = W.row(i).transpose();
        MatrixXd Bi = V.transpose() * wi.asDiagonal() * V;
        b.segment(i * p, p) = V.transpose() * ((wi.array() * (data.y.array() - data.y[i])).matrix());
        for (Index l = 0; l < n; ++l)
            M.block(i * p, l * p, p, p) = K(i, l) * Bi;
        M.block(i * p, i * p, p, p).diagonal().array() += n2_lambda;
    }
    Eigen::PartialPivLU<MatrixXd> lu(M);
    VectorXd c = lu.solve(b);
    if (!c.allFinite() || (M * c - b).norm() > 1e-8 * (1.0 + b.norm()))
        throw NumericalError("dense_oracle_fit: stationarity system is numerically singular");

    GradientModel model;
    model.train_points = data.X;
    model.kernel = kernel;
    model.weight = weight;
    model.lambda = lambda;
    model.coefficients = MatrixXd(p, n);
    for (Index i = 0; i < n; ++i) model.coefficients.col(i) = c.segment(i * p, p);
    model.objective_value = regression_objective(model, data);
    return model;
}

Eigen::VectorXd predict_gradient(const GradientModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.train_points.cols())
        throw std::invalid_argument("predict_gradient: dimension mismatch");
    const Index n = model.train_points.rows();
    VectorXd k(n);
    const double denom = model.kernel.sigma * model.kernel.sigma;
    for (Index i = 0; i < n; ++i)
        k[i] = std::exp(-(model.train_points.row(i).transpose() - x).squaredNorm() / denom);
    return model.coefficients * k;
}

Eigen::MatrixXd predict_gradient_matrix(const GradientModel& model,
                                        const Eigen::MatrixXd& X_eval) {
    if (X_eval.cols() != model.train_points.cols())
        throw std::invalid_argument("predict_gradient_matrix: dimension mismatch");
    return model.coefficients * kernel_cross_matrix(model.train_points, X_eval, model.kernel);
}

double regression_objective(const GradientModel& model, const Dataset& data) {
    const Index n = data.n();
    const MatrixXd K = kernel_matrix(data.X, model.kernel);
    const MatrixXd W = weight_matrix(data.X, model.weight);
    const MatrixXd F = model.coefficients * K;     // column i = f(x_i)
    const MatrixXd G = data.X * F;                 // G(j, i) = x_j . f(x_i)
    double risk = 0.0;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            const double resid = data.y[j] - data.y[i] - (G(j, i) - G(i, i));
            risk += W(i, j) * resid * resid;
        }
    risk /= static_cast<double>(n) * static_cast<double>(n);
    return risk + model.lambda * rkhs_norm_squared(model);
}

double stationarity_residual(const GradientModel& model, const Dataset& data) {
    const Index n = data.n();
    const MatrixXd K = kernel_matrix(data.X, model.kernel);
    const MatrixXd W = weight_matrix(data.X, model.weight);
    const MatrixXd F = model.coefficients * K;
    const double n2_lambda = static_cast<double>(n) * static_cast<double>(n) * model.lambda;

    double max_resid = 0.0, max_h = 0.0;
    for (Index i = 0; i < n; ++i) {
        MatrixXd V = data.X.rowwise() - data.X.row(i);
        VectorXd wi = W.row(i).transpose();
        VectorXd hi = V.transpose() * ((wi.array() * (data.y.array() - data.y[i])).matrix());
        VectorXd t = V * F.col(i);
        VectorXd resid = V.transpose() * (wi.cwiseProduct(t))
                       + n2_lambda * model.coefficients.col(i) - hi;
        max_resid = std::max(max_resid, resid.norm());
        max_h = std::max(max_h, hi.norm());
    }
    return max_resid / (1.0 + max_h);
}

double rkhs_norm_squared(const GradientModel& model) {
    const MatrixXd K = kernel_matrix(model.train_points, model.kernel);
    return (model.coefficients * K).cwiseProduct(model.coefficients).sum();
}

} // namespace gradlearn
