#include "gradlearn/gradient_classification.hpp"

#include "gradlearn/errors.hpp"
#include "gradlearn/gradient_regression.hpp"

#include <cmath>

namespace gradlearn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double logistic_loss(double t) {
    if (t >= 0.0) return std::log1p(std::exp(-t));
    return -t + std::log1p(std::exp(t));
}

double logistic_loss_derivative(double t) {
    // -sigmoid(-t), evaluated from the side that cannot overflow
    if (t >= 0.0) {
        const double e = std::exp(-t);
        return -e / (1.0 + e);
    }
    return -1.0 / (1.0 + std::exp(t));
}

double logistic_loss_second_derivative(double t) {
    const double q = std::exp(-std::abs(t));
    const double d = 1.0 + q;
    return q / (d * d);
}

namespace {

void require_binary_labels(const Dataset& data) {
    if (!data.labels_are_binary())
        throw std::invalid_argument("classification: labels must be +1 or -1");
}

// State shared by the reduced-coordinate Newton iteration.  Parameters are
// alpha (n) and Z (n x r) with c_D = basis * Z^T; differences x_i - x_j live
// exactly in the span, so u_ij = T_i - T_j with T = X * basis.
struct ReducedProblem {
    const MatrixXd& T; // n x r
    const MatrixXd& K; // n x n
    const MatrixXd& W; // n x n
    const VectorXd& y; // n
    double l1, l2;
    Index n, r;

    ReducedProblem(const MatrixXd& T_, const MatrixXd& K_, const MatrixXd& W_,
                   const VectorXd& y_, double l1_, double l2_)
        : T(T_), K(K_), W(W_), y(y_), l1(l1_), l2(l2_), n(T_.rows()), r(T_.cols()) {}

    // t(i, j) = y_i ((K alpha)_j + (K Z)_i . (T_i - T_j))
    MatrixXd tmat(const VectorXd& alpha, const MatrixXd& Z) const {
        const VectorXd g = K * alpha;
        const MatrixXd M = K * Z;
        const VectorXd d = (M.cwiseProduct(T)).rowwise().sum(); // d_i = M_i . T_i
        const MatrixXd TM = T * M.transpose();                  // TM(j, i) = T_j . M_i
        MatrixXd t(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                t(i, j) = y[i] * (g[j] + d[i] - TM(j, i));
        return t;
    }

    double objective(const VectorXd& alpha, const MatrixXd& Z) const {
        const MatrixXd t = tmat(alpha, Z);
        double risk = 0.0;
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) risk += W(i, j) * logistic_loss(t(i, j));
        risk /= static_cast<double>(n) * static_cast<double>(n);
        const double reg1 = l1 * alpha.dot(K * alpha);
        const double reg2 = l2 * (K * Z).cwiseProduct(Z).sum();
        return risk + reg1 + reg2;
    }

    void gradient(const VectorXd& alpha, const MatrixXd& Z, const MatrixXd& t,
                  VectorXd& g_alpha, MatrixXd& g_Z) const {
        const double inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
        MatrixXd P1(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                P1(i, j) = W(i, j) * logistic_loss_derivative(t(i, j));
        g_alpha = inv_n2 * (K * (P1.transpose() * y)) + 2.0 * l1 * (K * alpha);
        // Q_i = y_i (sum_j P1_ij) T_i - y_i (P1 T)_i
        const VectorXd rowsum = P1.rowwise().sum();
        MatrixXd Q = rowsum.asDiagonal() * T - P1 * T;
        Q.array().colwise() *= y.array();
        g_Z = inv_n2 * (K * Q) + 2.0 * l2 * (K * Z);
    }

    // Hessian-vector product at the point where t was evaluated, with P2 the
    // weighted second derivatives W .* phi''(t).
    void hessian_vec(const MatrixXd& P2, const VectorXd& da, const MatrixXd& dZ,
                     VectorXd& ha, MatrixXd& hZ) const {
        const double inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
        const VectorXd dg = K * da;
        const MatrixXd dM = K * dZ;
        const VectorXd dd = (dM.cwiseProduct(T)).rowwise().sum();
        const MatrixXd TdM = T * dM.transpose();
        MatrixXd A(n, n); // A(i, j) = P2_ij (dg_j + dM_i . u_ij); y_i^2 = 1
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                A(i, j) = P2(i, j) * (dg[j] + dd[i] - TdM(j, i));
        ha = inv_n2 * (K * (A.colwise().sum().transpose())) + 2.0 * l1 * dg;
        const VectorXd arow = A.rowwise().sum();
        MatrixXd R = arow.asDiagonal() * T - A * T;
        hZ = inv_n2 * (K * R) + 2.0 * l2 * dM;
    }

    MatrixXd weighted_curvatures(const MatrixXd& t) const {
        MatrixXd P2(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                P2(i, j) = W(i, j) * logistic_loss_second_derivative(t(i, j));
        return P2;
    }
};

struct Direction {
    VectorXd da;
    MatrixXd dZ;
};

Direction dense_newton_direction(const ReducedProblem& pr, const MatrixXd& P2,
                                 const VectorXd& g_alpha, const MatrixXd& g_Z, double ridge) {
    const Index n = pr.n, r = pr.r;
    const Index dim = n * (1 + r);
    MatrixXd H(dim, dim);
    VectorXd unit = VectorXd::Zero(dim);
    VectorXd ha;
    MatrixXd hZ;
    for (Index k = 0; k < dim; ++k) {
        unit[k] = 1.0;
        VectorXd da = unit.head(n);
        MatrixXd dZ = MatrixXd::Zero(n, r);
        if (k >= n) dZ((k - n) / r, (k - n) % r) = 1.0;
        pr.hessian_vec(P2, da, dZ, ha, hZ);
        H.col(k).head(n) = ha;
        for (Index i = 0; i < n; ++i) H.col(k).segment(n + i * r, r) = hZ.row(i).transpose();
        unit[k] = 0.0;
    }
    H.diagonal().array() += ridge * (1.0 + H.diagonal().cwiseAbs().maxCoeff());

    VectorXd g(dim);
    g.head(n) = g_alpha;
    for (Index i = 0; i < n; ++i) g.segment(n + i * r, r) = g_Z.row(i).transpose();

    Eigen::LDLT<MatrixXd> ldlt(H);
    VectorXd d = ldlt.solve(-g);
    if (!d.allFinite()) d = -g;

    Direction dir;
    dir.da = d.head(n);
    dir.dZ = MatrixXd::Zero(n, r);
    for (Index i = 0; i < n; ++i) dir.dZ.row(i) = d.segment(n + i * r, r).transpose();
    return dir;
}

Direction pcg_newton_direction(const ReducedProblem& pr, const MatrixXd& P2,
                               const VectorXd& g_alpha, const MatrixXd& g_Z, double ridge,
                               double grad_norm, int cg_cap) {
    const Index n = pr.n, r = pr.r;
    const double inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));

    // Block preconditioner: the exact alpha-alpha block and the exact r x r
    // diagonal blocks of the Z-Z Hessian.
    const VectorXd S = P2.colwise().sum().transpose();
    MatrixXd Aaa = inv_n2 * (pr.K * S.asDiagonal() * pr.K) + 2.0 * pr.l1 * pr.K;
    Aaa.diagonal().array() += 1e-10 + ridge;
    Eigen::LDLT<MatrixXd> alpha_block(Aaa);

    std::vector<Eigen::LDLT<MatrixXd>> z_blocks;
    if (r > 0) {
        const MatrixXd K2 = pr.K.cwiseProduct(pr.K);
        std::vector<MatrixXd> D(static_cast<std::size_t>(n), MatrixXd::Zero(r, r));
        for (Index i = 0; i < n; ++i) {
            MatrixXd V = (-(pr.T.rowwise() - pr.T.row(i))).eval(); // row j = u_ij
            MatrixXd Ci = V.transpose() * P2.row(i).transpose().asDiagonal() * V;
            for (Index tcol = 0; tcol < n; ++tcol)
                D[static_cast<std::size_t>(tcol)] += K2(i, tcol) * Ci;
        }
        z_blocks.reserve(static_cast<std::size_t>(n));
        for (Index tcol = 0; tcol < n; ++tcol) {
            MatrixXd& Dt = D[static_cast<std::size_t>(tcol)];
            Dt *= inv_n2;
            Dt.diagonal().array() += 2.0 * pr.l2 * pr.K(tcol, tcol) + 1e-12 + ridge;
            z_blocks.emplace_back(Dt);
        }
    }

    const Index dim = n * (1 + r);
    auto flatten = [&](const VectorXd& a, const MatrixXd& Z) {
        VectorXd v(dim);
        v.head(n) = a;
        for (Index i = 0; i < n; ++i) v.segment(n + i * r, r) = Z.row(i).transpose();
        return v;
    };
    auto alpha_part = [&](const VectorXd& v) { return v.head(n).eval(); };
    auto z_part = [&](const VectorXd& v) {
        MatrixXd Z(n, r);
        for (Index i = 0; i < n; ++i) Z.row(i) = v.segment(n + i * r, r).transpose();
        return Z;
    };
    auto apply_h = [&](const VectorXd& v) {
        VectorXd ha;
        MatrixXd hZ;
        pr.hessian_vec(P2, alpha_part(v), z_part(v), ha, hZ);
        return (flatten(ha, hZ) + ridge * v).eval();
    };
    auto apply_prec = [&](const VectorXd& v) {
        VectorXd out(dim);
        out.head(n) = alpha_block.solve(v.head(n));
        if (r > 0)
            for (Index i = 0; i < n; ++i)
                out.segment(n + i * r, r) =
                    z_blocks[static_cast<std::size_t>(i)].solve(v.segment(n + i * r, r));
        return out;
    };

    const VectorXd g = flatten(g_alpha, g_Z);
    VectorXd x = VectorXd::Zero(dim);
    VectorXd res = -g;
    VectorXd z = apply_prec(res);
    VectorXd pdir = z;
    double rz = res.dot(z);
    const double eta = std::min(0.1, std::sqrt(grad_norm)) * grad_norm;
    const double stop = std::min(eta, 1e-10 + 0.01 * grad_norm);
    int it = 0;
    while (res.norm() > stop && it < cg_cap) {
        const VectorXd Hp = apply_h(pdir);
        const double denom = pdir.dot(Hp);
        if (denom <= 0.0) break; // leave the SPD cone; current x is still a descent step
        const double step = rz / denom;
        x += step * pdir;
        res -= step * Hp;
        z = apply_prec(res);
        const double rz_new = res.dot(z);
        pdir = z + (rz_new / rz) * pdir;
        rz = rz_new;
        ++it;
    }

    Direction dir;
    dir.da = alpha_part(x);
    dir.dZ = z_part(x);
    return dir;
}

} // namespace

double classification_risk(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& c_D,
                           const Dataset& data, const KernelSpec& kernel,
                           const WeightSpec& weight) {
    data.check_consistent();
    require_binary_labels(data);
    const Index n = data.n();
    if (alpha.size() != n || c_D.cols() != n || c_D.rows() != data.p())
        throw std::invalid_argument("classification_risk: coefficient dimensions mismatch");
    const MatrixXd K = kernel_matrix(data.X, kernel);
    const MatrixXd W = weight_matrix(data.X, weight);
    const VectorXd g = K * alpha;
    const MatrixXd F = c_D * K;       // column i = f(x_i)
    const MatrixXd G = data.X * F;    // G(j, i) = x_j . f(x_i)
    double risk = 0.0;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            const double t = data.y[i] * (g[j] + G(i, i) - G(j, i));
            risk += W(i, j) * logistic_loss(t);
        }
    return risk / (static_cast<double>(n) * static_cast<double>(n));
}

ClassificationObjective classification_objective_with_gradient(
    const Eigen::VectorXd& alpha, const Eigen::MatrixXd& c_D, const Dataset& data,
    const KernelSpec& kernel, const WeightSpec& weight, double lambda1, double lambda2) {
    data.check_consistent();
    require_binary_labels(data);
    const Index n = data.n();
    const double inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    const MatrixXd K = kernel_matrix(data.X, kernel);
    const MatrixXd W = weight_matrix(data.X, weight);
    const VectorXd g = K * alpha;
    const MatrixXd F = c_D * K;
    const MatrixXd G = data.X * F;

    double risk = 0.0;
    MatrixXd P1(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            const double t = data.y[i] * (g[j] + G(i, i) - G(j, i));
            risk += W(i, j) * logistic_loss(t);
            P1(i, j) = W(i, j) * logistic_loss_derivative(t);
        }

    ClassificationObjective out;
    out.value = risk * inv_n2 + lambda1 * alpha.dot(K * alpha)
              + lambda2 * (c_D * K).cwiseProduct(c_D).sum();
    out.grad_alpha = inv_n2 * (K * (P1.transpose() * data.y)) + 2.0 * lambda1 * (K * alpha);
    // dRisk/dF has column i equal to y_i/n^2 sum_j P1_ij (x_i - x_j)
    const VectorXd rowsum = P1.rowwise().sum();
    MatrixXd Q = rowsum.asDiagonal() * data.X - P1 * data.X; // row i = sum_j P1_ij (x_i - x_j)
    Q.array().colwise() *= data.y.array();
    out.grad_c = inv_n2 * (Q.transpose() * K) + 2.0 * lambda2 * (c_D * K);
    return out;
}

ClassGradientModel fit_gradient_classification(const Dataset& data, const KernelSpec& kernel,
                                               const WeightSpec& weight, double lambda1,
                                               double lambda2,
                                               const ClassifySolverOptions& opts) {
    data.check_consistent();
    require_binary_labels(data);
    kernel.validate();
    weight.validate();
    if (data.n() < 2)
        throw std::invalid_argument("fit_gradient_classification: need at least 2 points");
    if (!(lambda1 > 0.0) || !(lambda2 > 0.0))
        throw std::invalid_argument("fit_gradient_classification: lambda1 and lambda2 must be positive");

    const Index n = data.n();
    const MatrixXd K = kernel_matrix(data.X, kernel);
    const MatrixXd W = weight_matrix(data.X, weight);
    const SpanBasis sb = span_basis(data.X);
    const MatrixXd T = data.X * sb.basis;
    const Index r = sb.r;

    ReducedProblem pr(T, K, W, data.y, lambda1, lambda2);
    VectorXd alpha = VectorXd::Zero(n);
    MatrixXd Z = MatrixXd::Zero(n, r);
    double obj = pr.objective(alpha, Z);
    const double ridge = 1e-8 * std::min(lambda1, lambda2) + 1e-12;

    ClassGradientModel model;
    model.train_points = data.X;
    model.kernel = kernel;
    model.weight = weight;
    model.lambda1 = lambda1;
    model.lambda2 = lambda2;
    model.objective_history.push_back(obj);

    VectorXd g_alpha;
    MatrixXd g_Z;
    int accepted = 0;
    bool converged = false;
    for (int it = 0; it < opts.max_iters; ++it) {
        const MatrixXd t = pr.tmat(alpha, Z);
        pr.gradient(alpha, Z, t, g_alpha, g_Z);
        const double gn = std::sqrt(g_alpha.squaredNorm() + g_Z.squaredNorm());
        if (gn < opts.tol) { converged = true; break; }

        const MatrixXd P2 = pr.weighted_curvatures(t);
        const Index dim = n * (1 + r);
        Direction dir = (dim <= opts.dense_size_limit)
                            ? dense_newton_direction(pr, P2, g_alpha, g_Z, ridge)
                            : pcg_newton_direction(pr, P2, g_alpha, g_Z, ridge, gn,
                                                   opts.cg_max_iterations);

        double slope = dir.da.dot(g_alpha) + dir.dZ.cwiseProduct(g_Z).sum();
        if (slope >= 0.0) { // not a descent direction; fall back to steepest descent
            dir.da = -g_alpha;
            dir.dZ = -g_Z;
            slope = -(g_alpha.squaredNorm() + g_Z.squaredNorm());
        }

        double step = 1.0;
        bool moved = false;
        while (step > 1e-14) {
            const double trial = pr.objective(alpha + step * dir.da, Z + step * dir.dZ);
            if (trial <= obj + 1e-4 * step * slope) {
                alpha += step * dir.da;
                Z += step * dir.dZ;
                obj = trial;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break; // objective flat to machine precision along the direction
        ++accepted;
        model.objective_history.push_back(obj);
    }
    if (!converged) {
        const MatrixXd t = pr.tmat(alpha, Z);
        pr.gradient(alpha, Z, t, g_alpha, g_Z);
        converged = std::sqrt(g_alpha.squaredNorm() + g_Z.squaredNorm()) < opts.tol;
    }

    model.g_coefficients = alpha;
    model.grad_coefficients = sb.basis * Z.transpose();
    model.iterations = accepted;
    model.converged = converged;
    model.objective_value =
        classification_risk(alpha, model.grad_coefficients, data, kernel, weight)
        + lambda1 * alpha.dot(K * alpha)
        + lambda2 * (model.grad_coefficients * K).cwiseProduct(model.grad_coefficients).sum();
    return model;
}

double predict_logodds(const ClassGradientModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.train_points.cols())
        throw std::invalid_argument("predict_logodds: dimension mismatch");
    const Index n = model.train_points.rows();
    double out = 0.0;
    const double denom = model.kernel.sigma * model.kernel.sigma;
    for (Index i = 0; i < n; ++i)
        out += model.g_coefficients[i]
             * std::exp(-(model.train_points.row(i).transpose() - x).squaredNorm() / denom);
    return out;
}

Eigen::VectorXd predict_class_gradient(const ClassGradientModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.train_points.cols())
        throw std::invalid_argument("predict_class_gradient: dimension mismatch");
    const Index n = model.train_points.rows();
    VectorXd k(n);
    const double denom = model.kernel.sigma * model.kernel.sigma;
    for (Index i = 0; i < n; ++i)
        k[i] = std::exp(-(model.train_points.row(i).transpose() - x).squaredNorm() / denom);
    return model.grad_coefficients * k;
}

double predict_class_label(const ClassGradientModel& model, const Eigen::VectorXd& x) {
    return predict_logodds(model, x) < 0.0 ? -1.0 : 1.0;
}

Eigen::MatrixXd predict_class_gradient_matrix(const ClassGradientModel& model,
                                              const Eigen::MatrixXd& X_eval) {
    if (X_eval.cols() != model.train_points.cols())
        throw std::invalid_argument("predict_class_gradient_matrix: dimension mismatch");
    return model.grad_coefficients
         * kernel_cross_matrix(model.train_points, X_eval, model.kernel);
}

} // namespace gradlearn
