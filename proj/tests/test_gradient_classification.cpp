#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gradlearn/gradient_classification.hpp"
#include "gradlearn/kernel.hpp"
#include "support/test_helpers.hpp"

#include <cmath>

using namespace gradlearn;
using test_support::max_abs_diff;
using test_support::random_binary_dataset;
using test_support::random_matrix;
using test_support::random_vector;

namespace {

KernelSpec kspec(double sigma) { return KernelSpec{KernelFamily::gaussian, sigma}; }
WeightSpec wspec(double s) { return WeightSpec{s, DenominatorFactor::two_s_sq}; }

} // namespace

TEST_SUITE("gradient_classification") {

TEST_CASE("logistic loss values and stability") {
    CHECK(logistic_loss(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(logistic_loss(-100.0) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(logistic_loss(40.0) == doctest::Approx(std::exp(-40.0)).epsilon(1e-10));
    CHECK(std::isfinite(logistic_loss(800.0)));
    CHECK(std::isfinite(logistic_loss(-800.0)));
    CHECK(logistic_loss(800.0) >= 0.0);

    CHECK(logistic_loss_derivative(0.0) == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(logistic_loss_second_derivative(0.0) == doctest::Approx(0.25).epsilon(1e-15));
    for (double t : {-700.0, -15.0, -1.0, 0.0, 2.5, 30.0, 700.0}) {
        CHECK(logistic_loss_derivative(t) < 0.0);
        CHECK(logistic_loss_second_derivative(t) >= 0.0);
        CHECK(logistic_loss_second_derivative(t) <= 0.25);
    }
}

TEST_CASE("logistic derivatives match finite differences") {
    const double h = 1e-6;
    for (double t : {-8.0, -2.0, -0.3, 0.0, 0.7, 3.0, 9.0}) {
        const double fd1 = (logistic_loss(t + h) - logistic_loss(t - h)) / (2.0 * h);
        CHECK(logistic_loss_derivative(t) == doctest::Approx(fd1).epsilon(1e-6));
        const double fd2 =
            (logistic_loss_derivative(t + h) - logistic_loss_derivative(t - h)) / (2.0 * h);
        CHECK(logistic_loss_second_derivative(t) == doctest::Approx(fd2).epsilon(1e-5));
    }
}

TEST_CASE("risk at the zero model") {
    Dataset data = random_binary_dataset(6, 3, 11);
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(6);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(3, 6);
    WeightSpec w = wspec(1.2);
    const double risk = classification_risk(alpha, c, data, kspec(1.0), w);
    const double wsum = weight_matrix(data.X, w).sum();
    CHECK(risk == doctest::Approx(std::log(2.0) * wsum / 36.0).epsilon(1e-12));
}

TEST_CASE("risk with a single point") {
    Dataset data;
    data.X = random_matrix(1, 2, 21);
    data.y = Eigen::VectorXd::Constant(1, -1.0);
    Eigen::VectorXd alpha(1);
    alpha << 0.8; // g(x_1) = alpha_1 K_11 = 0.8
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, 1);
    const double risk = classification_risk(alpha, c, data, kspec(1.0), wspec(1.0));
    CHECK(risk == doctest::Approx(logistic_loss(-0.8)).epsilon(1e-14));
}

TEST_CASE("risk matches a brute-force double loop") {
    Dataset data = random_binary_dataset(5, 3, 31);
    Eigen::VectorXd alpha = random_vector(5, 32);
    Eigen::MatrixXd c = random_matrix(3, 5, 33);
    KernelSpec k = kspec(1.4);
    WeightSpec w = wspec(1.1);

    Eigen::MatrixXd K = kernel_matrix(data.X, k);
    Eigen::MatrixXd W = weight_matrix(data.X, w);
    double expect = 0.0;
    for (Eigen::Index i = 0; i < 5; ++i) {
        Eigen::VectorXd fi = c * K.col(i);
        for (Eigen::Index j = 0; j < 5; ++j) {
            const double g_j = K.row(j).dot(alpha);
            Eigen::VectorXd diff = (data.X.row(i) - data.X.row(j)).transpose();
            expect += W(i, j) * logistic_loss(data.y(i) * (g_j + fi.dot(diff)));
        }
    }
    expect /= 25.0;
    CHECK(classification_risk(alpha, c, data, k, w) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("analytic gradient matches finite differences") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Eigen::Index n = 3 + static_cast<Eigen::Index>(seed % 4);
        const Eigen::Index p = 2 + static_cast<Eigen::Index>(seed % 3);
        Dataset data = random_binary_dataset(n, p, 40 + seed);
        Eigen::VectorXd alpha = 0.5 * random_vector(n, 50 + seed);
        Eigen::MatrixXd c = 0.5 * random_matrix(p, n, 60 + seed);
        KernelSpec k = kspec(1.2);
        WeightSpec w = wspec(1.3);
        const double l1 = 3e-3, l2 = 2e-3;

        ClassificationObjective obj =
            classification_objective_with_gradient(alpha, c, data, k, w, l1, l2);

        auto value_at = [&](const Eigen::VectorXd& a, const Eigen::MatrixXd& cc) {
            return classification_objective_with_gradient(a, cc, data, k, w, l1, l2).value;
        };

        const double h = 1e-6;
        double worst = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd ap = alpha, am = alpha;
            ap(i) += h;
            am(i) -= h;
            const double fd = (value_at(ap, c) - value_at(am, c)) / (2.0 * h);
            worst = std::max(worst,
                             std::abs(fd - obj.grad_alpha(i)) / (1.0 + std::abs(obj.grad_alpha(i))));
        }
        for (Eigen::Index a = 0; a < p; ++a)
            for (Eigen::Index b = 0; b < n; ++b) {
                Eigen::MatrixXd cp = c, cm = c;
                cp(a, b) += h;
                cm(a, b) -= h;
                const double fd = (value_at(alpha, cp) - value_at(alpha, cm)) / (2.0 * h);
                worst = std::max(worst,
                                 std::abs(fd - obj.grad_c(a, b)) / (1.0 + std::abs(obj.grad_c(a, b))));
            }
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("objective is convex along segments") {
    Dataset data = random_binary_dataset(5, 3, 71);
    KernelSpec k = kspec(1.0);
    WeightSpec w = wspec(1.0);
    const double l1 = 1e-3, l2 = 1e-3;
    auto value_at = [&](const Eigen::VectorXd& a, const Eigen::MatrixXd& cc) {
        return classification_objective_with_gradient(a, cc, data, k, w, l1, l2).value;
    };
    for (std::uint64_t t = 0; t < 6; ++t) {
        Eigen::VectorXd a1 = random_vector(5, 80 + t), a2 = random_vector(5, 90 + t);
        Eigen::MatrixXd c1 = random_matrix(3, 5, 100 + t), c2 = random_matrix(3, 5, 110 + t);
        const double mid = value_at(0.5 * (a1 + a2), 0.5 * (c1 + c2));
        const double avg = 0.5 * (value_at(a1, c1) + value_at(a2, c2));
        CHECK(mid <= avg + 1e-10);
    }
}

TEST_CASE("solver reaches a stationary point") {
    Dataset data = random_binary_dataset(10, 3, 121);
    KernelSpec k = kspec(1.5);
    WeightSpec w = wspec(1.5);
    const double l1 = 1e-3, l2 = 1e-3;
    ClassGradientModel m = fit_gradient_classification(data, k, w, l1, l2);
    CHECK(m.converged);

    // independent ambient gradient check at the returned coefficients
    ClassificationObjective obj = classification_objective_with_gradient(
        m.g_coefficients, m.grad_coefficients, data, k, w, l1, l2);
    const double gnorm = std::sqrt(obj.grad_alpha.squaredNorm() + obj.grad_c.squaredNorm());
    CHECK(gnorm < 1e-6);
    CHECK(m.objective_value == doctest::Approx(obj.value).epsilon(1e-10));

    // the fit improves on the zero model
    const double zero_value = classification_objective_with_gradient(
                                  Eigen::VectorXd::Zero(10), Eigen::MatrixXd::Zero(3, 10), data,
                                  k, w, l1, l2)
                                  .value;
    CHECK(m.objective_value < zero_value);
}

TEST_CASE("objective history is monotone non-increasing") {
    Dataset data = random_binary_dataset(12, 4, 131);
    ClassGradientModel m = fit_gradient_classification(data, kspec(1.2), wspec(1.2), 1e-3, 1e-3);
    REQUIRE(m.objective_history.size() >= 2);
    for (std::size_t i = 1; i < m.objective_history.size(); ++i)
        CHECK(m.objective_history[i] <= m.objective_history[i - 1] + 1e-12);
    CHECK(m.objective_history.back() == doctest::Approx(m.objective_value).epsilon(1e-10));
}

TEST_CASE("label flip negates the fit") {
    Dataset data = random_binary_dataset(8, 3, 141);
    KernelSpec k = kspec(1.1);
    WeightSpec w = wspec(1.4);
    ClassGradientModel m = fit_gradient_classification(data, k, w, 1e-3, 1e-3);

    Dataset flipped = data;
    flipped.y = -data.y;
    ClassGradientModel mf = fit_gradient_classification(flipped, k, w, 1e-3, 1e-3);
    CHECK((m.g_coefficients + mf.g_coefficients).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(max_abs_diff(m.grad_coefficients, -mf.grad_coefficients) < 1e-6);
}

TEST_CASE("heavy regularization shrinks both blocks") {
    Dataset data = random_binary_dataset(8, 3, 151);
    ClassGradientModel m = fit_gradient_classification(data, kspec(1.0), wspec(1.0), 1e6, 1e6);
    CHECK(m.g_coefficients.cwiseAbs().maxCoeff() < 1e-4);
    CHECK(m.grad_coefficients.cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("one-dimensional sign recovery") {
    // labels switch from -1 to +1 along a line: the log-odds must increase,
    // so the fitted gradient field points in +x at every training point.
    Dataset data;
    data.X.resize(8, 1);
    data.X << -3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 3.5;
    data.y.resize(8);
    data.y << -1, -1, -1, -1, 1, 1, 1, 1;
    KernelSpec k = kspec(2.0);
    WeightSpec w = wspec(2.0);
    ClassGradientModel m = fit_gradient_classification(data, k, w, 1e-4, 1e-4);
    CHECK(m.converged);
    Eigen::MatrixXd grads = predict_class_gradient_matrix(m, data.X);
    for (Eigen::Index j = 0; j < 8; ++j) CHECK(grads(0, j) > 0.0);
    // log-odds ordered with the labels
    CHECK(predict_logodds(m, data.X.row(0).transpose()) < 0.0);
    CHECK(predict_logodds(m, data.X.row(7).transpose()) > 0.0);
}

TEST_CASE("dense and iterative newton paths agree") {
    Dataset data = random_binary_dataset(14, 3, 161);
    KernelSpec k = kspec(1.4);
    WeightSpec w = wspec(1.4);
    const double l1 = 1e-3, l2 = 1e-3;

    ClassifySolverOptions dense_opts;
    dense_opts.dense_size_limit = 1 << 20; // always dense
    ClassifySolverOptions pcg_opts;
    pcg_opts.dense_size_limit = 1; // always iterative

    ClassGradientModel md = fit_gradient_classification(data, k, w, l1, l2, dense_opts);
    ClassGradientModel mi = fit_gradient_classification(data, k, w, l1, l2, pcg_opts);
    CHECK(md.converged);
    CHECK(mi.converged);
    CHECK(md.objective_value == doctest::Approx(mi.objective_value).epsilon(1e-9));
    CHECK((md.g_coefficients - mi.g_coefficients).cwiseAbs().maxCoeff() < 1e-5);
    CHECK(max_abs_diff(md.grad_coefficients, mi.grad_coefficients) < 1e-5);
}

TEST_CASE("single point fit is rejected") {
    Dataset data;
    data.X = random_matrix(1, 2, 171);
    data.y = Eigen::VectorXd::Constant(1, 1.0);
    CHECK_THROWS_AS(fit_gradient_classification(data, kspec(1.0), wspec(1.0), 1e-2, 1e-2),
                    std::invalid_argument);
}

TEST_CASE("prediction is the kernel expansion") {
    Dataset data = random_binary_dataset(6, 3, 181);
    KernelSpec k = kspec(1.2);
    ClassGradientModel m = fit_gradient_classification(data, k, wspec(1.0), 1e-3, 1e-3);

    Eigen::VectorXd q = random_vector(3, 182);
    double g = 0.0;
    Eigen::VectorXd f = Eigen::VectorXd::Zero(3);
    for (Eigen::Index i = 0; i < 6; ++i) {
        const double kv = gaussian_kernel(q, data.X.row(i).transpose(), k);
        g += m.g_coefficients(i) * kv;
        f += m.grad_coefficients.col(i) * kv;
    }
    CHECK(predict_logodds(m, q) == doctest::Approx(g).epsilon(1e-12));
    CHECK((predict_class_gradient(m, q) - f).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(predict_class_label(m, q) == (g >= 0.0 ? 1.0 : -1.0));

    // at a training point the log-odds is the matching kernel-row combination
    Eigen::MatrixXd K = kernel_matrix(data.X, k);
    CHECK(predict_logodds(m, data.X.row(2).transpose()) ==
          doctest::Approx(K.row(2).dot(m.g_coefficients)).epsilon(1e-12));
}

TEST_CASE("zero log-odds classifies as positive") {
    Dataset data = random_binary_dataset(4, 2, 191);
    ClassGradientModel m = fit_gradient_classification(data, kspec(1.0), wspec(1.0), 1e-3, 1e-3);
    m.g_coefficients.setZero();
    CHECK(predict_class_label(m, random_vector(2, 192)) == 1.0);
}

TEST_CASE("input validation") {
    Dataset data = random_binary_dataset(5, 2, 201);
    data.y(3) = 0.5; // not a +1/-1 label
    CHECK_THROWS_AS(fit_gradient_classification(data, kspec(1.0), wspec(1.0), 1e-3, 1e-3),
                    std::invalid_argument);

    Dataset ok = random_binary_dataset(5, 2, 202);
    CHECK_THROWS_AS(fit_gradient_classification(ok, kspec(1.0), wspec(1.0), -1.0, 1e-3),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit_gradient_classification(ok, kspec(1.0), wspec(1.0), 1e-3, -1.0),
                    std::invalid_argument);
}

} // TEST_SUITE
