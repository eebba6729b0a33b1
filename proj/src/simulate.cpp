#include "gradlearn/simulate.hpp"

#include "gradlearn/rng.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace gradlearn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Substream tags: one per (generator, class) so samples of one class do not
// depend on how many samples the other class drew.
constexpr std::uint64_t kTagLinearClassNeg = 0x11;
constexpr std::uint64_t kTagLinearClassPos = 0x12;
constexpr std::uint64_t kTagSphereClassNeg = 0x21;
constexpr std::uint64_t kTagSphereClassPos = 0x22;
constexpr std::uint64_t kTagSplit = 0x31;

void fill_gaussian_rows(Eigen::Ref<MatrixXd> block, RandomStream& stream, double sigma) {
    for (Index i = 0; i < block.rows(); ++i)
        for (Index j = 0; j < block.cols(); ++j)
            block(i, j) = sigma * stream.gaussian();
}

} // namespace

std::pair<Dataset, GroundTruth> gen_linear_sim(int n_per_class, double sigma,
                                               std::uint64_t seed) {
    if (n_per_class < 1)
        throw std::invalid_argument("gen_linear_sim: n_per_class must be at least 1");
    if (sigma < 0.0)
        throw std::invalid_argument("gen_linear_sim: sigma must be nonnegative");
    constexpr Index p = 100;
    const Index m = n_per_class;

    VectorXd mean_neg = VectorXd::Zero(p);
    mean_neg.segment(0, 10).setConstant(1.5);
    mean_neg.segment(10, 10).setConstant(-3.0);
    VectorXd mean_pos = VectorXd::Zero(p);
    mean_pos.segment(40, 10).setConstant(-1.5);
    mean_pos.segment(50, 10).setConstant(3.0);

    Dataset ds;
    ds.X.resize(2 * m, p);
    ds.y.resize(2 * m);

    RandomStream neg(seed, kTagLinearClassNeg);
    fill_gaussian_rows(ds.X.topRows(m), neg, sigma);
    ds.X.topRows(m).rowwise() += mean_neg.transpose();
    ds.y.head(m).setConstant(-1.0);

    RandomStream pos(seed, kTagLinearClassPos);
    fill_gaussian_rows(ds.X.bottomRows(m), pos, sigma);
    ds.X.bottomRows(m).rowwise() += mean_pos.transpose();
    ds.y.tail(m).setConstant(1.0);

    GroundTruth truth;
    truth.k = 1;
    VectorXd diff = mean_neg - mean_pos;
    truth.directions = diff / diff.norm();
    return {std::move(ds), std::move(truth)};
}

std::pair<Dataset, GroundTruth> gen_hypersphere_sim(int n_per_class, int p, int d, double r,
                                                    double sigma, std::uint64_t seed) {
    if (n_per_class < 1)
        throw std::invalid_argument("gen_hypersphere_sim: n_per_class must be at least 1");
    if (d < 1 || d > p)
        throw std::invalid_argument("gen_hypersphere_sim: need 1 <= d <= p");
    if (!(r > 0.0))
        throw std::invalid_argument("gen_hypersphere_sim: radius must be positive");
    if (sigma < 0.0)
        throw std::invalid_argument("gen_hypersphere_sim: sigma must be nonnegative");

    const Index m = n_per_class;
    Dataset ds;
    ds.X.resize(2 * m, p);
    ds.y.resize(2 * m);

    struct ClassBlock {
        double radius;
        double label;
        Index row0;
        std::uint64_t tag;
    };
    const ClassBlock blocks[2] = {
        {2.5 * r, -1.0, 0, kTagSphereClassNeg},
        {r, 1.0, m, kTagSphereClassPos},
    };
    for (const ClassBlock& blk : blocks) {
        RandomStream stream(seed, blk.tag);
        for (Index i = 0; i < m; ++i) {
            VectorXd g(d);
            double norm = 0.0;
            do {
                for (Index j = 0; j < d; ++j) g[j] = stream.gaussian();
                norm = g.norm();
            } while (norm < 1e-12); // zero draws are astronomically unlikely
            ds.X.row(blk.row0 + i).head(d) = (blk.radius / norm) * g.transpose();
            for (Index j = d; j < p; ++j) ds.X(blk.row0 + i, j) = sigma * stream.gaussian();
        }
        ds.y.segment(blk.row0, m).setConstant(blk.label);
    }

    GroundTruth truth;
    truth.k = d;
    truth.directions = MatrixXd::Zero(p, d);
    truth.directions.topRows(d).setIdentity();
    return {std::move(ds), std::move(truth)};
}

std::pair<Dataset, GroundTruth> generate(const SimConfig& config) {
    switch (config.design) {
    case SimDesign::linear_means:
        return gen_linear_sim(config.n_per_class, config.sigma, config.seed);
    case SimDesign::hypersphere_shells:
        return gen_hypersphere_sim(config.n_per_class, config.p, config.d, config.r,
                                   config.sigma, config.seed);
    }
    throw std::invalid_argument("generate: unknown design");
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, Eigen::Index n_test,
                                             std::uint64_t seed) {
    data.check_consistent();
    const Index n = data.n();
    if (n_test < 0 || n_test >= n)
        throw std::invalid_argument("train_test_split: n_test must lie in [0, n)");

    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    RandomStream stream(seed, kTagSplit);
    for (Index i = n - 1; i > 0; --i) {
        const auto j = static_cast<Index>(stream.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    std::vector<Index> test_idx(perm.begin(), perm.begin() + n_test);
    std::vector<Index> train_idx(perm.begin() + n_test, perm.end());
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    auto take = [&](const std::vector<Index>& idx) {
        Dataset out;
        out.X.resize(static_cast<Index>(idx.size()), data.p());
        out.y.resize(static_cast<Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            out.X.row(static_cast<Index>(k)) = data.X.row(idx[k]);
            out.y[static_cast<Index>(k)] = data.y[idx[k]];
        }
        return out;
    };
    return {take(train_idx), take(test_idx)};
}

} // namespace gradlearn
