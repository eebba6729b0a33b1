#pragma once

#include "gradlearn/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <utility>

namespace gradlearn {

enum class SimDesign { linear_means, hypersphere_shells };

struct SimConfig {
    SimDesign design = SimDesign::linear_means;
    int n_per_class = 20;
    int p = 100;       // ambient dimension (forced to 100 by linear_means)
    int d = 2;         // intrinsic dimension (hypersphere_shells only)
    double r = 3.0;    // inner shell radius (hypersphere_shells only)
    double sigma = 0.5; // noise level
    std::uint64_t seed = 0;
};

// Orthonormal columns spanning the true predictive subspace of a generator.
struct GroundTruth {
    Eigen::MatrixXd directions; // p x k
    Eigen::Index k = 0;
};

// Two Gaussian classes in R^100.  Class -1 has mean 1.5 on coordinates 0-9
// and -3 on 10-19; class +1 has mean -1.5 on coordinates 40-49 and +3 on
// 50-59; every coordinate carries N(0, sigma^2) noise.  Rows hold the n_per_class
// class -1 samples first.  The true predictive subspace is the span of the
// normalized mean-difference vector (k = 1).
std::pair<Dataset, GroundTruth> gen_linear_sim(int n_per_class, double sigma,
                                               std::uint64_t seed);

// Two concentric shells: the first d coordinates lie uniformly on the sphere
// of radius r (class +1) or 2.5r (class -1); the remaining p-d coordinates
// are N(0, sigma^2) noise.  Rows hold class -1 first.  The true subspace is
// the span of the first d standard basis vectors.
std::pair<Dataset, GroundTruth> gen_hypersphere_sim(int n_per_class, int p, int d, double r,
                                                    double sigma, std::uint64_t seed);

std::pair<Dataset, GroundTruth> generate(const SimConfig& config);

// Seeded disjoint partition into (train, test) with n_test test rows.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, Eigen::Index n_test,
                                             std::uint64_t seed);

} // namespace gradlearn
