#pragma once

#include <Eigen/Dense>
#include <vector>

namespace esl {

struct SimplexProjection {
    Eigen::VectorXd weights;
    int cutoff = 0;            // number of strictly positive weights
    std::vector<int> support;  // ascending indices
};

// Euclidean projection onto the unit probability simplex.
SimplexProjection project_simplex(const Eigen::VectorXd& e);

// Largest j with e_(j) - (S_j - 1)/j > 0 for input already sorted descending.
int cutoff_integer(const Eigen::VectorXd& e_sorted_desc);

// Entries below this after the shift are set to exactly zero.
inline constexpr double kSimplexZeroClamp = 1e-15;

}  // namespace esl
