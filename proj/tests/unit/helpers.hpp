#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "esl/manifold.hpp"

namespace testutil {

inline esl::Rotation random_rotation(std::mt19937_64& rng) { return esl::Rotation::random(rng); }

inline Eigen::Vector3d random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> N(0.0, 1.0);
    Eigen::Vector3d v(N(rng), N(rng), N(rng));
    return v.normalized();
}

// Angle of the relative rotation from the quaternion inner product.
inline double angle_oracle(const esl::Rotation& a, const esl::Rotation& b) {
    const double c = std::min(1.0, std::abs(a.q().dot(b.q())));
    return 2.0 * std::acos(c);
}

}  // namespace testutil
