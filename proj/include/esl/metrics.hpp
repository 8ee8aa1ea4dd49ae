#pragma once

#include <Eigen/Dense>
#include <tuple>
#include <vector>

#include "esl/esl.hpp"
#include "esl/manifold.hpp"

namespace esl {

// Side on which the unknown global rotation acts. Images determine rotations
// only up to est_i = gt_i G (the map itself rotated by G), so Right is the
// gauge of the reconstruction problem; Left fits gt_i = O est_i.
enum class GaugeSide { Right, Left };

// Global gauge between an estimated rotation set and ground truth, optionally
// composed with the mirror conjugation E -> J E J, J = diag(1, 1, -1), which
// images cannot distinguish from a handedness flip of the map.
struct AlignmentResult {
    Eigen::Matrix3d transform = Eigen::Matrix3d::Identity();  // proper rotation O
    GaugeSide side = GaugeSide::Right;
    bool reflected = false;
    std::vector<double> aligned_errors;  // radians
    double mean = 0.0;
    double std = 0.0;

    // Maps an estimate into the ground-truth frame.
    Rotation apply(const Rotation& est) const;
};

AlignmentResult align_rotations(const std::vector<Rotation>& est, const std::vector<Rotation>& gt,
                                GaugeSide side = GaugeSide::Right);

// W_2(mu, delta_p) = sqrt(sum alpha d(x, p)^2).
template <Manifold M>
double w2_to_dirac(const std::vector<typename M::Point>& pts, const LiftedWeights& mu, const typename M::Point& p) {
    double s = 0.0;
    for (size_t k = 0; k < mu.index.size(); ++k) {
        const double d = M::distance(pts[static_cast<size_t>(mu.index[k])], p);
        s += mu.weight[k] * d * d;
    }
    return std::sqrt(s);
}

struct EulerZyz {
    double phi = 0.0, theta = 0.0, psi = 0.0;
};
EulerZyz euler_zyz(const Rotation& r);
Rotation compose_zyz(const EulerZyz& e);

// softmax(-loss / (2 t)), max-shifted.
Eigen::VectorXd relion_like_weights(const Eigen::VectorXd& losses, double temperature);

struct ErrorRow {
    long long n_samples = 0;
    double eta = 0.0;
    double mean_deg = 0.0;
    double std_deg = 0.0;
    double mean_l0 = 0.0;
    double mean_w2_deg = 0.0;
};

struct RunRecord {
    long long n_samples = 0;
    double eta = 0.0;
    std::vector<double> errors_rad;
    std::vector<int> l0;
    std::vector<double> w2_rad;
};

ErrorRow summarize(const RunRecord& run);
std::vector<ErrorRow> summarize(const std::vector<RunRecord>& runs);

inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }
double mean_of(const std::vector<double>& x);
double std_of(const std::vector<double>& x);  // population

}  // namespace esl
