#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "esl/cryoem.hpp"
#include "esl/esl.hpp"
#include "esl/metrics.hpp"

namespace esl {

using LossMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RefinementConfig {
    double eta = 0.66;
    double j0 = 15.0;
    int outer_iters = 10;
    int bary_iters = 20;
    double sigma = 0.0;  // <= 0 selects the data-driven defaults
    double tau1 = 0.0;
    double tau2 = 0.0;
    int sampling_level = 1;
    std::optional<double> gamma;  // fixed gamma (per pixel) instead of the per-image estimate
    int rotation_chunk = 256;
    int cg_max_iters = 200;
    double cg_tol = 1e-8;
};

struct NoiseParams {
    double sigma = 0.0, tau1 = 0.0, tau2 = 0.0;
};

// sigma = mean per-image pixel variance, tau1 = tau2 = ||v0||^2.
NoiseParams default_parameters(const ImageStack& images, const Volume& v0);

// loss(i, x) = ||W(x.v) - g_i||^2 / (2 sigma) via the expanded inner products,
// evaluated over chunks of sampling points.
LossMatrix rotation_losses(const Volume& v, const ImageStack& images, const std::vector<Rotation>& X,
                           const CtfParams& p, double sigma, int chunk = 256);
// Direct evaluation keeping every projection in memory; BudgetExceeded above budget_bytes.
LossMatrix rotation_losses_monolithic(const Volume& v, const ImageStack& images, const std::vector<Rotation>& X,
                                      const CtfParams& p, double sigma, std::size_t budget_bytes = std::size_t(2) << 30);

struct RotationUpdate {
    std::vector<Rotation> rotations;
    std::vector<Rotation> argmax_points;
    std::vector<LiftedWeights> weights;
    std::vector<double> gammas;
    std::vector<int> bary_iters;
    int restricted = 0;  // images whose support had to be cut to the convexity ball
    int degenerate = 0;
};

// gamma_unit: scale between the loss and the gamma reported/configured. Image
// losses use the pixel count so gamma is per pixel; a fixed cfg.gamma is
// multiplied by it and the reported gammas are divided by it.
RotationUpdate update_rotations(const LossMatrix& losses, const std::vector<Rotation>& X, const EslConfig& cfg,
                                double gamma_unit = 1.0);

// Normal-equation pieces of
//   sum_i ||W_i v - g_i||^2 / (2 sigma) + ||v||^2 / (2 tau1) + ||K v||^2 / (2 tau2),
// K the Fourier multiplier |xi|.
struct VolumeProblem {
    const ImageStack* images = nullptr;
    const std::vector<Rotation>* rotations = nullptr;
    CtfParams ctf;
    double sigma = 1.0, tau1 = 1.0, tau2 = 1.0;
};

Volume normal_operator(const VolumeProblem& P, const Volume& v);
Volume normal_rhs(const VolumeProblem& P);
double volume_objective(const VolumeProblem& P, const Volume& v);
Volume volume_gradient(const VolumeProblem& P, const Volume& v);

struct VolumeUpdateInfo {
    int iterations = 0;
    double rel_residual = 0.0;
};

// Exact minimiser by Fourier-preconditioned conjugate gradients.
Volume update_volume(const ImageStack& images, const std::vector<Rotation>& rotations, const CtfParams& p,
                     double sigma, double tau1, double tau2, const Volume* warm_start = nullptr,
                     VolumeUpdateInfo* info = nullptr, int max_iters = 200, double tol = 1e-10);

struct IterationMetrics {
    int iter = 0;
    double mean_err_deg = std::numeric_limits<double>::quiet_NaN();
    double std_err_deg = std::numeric_limits<double>::quiet_NaN();
    double mean_l0 = 0.0;
    double mean_w2_deg = 0.0;
    double mean_gamma = 0.0;
    double objective = 0.0;
    int min_l0 = 0, max_l0 = 0;
    double sparsity_lower = 0.0, sparsity_upper = 0.0;
};

struct RefinementState {
    Volume volume;
    std::vector<Rotation> rotations;
    std::vector<LiftedWeights> weights;
    int iteration = 0;
    std::vector<IterationMetrics> log;
};

using IterationCallback = std::function<void(const RefinementState&)>;

RefinementState joint_refine(const ImageStack& images, const Volume& v0, const CtfParams& p,
                             const RefinementConfig& cfg, const std::vector<Rotation>& X,
                             const std::vector<Rotation>* gt = nullptr, const IterationCallback& on_iter = {});

}  // namespace esl
