#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "esl/error.hpp"
#include "esl/manifold.hpp"
#include "esl/simplex.hpp"

namespace esl {

// Sparse discrete probability measure on a sampling set of size n_total.
struct LiftedWeights {
    int n_total = 0;
    std::vector<int> index;  // ascending
    std::vector<double> weight;

    int support_size() const { return static_cast<int>(index.size()); }
    double sum() const;
    // Position of the largest weight; ties resolve to the lowest sampling index.
    int argmax() const;
};

struct EslConfig {
    double eta = 0.66;
    double j0 = 15.0;
    std::optional<double> gamma;
    int bary_max_iters = 20;
    double bary_tol = 1e-10;
};

template <class Point>
struct EslResult {
    LiftedWeights weights;
    Point barycentre{};
    Point init_point{};
    double gamma_used = 0.0;
    int bary_iters_run = 0;
    bool bary_converged = false;
    bool degenerate = false;  // uniform-over-argmin fallback used
};

template <class Point>
struct BarycentreResult {
    Point point{};
    int iters = 0;
    bool converged = false;
    std::vector<double> objective;  // weighted squared-distance per iterate
};

// Number of samples J = floor(j0 N^{(2 - d eta)/(d + 2)}) used by the gamma estimate.
int gamma_cutoff(int n, double j0, double eta, int dim);

LiftedWeights lifted_weights(const Eigen::VectorXd& f, double gamma, double eta);

double estimate_gamma(const Eigen::VectorXd& f, double j0, double eta, int dim);

// Uniform weights on the set of minimal values.
LiftedWeights argmin_weights(const Eigen::VectorXd& f);

struct Bounds {
    double lower = 0.0;
    double upper = 0.0;
};
Bounds sparsity_bounds(int n, double j0, double eta, int dim);

// rho_m = (j0 vol / omega_d)^{1/d} N^{-(1 + eta)/(d + 2)}.
double ellipsoid_radius(int n, double j0, double eta, double vol_manifold, int dim);

// 2 sqrt(det(H)^{1/d} / lambda_min(H)) rho_m.
double error_bound(const BilinearForm& hess, int n, double j0, double eta, double vol_manifold, int dim);

template <Manifold M>
double weighted_sq_distance(const std::vector<typename M::Point>& pts, const LiftedWeights& w,
                            const typename M::Point& x) {
    double s = 0.0;
    for (size_t k = 0; k < w.index.size(); ++k) {
        const double d = M::distance(pts[static_cast<size_t>(w.index[k])], x);
        s += w.weight[k] * d * d;
    }
    return s;
}

// Riemannian gradient descent with step 1/2 on x -> (1/2) sum alpha d(x, p)^2:
// x <- exp_x(sum alpha log_x p).
template <Manifold M>
BarycentreResult<typename M::Point> barycentre(const std::vector<typename M::Point>& pts, const LiftedWeights& w,
                                               const typename M::Point& init, int max_iters = 20,
                                               double tol = 1e-10, bool track_objective = false) {
    if (w.index.empty()) throw EslError(ErrorCode::InvalidArgument, "empty support");
    for (int i : w.index)
        if (M::distance(pts[static_cast<size_t>(i)], init) >= M::convexity_radius)
            throw EslError(ErrorCode::SupportTooSpread, "support point outside the convexity ball of the initial point");

    BarycentreResult<typename M::Point> r;
    r.point = init;
    if (track_objective) r.objective.push_back(weighted_sq_distance<M>(pts, w, init));
    for (int it = 0; it < max_iters; ++it) {
        typename M::Tangent g = M::Tangent::Zero();
        for (size_t k = 0; k < w.index.size(); ++k)
            g += w.weight[k] * M::log(r.point, pts[static_cast<size_t>(w.index[k])]);
        r.iters = it + 1;
        if (g.norm() <= tol) {
            r.converged = true;
            break;
        }
        r.point = M::exp(r.point, g);
        if (track_objective) r.objective.push_back(weighted_sq_distance<M>(pts, w, r.point));
    }
    return r;
}

// Drops support outside the open ball of the given radius about center and renormalises.
LiftedWeights restrict_support(const LiftedWeights& w, const std::vector<double>& dist_to_center, double radius);

// Lifted Tikhonov weights followed by the barycentre of the resulting measure.
template <Manifold M>
EslResult<typename M::Point> esl_minimise(const Eigen::VectorXd& f, const std::vector<typename M::Point>& pts,
                                          const EslConfig& cfg) {
    if (pts.empty() || static_cast<size_t>(f.size()) != pts.size())
        throw EslError(ErrorCode::InvalidArgument, "loss vector and sampling set size differ");
    EslResult<typename M::Point> res;
    if (cfg.gamma) {
        res.gamma_used = *cfg.gamma;
        res.weights = lifted_weights(f, *cfg.gamma, cfg.eta);
    } else {
        try {
            res.gamma_used = estimate_gamma(f, cfg.j0, cfg.eta, M::dim);
            res.weights = lifted_weights(f, res.gamma_used, cfg.eta);
        } catch (const EslError& e) {
            if (e.code() != ErrorCode::DegenerateLosses) throw;
            res.gamma_used = 0.0;
            res.degenerate = true;
            res.weights = argmin_weights(f);
        }
    }
    res.init_point = pts[static_cast<size_t>(res.weights.index[static_cast<size_t>(res.weights.argmax())])];
    auto b = barycentre<M>(pts, res.weights, res.init_point, cfg.bary_max_iters, cfg.bary_tol);
    res.barycentre = b.point;
    res.bary_iters_run = b.iters;
    res.bary_converged = b.converged;
    return res;
}

}  // namespace esl
