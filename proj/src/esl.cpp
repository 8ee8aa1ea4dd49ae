#include "esl/esl.hpp"

#include <numeric>

namespace esl {

double LiftedWeights::sum() const { return std::accumulate(weight.begin(), weight.end(), 0.0); }

int LiftedWeights::argmax() const {
    int best = 0;
    for (size_t k = 1; k < weight.size(); ++k)
        if (weight[k] > weight[static_cast<size_t>(best)]) best = static_cast<int>(k);
    return best;
}

int gamma_cutoff(int n, double j0, double eta, int dim) {
    const double d = dim;
    return static_cast<int>(std::floor(j0 * std::pow(static_cast<double>(n), (2.0 - d * eta) / (d + 2.0))));
}

LiftedWeights lifted_weights(const Eigen::VectorXd& f, double gamma, double eta) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw EslError(ErrorCode::NonPositiveGamma, "gamma must be > 0");
    if (!f.allFinite()) throw EslError(ErrorCode::NonFinite, "losses");
    const double n = static_cast<double>(f.size());
    const Eigen::VectorXd e = (-std::pow(n, eta) / gamma) * f;
    SimplexProjection p = project_simplex(e);
    LiftedWeights w;
    w.n_total = static_cast<int>(f.size());
    w.index = p.support;
    w.weight.reserve(p.support.size());
    for (int i : p.support) w.weight.push_back(p.weights[i]);
    return w;
}

double estimate_gamma(const Eigen::VectorXd& f, double j0, double eta, int dim) {
    if (!f.allFinite()) throw EslError(ErrorCode::NonFinite, "losses");
    const int n = static_cast<int>(f.size());
    const int J = gamma_cutoff(n, j0, eta, dim);
    if (J < 1 || n < J + 2) throw EslError(ErrorCode::SamplingTooSmall, "need |X| >= J + 2 with J >= 1");
    std::vector<double> v(f.data(), f.data() + n);
    std::partial_sort(v.begin(), v.begin() + J + 1, v.end());
    double mean = 0.0;
    for (int j = 0; j < J; ++j) mean += v[static_cast<size_t>(j)];
    mean /= J;
    const double d = dim;
    const double g = 0.5 * j0 * std::pow(static_cast<double>(n), (2.0 + 2.0 * eta) / (d + 2.0)) *
                     (v[static_cast<size_t>(J)] - mean);
    if (!(g > 0.0)) throw EslError(ErrorCode::DegenerateLosses, "lowest J+1 losses coincide");
    return g;
}

LiftedWeights argmin_weights(const Eigen::VectorXd& f) {
    if (f.size() == 0) throw EslError(ErrorCode::InvalidArgument, "empty losses");
    const double m = f.minCoeff();
    LiftedWeights w;
    w.n_total = static_cast<int>(f.size());
    for (Eigen::Index i = 0; i < f.size(); ++i)
        if (f[i] == m) w.index.push_back(static_cast<int>(i));
    w.weight.assign(w.index.size(), 1.0 / static_cast<double>(w.index.size()));
    return w;
}

Bounds sparsity_bounds(int n, double j0, double eta, int dim) {
    const double d = dim;
    const double up = j0 * std::pow(static_cast<double>(n), (2.0 - d * eta) / (d + 2.0));
    return {std::pow(3.0, -d / (d + 2.0)) * up, up};
}

double ellipsoid_radius(int n, double j0, double eta, double vol_manifold, int dim) {
    const double d = dim;
    return std::pow(j0 * vol_manifold / unit_ball_volume(dim), 1.0 / d) *
           std::pow(static_cast<double>(n), -(1.0 + eta) / (d + 2.0));
}

double error_bound(const BilinearForm& hess, int n, double j0, double eta, double vol_manifold, int dim) {
    if (!hess.positive_definite()) throw EslError(ErrorCode::NotPositiveDefinite, "Hessian");
    const double rho = ellipsoid_radius(n, j0, eta, vol_manifold, dim);
    return 2.0 * std::sqrt(std::pow(hess.det(), 1.0 / dim) / hess.lambda_min()) * rho;
}

LiftedWeights restrict_support(const LiftedWeights& w, const std::vector<double>& dist, double radius) {
    LiftedWeights r;
    r.n_total = w.n_total;
    double s = 0.0;
    for (size_t k = 0; k < w.index.size(); ++k) {
        if (dist[k] < radius) {
            r.index.push_back(w.index[k]);
            r.weight.push_back(w.weight[k]);
            s += w.weight[k];
        }
    }
    for (double& x : r.weight) x /= s;
    return r;
}

}  // namespace esl
