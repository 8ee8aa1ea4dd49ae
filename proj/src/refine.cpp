#include "esl/refine.hpp"

#include <algorithm>
#include <cmath>

#include "esl/error.hpp"
#include "esl/fft.hpp"

namespace esl {

namespace {

using Vec = Eigen::VectorXd;

// Fixed number of partial sums so reductions do not depend on the thread count.
constexpr int kReductionBlocks = 16;

Eigen::Map<const Vec> as_vec(const Volume& v) { return {v.data.data(), static_cast<Eigen::Index>(v.data.size())}; }
Eigen::Map<Vec> as_vec(Volume& v) { return {v.data.data(), static_cast<Eigen::Index>(v.data.size())}; }

// Squared angular frequency |xi|^2 in r2c layout.
std::vector<double> xi_squared(int n, double h) {
    const int hh = n / 2 + 1;
    const double s = 2.0 * std::numbers::pi / (n * h);
    std::vector<double> out(static_cast<size_t>(n) * n * hh);
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < hh; ++x) {
                const double kz = fft::freq_index(z, n), ky = fft::freq_index(y, n);
                out[(static_cast<size_t>(z) * n + y) * hh + x] = s * s * (kz * kz + ky * ky + double(x) * x);
            }
    return out;
}

// Real symmetric Fourier multiplier m (r2c layout, already including 1/n^3).
Volume apply_multiplier(const Volume& v, const std::vector<double>& m) {
    const int n = v.n;
    std::vector<fft::cplx> spec(m.size());
    fft::r2c_3d(n, n, n, v.data.data(), spec.data());
    for (size_t i = 0; i < m.size(); ++i) spec[i] *= m[i];
    Volume out(n, v.voxel_size);
    fft::c2r_3d(n, n, n, spec.data(), out.data.data());
    return out;
}

Volume sum_over_images(int n_img, int n, double h, const std::function<void(int, Volume&)>& add) {
    const int blocks = std::min(kReductionBlocks, std::max(1, n_img));
    std::vector<Volume> part(static_cast<size_t>(blocks), Volume(n, h));
#pragma omp parallel for schedule(dynamic)
    for (int b = 0; b < blocks; ++b)
        for (int i = b; i < n_img; i += blocks) add(i, part[static_cast<size_t>(b)]);
    Volume out(n, h);
    for (const auto& p : part) as_vec(out) += as_vec(p);
    return out;
}

struct Operator {
    const VolumeProblem& P;
    int n;
    double h;
    CtfFilter ctf;
    std::vector<double> ksq;  // |xi|^2 / n^3

    explicit Operator(const VolumeProblem& p)
        : P(p), n(p.images->n), h(p.images->pixel_size), ctf(n, h, p.ctf), ksq(xi_squared(n, h)) {
        const double s = 1.0 / (static_cast<double>(n) * n * n);
        for (double& x : ksq) x *= s;
    }

    Volume apply(const Volume& v) const {
        const auto& R = *P.rotations;
        const PaddedVolume pv(v);
        Volume out = sum_over_images(P.images->count, n, h, [&](int i, Volume& acc) {
            const auto img = ctf.apply(ctf.apply(pv.project(R[static_cast<size_t>(i)])));
            backproject_rotated_add(img, R[static_cast<size_t>(i)], acc, 1.0 / P.sigma);
        });
        as_vec(out) += as_vec(v) / P.tau1;
        const Volume kk = apply_multiplier(v, ksq);
        as_vec(out) += as_vec(kk) / P.tau2;
        return out;
    }

    Volume rhs() const {
        const auto& R = *P.rotations;
        const size_t np = P.images->pixels();
        return sum_over_images(P.images->count, n, h, [&](int i, Volume& acc) {
            const double* g = P.images->image(i);
            const auto img = ctf.apply(std::vector<double>(g, g + np));
            backproject_rotated_add(img, R[static_cast<size_t>(i)], acc, 1.0 / P.sigma);
        });
    }
};

// Circulant approximation of the normal operator from its response to an
// impulse at the grid centre.
std::vector<double> impulse_preconditioner(const Operator& A, const VolumeProblem& P) {
    const int n = A.n, hh = n / 2 + 1, c = n / 2;
    Volume e(n, A.h);
    e.at(c, c, c) = 1.0;
    const Volume a = A.apply(e);
    std::vector<fft::cplx> spec(static_cast<size_t>(n) * n * hh);
    fft::r2c_3d(n, n, n, a.data.data(), spec.data());
    const double inv_n3 = 1.0 / (static_cast<double>(n) * n * n);
    std::vector<double> out(spec.size());
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < hh; ++x) {
                const size_t o = (static_cast<size_t>(z) * n + y) * hh + x;
                const double ph = 2.0 * std::numbers::pi * c * (z + y + x) / n;
                const double re = (spec[o] * std::polar(1.0, ph)).real();
                out[o] = inv_n3 / std::max(re, 1.0 / P.tau1);
            }
    return out;
}

}  // namespace

NoiseParams default_parameters(const ImageStack& images, const Volume& v0) {
    if (images.count < 1) throw EslError(ErrorCode::InvalidArgument, "empty image stack");
    const double vn = v0.norm();
    if (!(vn > 0.0)) throw EslError(ErrorCode::ZeroVolume, "initial map has zero norm");
    const size_t np = images.pixels();
    double var = 0.0;
    for (int i = 0; i < images.count; ++i) {
        const double* g = images.image(i);
        double m = 0.0, sq = 0.0;
        for (size_t k = 0; k < np; ++k) m += g[k];
        m /= static_cast<double>(np);
        for (size_t k = 0; k < np; ++k) sq += (g[k] - m) * (g[k] - m);
        var += sq / static_cast<double>(np);
    }
    var /= images.count;
    if (!(var > 0.0)) throw EslError(ErrorCode::NonPositiveSigma, "images have zero pixel variance");
    return {var, vn * vn, vn * vn};
}

LossMatrix rotation_losses(const Volume& v, const ImageStack& images, const std::vector<Rotation>& X,
                           const CtfParams& p, double sigma, int chunk) {
    if (!(sigma > 0.0)) throw EslError(ErrorCode::NonPositiveSigma, "sigma must be > 0");
    if (images.n != v.n) throw EslError(ErrorCode::InvalidArgument, "image and volume sizes differ");
    const int N = images.count;
    const Eigen::Index np = static_cast<Eigen::Index>(images.pixels());
    const Eigen::Map<const LossMatrix> G(images.data.data(), N, np);
    const Vec gn = G.rowwise().squaredNorm();
    const CtfFilter ctf(v.n, v.voxel_size, p);
    const int M = static_cast<int>(X.size());
    chunk = std::max(1, chunk);
    LossMatrix L(N, M);
    LossMatrix Pm(chunk, np);
    const PaddedVolume pv(v);
    for (int c0 = 0; c0 < M; c0 += chunk) {
        const int C = std::min(chunk, M - c0);
#pragma omp parallel for schedule(dynamic)
        for (int k = 0; k < C; ++k) {
            const auto img = forward(pv, X[static_cast<size_t>(c0 + k)], ctf);
            Pm.row(k) = Eigen::Map<const Eigen::RowVectorXd>(img.data(), np);
        }
        const auto P = Pm.topRows(C);
        const Vec pn = P.rowwise().squaredNorm();
        const LossMatrix cross = G * P.transpose();
        for (int i = 0; i < N; ++i)
            for (int k = 0; k < C; ++k)
                L(i, c0 + k) = std::max(0.0, (pn[k] - 2.0 * cross(i, k) + gn[i]) / (2.0 * sigma));
    }
    return L;
}

LossMatrix rotation_losses_monolithic(const Volume& v, const ImageStack& images, const std::vector<Rotation>& X,
                                      const CtfParams& p, double sigma, std::size_t budget_bytes) {
    if (!(sigma > 0.0)) throw EslError(ErrorCode::NonPositiveSigma, "sigma must be > 0");
    const size_t np = images.pixels();
    if (X.size() * np * sizeof(double) > budget_bytes)
        throw EslError(ErrorCode::BudgetExceeded,
                       "projection cache of " + std::to_string(X.size() * np * sizeof(double)) +
                           " bytes exceeds the budget; use chunked evaluation (rotation_losses)");
    const CtfFilter ctf(v.n, v.voxel_size, p);
    std::vector<std::vector<double>> proj(X.size());
    const PaddedVolume pv(v);
#pragma omp parallel for schedule(dynamic)
    for (long k = 0; k < static_cast<long>(X.size()); ++k) proj[static_cast<size_t>(k)] = forward(pv, X[static_cast<size_t>(k)], ctf);
    LossMatrix L(images.count, static_cast<Eigen::Index>(X.size()));
    for (int i = 0; i < images.count; ++i) {
        const double* g = images.image(i);
        for (size_t k = 0; k < X.size(); ++k) {
            double s = 0.0;
            for (size_t q = 0; q < np; ++q) {
                const double d = proj[k][q] - g[q];
                s += d * d;
            }
            L(i, static_cast<Eigen::Index>(k)) = s / (2.0 * sigma);
        }
    }
    return L;
}

RotationUpdate update_rotations(const LossMatrix& losses, const std::vector<Rotation>& X, const EslConfig& cfg,
                                double gamma_unit) {
    if (!losses.allFinite()) throw EslError(ErrorCode::NonFinite, "losses");
    if (!(gamma_unit > 0.0)) throw EslError(ErrorCode::InvalidArgument, "gamma_unit must be > 0");
    if (static_cast<size_t>(losses.cols()) != X.size())
        throw EslError(ErrorCode::InvalidArgument, "loss matrix width differs from the sampling set");
    const int N = static_cast<int>(losses.rows());
    RotationUpdate out;
    out.rotations.resize(static_cast<size_t>(N));
    out.argmax_points.resize(static_cast<size_t>(N));
    out.weights.resize(static_cast<size_t>(N));
    out.gammas.resize(static_cast<size_t>(N));
    out.bary_iters.resize(static_cast<size_t>(N));
    std::vector<char> restricted(static_cast<size_t>(N), 0), degenerate(static_cast<size_t>(N), 0);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < N; ++i) {
        const Vec f = losses.row(i).transpose();
        LiftedWeights w;
        double gamma = 0.0;
        if (cfg.gamma) {
            gamma = *cfg.gamma * gamma_unit;
            w = lifted_weights(f, gamma, cfg.eta);
        } else {
            try {
                gamma = estimate_gamma(f, cfg.j0, cfg.eta, So3::dim);
                w = lifted_weights(f, gamma, cfg.eta);
            } catch (const EslError& e) {
                if (e.code() != ErrorCode::DegenerateLosses) throw;
                w = argmin_weights(f);
                degenerate[static_cast<size_t>(i)] = 1;
            }
        }
        const Rotation init = X[static_cast<size_t>(w.index[static_cast<size_t>(w.argmax())])];
        std::vector<double> dist;
        dist.reserve(w.index.size());
        for (int k : w.index) dist.push_back(so3_distance(X[static_cast<size_t>(k)], init));
        if (*std::max_element(dist.begin(), dist.end()) >= So3::convexity_radius) {
            w = restrict_support(w, dist, So3::convexity_radius);
            restricted[static_cast<size_t>(i)] = 1;
        }
        const auto b = barycentre<So3>(X, w, init, cfg.bary_max_iters, cfg.bary_tol);
        out.rotations[static_cast<size_t>(i)] = b.point;
        out.argmax_points[static_cast<size_t>(i)] = init;
        out.weights[static_cast<size_t>(i)] = std::move(w);
        out.gammas[static_cast<size_t>(i)] = gamma / gamma_unit;
        out.bary_iters[static_cast<size_t>(i)] = b.iters;
    }
    for (int i = 0; i < N; ++i) {
        out.restricted += restricted[static_cast<size_t>(i)];
        out.degenerate += degenerate[static_cast<size_t>(i)];
    }
    return out;
}

Volume normal_operator(const VolumeProblem& P, const Volume& v) { return Operator(P).apply(v); }
Volume normal_rhs(const VolumeProblem& P) { return Operator(P).rhs(); }

Volume volume_gradient(const VolumeProblem& P, const Volume& v) {
    const Operator A(P);
    Volume g = A.apply(v);
    as_vec(g) -= as_vec(A.rhs());
    return g;
}

double volume_objective(const VolumeProblem& P, const Volume& v) {
    const Operator A(P);
    const auto& R = *P.rotations;
    const size_t np = P.images->pixels();
    std::vector<double> part(static_cast<size_t>(P.images->count), 0.0);
    const PaddedVolume pv(v);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < P.images->count; ++i) {
        const auto img = forward(pv, R[static_cast<size_t>(i)], A.ctf);
        const double* g = P.images->image(i);
        double s = 0.0;
        for (size_t k = 0; k < np; ++k) s += (img[k] - g[k]) * (img[k] - g[k]);
        part[static_cast<size_t>(i)] = s;
    }
    double data = 0.0;
    for (double s : part) data += s;
    const Volume kk = apply_multiplier(v, A.ksq);
    return data / (2.0 * P.sigma) + as_vec(v).squaredNorm() / (2.0 * P.tau1) + as_vec(v).dot(as_vec(kk)) / (2.0 * P.tau2);
}

Volume update_volume(const ImageStack& images, const std::vector<Rotation>& rotations, const CtfParams& p,
                     double sigma, double tau1, double tau2, const Volume* warm, VolumeUpdateInfo* info,
                     int max_iters, double tol) {
    if (!(sigma > 0.0)) throw EslError(ErrorCode::NonPositiveSigma, "sigma must be > 0");
    if (!(tau1 > 0.0 && tau2 > 0.0)) throw EslError(ErrorCode::InvalidArgument, "tau1, tau2 must be > 0");
    if (static_cast<size_t>(images.count) != rotations.size())
        throw EslError(ErrorCode::InvalidArgument, "one rotation per image required");
    VolumeProblem P{&images, &rotations, p, sigma, tau1, tau2};
    const Operator A(P);
    const std::vector<double> minv = impulse_preconditioner(A, P);
    const int n = images.n;
    const double h = images.pixel_size;

    const Volume b = A.rhs();
    const double bnorm = as_vec(b).norm();
    Volume x = warm ? *warm : Volume(n, h);
    x.voxel_size = h;
    if (bnorm == 0.0) {
        if (info) *info = {0, 0.0};
        return Volume(n, h);
    }
    Volume r = b;
    if (warm) as_vec(r) -= as_vec(A.apply(x));
    Volume z = apply_multiplier(r, minv);
    Volume d = z;
    double rz = as_vec(r).dot(as_vec(z));
    int it = 0;
    double rel = as_vec(r).norm() / bnorm;
    while (it < max_iters && rel > tol) {
        const Volume Ad = A.apply(d);
        const double alpha = rz / as_vec(d).dot(as_vec(Ad));
        as_vec(x) += alpha * as_vec(d);
        as_vec(r) -= alpha * as_vec(Ad);
        z = apply_multiplier(r, minv);
        const double rz_new = as_vec(r).dot(as_vec(z));
        as_vec(d) = as_vec(z) + (rz_new / rz) * as_vec(d);
        rz = rz_new;
        ++it;
        rel = as_vec(r).norm() / bnorm;
    }
    if (info) *info = {it, rel};
    return x;
}

RefinementState joint_refine(const ImageStack& images, const Volume& v0, const CtfParams& p,
                             const RefinementConfig& cfg, const std::vector<Rotation>& X,
                             const std::vector<Rotation>* gt, const IterationCallback& on_iter) {
    NoiseParams np{cfg.sigma, cfg.tau1, cfg.tau2};
    if (np.sigma <= 0.0 || np.tau1 <= 0.0 || np.tau2 <= 0.0) {
        const NoiseParams d = default_parameters(images, v0);
        if (np.sigma <= 0.0) np.sigma = d.sigma;
        if (np.tau1 <= 0.0) np.tau1 = d.tau1;
        if (np.tau2 <= 0.0) np.tau2 = d.tau2;
    }
    EslConfig ec;
    ec.eta = cfg.eta;
    ec.j0 = cfg.j0;
    ec.gamma = cfg.gamma;
    ec.bary_max_iters = cfg.bary_iters;
    const Bounds bounds = sparsity_bounds(static_cast<int>(X.size()), cfg.j0, cfg.eta, So3::dim);

    RefinementState st;
    st.volume = v0;
    for (int k = 1; k <= cfg.outer_iters; ++k) {
        const LossMatrix L = rotation_losses(st.volume, images, X, p, np.sigma, cfg.rotation_chunk);
        RotationUpdate upd = update_rotations(L, X, ec, static_cast<double>(images.pixels()));
        st.volume = update_volume(images, upd.rotations, p, np.sigma, np.tau1, np.tau2, &st.volume, nullptr,
                                  cfg.cg_max_iters, cfg.cg_tol);
        st.rotations = std::move(upd.rotations);
        st.weights = std::move(upd.weights);
        st.iteration = k;

        IterationMetrics m;
        m.iter = k;
        m.sparsity_lower = bounds.lower;
        m.sparsity_upper = bounds.upper;
        std::vector<double> l0, w2;
        for (const auto& w : st.weights) l0.push_back(w.support_size());
        m.mean_l0 = mean_of(l0);
        m.min_l0 = static_cast<int>(*std::min_element(l0.begin(), l0.end()));
        m.max_l0 = static_cast<int>(*std::max_element(l0.begin(), l0.end()));
        m.mean_gamma = mean_of(upd.gammas);
        if (gt) {
            const AlignmentResult al = align_rotations(st.rotations, *gt);
            m.mean_err_deg = rad2deg(al.mean);
            m.std_err_deg = rad2deg(al.std);
            for (size_t i = 0; i < st.weights.size(); ++i) {
                const auto& w = st.weights[i];
                double s = 0.0;
                for (size_t q = 0; q < w.index.size(); ++q) {
                    const double d = so3_distance(al.apply(X[static_cast<size_t>(w.index[q])]), (*gt)[i]);
                    s += w.weight[q] * d * d;
                }
                w2.push_back(std::sqrt(s));
            }
        } else {
            for (size_t i = 0; i < st.weights.size(); ++i)
                w2.push_back(w2_to_dirac<So3>(X, st.weights[i], st.rotations[i]));
        }
        m.mean_w2_deg = rad2deg(mean_of(w2));
        VolumeProblem P{&images, &st.rotations, p, np.sigma, np.tau1, np.tau2};
        m.objective = volume_objective(P, st.volume);
        st.log.push_back(m);
        if (on_iter) on_iter(st);
    }
    return st;
}

}  // namespace esl
