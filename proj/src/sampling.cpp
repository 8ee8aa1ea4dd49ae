#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>

#include "esl/error.hpp"
#include "esl/sampling.hpp"

namespace esl {

namespace {

// Sequence sizes reach ~1e23 and the construction compares r(M)(M+1) against
// integers, so the search runs in 100-digit binary floating point.
using Real = boost::multiprecision::cpp_bin_float_100;

Real radius_mp(const Real& M, double eta, double b) {
    return Real(b) / 2 * pow(M, -(Real(1) + Real(eta)) / 3);
}

// 2 r(M) (M + 1).
Real rhs(const Real& M, double eta, double b) { return 2 * radius_mp(M, eta, b) * (M + 1); }

bool admissible(const Real& M, double eta, double b) {
    const Real hi = rhs(M, eta, b);
    const Real k = floor(hi);
    return rhs(M - 1, eta, b) <= k && k < hi;
}

Real next_size(const Real& prev, double eta, double b) {
    // rhs is increasing once M > q/(1-q), q = (1+eta)/3.
    const double q = (1.0 + eta) / 3.0;
    const Real monotone_from = Real(std::ceil(q / (1.0 - q))) + 1;
    Real M = prev + 1;
    for (int steps = 0; steps < 20000 || M <= monotone_from; ++steps, M += 1)
        if (admissible(M, eta, b)) return M;
    // Smallest M with rhs(M) > ceil(rhs(M - 1)): the next integer crossing.
    const Real target = ceil(rhs(M - 1, eta, b));
    Real lo = M - 1, hi = M;
    while (rhs(hi, eta, b) <= target) {
        lo = hi;
        hi = hi * 2;
    }
    while (hi - lo > 1) {
        const Real m = floor((lo + hi) / 2);
        if (rhs(m, eta, b) > target)
            hi = m;
        else
            lo = m;
    }
    return hi;
}

std::vector<Real> sizes_mp(double eta, double b, int m) {
    if (!(eta > 0.0 && eta < 2.0)) throw EslError(ErrorCode::InvalidArgument, "eta must lie in (0, 2)");
    if (!(b > 0.0)) throw EslError(ErrorCode::InvalidArgument, "b must be > 0");
    if (m < 1) throw EslError(ErrorCode::InvalidArgument, "m must be >= 1");
    std::vector<Real> out{Real(1)};
    while (static_cast<int>(out.size()) < m) out.push_back(next_size(out.back(), eta, b));
    return out;
}

std::string to_decimal(const Real& x) {
    return boost::multiprecision::cpp_int(x).str();
}

// sum_{i=lo}^{hi} i and i^2.
Real sum1(const Real& lo, const Real& hi) { return (hi * (hi + 1) - (lo - 1) * lo) / 2; }
Real sum2(const Real& lo, const Real& hi) {
    auto s = [](const Real& n) { return n * (n + 1) * (2 * n + 1) / 6; };
    return s(hi) - s(lo - 1);
}

}  // namespace

double lds_radius(double M, double eta, double b) { return 0.5 * b * std::pow(M, -(1.0 + eta) / 3.0); }

std::vector<std::string> interval_lds_sizes(double eta, double b, int m) {
    std::vector<std::string> out;
    for (const auto& x : sizes_mp(eta, b, m)) out.push_back(to_decimal(x));
    return out;
}

SamplingSet<UnitInterval> interval_lds(double eta, double b, int m, std::uint64_t max_points) {
    const Real M = sizes_mp(eta, b, m).back();
    if (M > Real(max_points))
        throw EslError(ErrorCode::BudgetExceeded, "sequence level has " + to_decimal(M) + " points");
    const auto n = static_cast<std::uint64_t>(M);
    SamplingSet<UnitInterval> s;
    s.level = m;
    s.tag = "interval-lds";
    s.points.resize(n);
    for (std::uint64_t i = 1; i <= n; ++i) s.points[i - 1] = static_cast<double>(i) / static_cast<double>(n + 1);
    return s;
}

DiscrepancyReport interval_grid_discrepancy(const std::string& M_str, double eta, double b, double a,
                                            bool left_aligned, double centre) {
    const Real M(M_str);
    const Real r = radius_mp(M, eta, b);
    const Real L = r * (M + 1);  // radius in grid units
    Real lo, hi, p;               // p in grid units
    if (left_aligned) {
        // Centre = j + L with the left end on node j; admitted nodes j+1 .. j+ceil(2L)-1.
        const Real j = floor((M + 1) / 2 - L);
        p = j + L;
        lo = j + 1;
        hi = j + ceil(2 * L) - 1;
    } else {
        p = Real(centre) * (M + 1);
        lo = floor(p - L) + 1;
        hi = ceil(p + L) - 1;
    }
    if (lo < 1) lo = 1;
    if (hi > M) hi = M;
    const Real cnt = hi >= lo ? hi - lo + 1 : Real(0);
    // sum (i - p)^2 over admitted nodes, scaled back to unit length.
    Real quad = 0;
    if (cnt > 0) quad = (sum2(lo, hi) - 2 * p * sum1(lo, hi) + cnt * p * p) / ((M + 1) * (M + 1));
    // The ellipsoid must stay inside (0, 1) for the exact volume formulas.
    DiscrepancyReport rep;
    rep.radius = static_cast<double>(r);
    rep.inside = static_cast<std::uint64_t>(cnt);
    rep.count_gap = static_cast<double>(abs(cnt / M - 2 * r));
    rep.quad_gap = static_cast<double>(abs(Real(a) * quad / M - 2 * Real(a) * r * r * r / 3));
    return rep;
}

DiscrepancyReport local_discrepancy(const SamplingSet<UnitInterval>& X, const EllipsoidSpec<UnitInterval>& E,
                                    double vol_manifold) {
    if (!E.form.positive_definite()) throw EslError(ErrorCode::NotPositiveDefinite, "ellipsoid form");
    const double a = E.form.m(0, 0);
    const double thr = a * E.radius * E.radius;  // det^{1/d} = a
    double q = 0.0;
    std::uint64_t cnt = 0;
    for (double y : X.points) {
        const double v = a * (y - E.center) * (y - E.center);
        if (v < thr) {
            ++cnt;
            q += v;
        }
    }
    const double n = static_cast<double>(X.size());
    const double rho = E.radius;
    DiscrepancyReport rep;
    rep.radius = rho;
    rep.level = X.level;
    rep.inside = cnt;
    rep.count_gap = std::abs(cnt / n - kOmega1 * rho / vol_manifold);
    rep.quad_gap = std::abs(q / n - 2.0 * a * rho * rho * rho / 3.0 / vol_manifold);
    return rep;
}

void gauss_legendre(int n, double a, double b, std::vector<double>& x, std::vector<double>& w) {
    // Golub-Welsch.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = i / std::sqrt(4.0 * i * i - 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    x.resize(static_cast<size_t>(n));
    w.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double t = es.eigenvalues()[i];
        const double v0 = es.eigenvectors()(0, i);
        x[i] = 0.5 * (b - a) * t + 0.5 * (a + b);
        w[i] = (b - a) * v0 * v0;
    }
}

So3EllipsoidIntegrals so3_ellipsoid_integrals(const BilinearForm& Q, double rho, int nr, int np, int na) {
    if (!Q.positive_definite()) throw EslError(ErrorCode::NotPositiveDefinite, "ellipsoid form");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(Q.m.topLeftCorner<3, 3>());
    const double c = std::cbrt(Q.det());
    // u = sqrt(c) rho V Lambda^{-1/2} s maps the unit ball onto the ellipsoid; Jacobian rho^3.
    const Eigen::Matrix3d T = std::sqrt(c) * rho * es.eigenvectors() *
                              es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal();
    if (T.colwise().norm().maxCoeff() >= std::numbers::pi)
        throw EslError(ErrorCode::OutOfDomain, "ellipsoid exceeds the injectivity radius");
    std::vector<double> xr, wr, xp, wp;
    gauss_legendre(nr, 0.0, 1.0, xr, wr);
    gauss_legendre(np, -1.0, 1.0, xp, wp);
    So3EllipsoidIntegrals out;
    for (int i = 0; i < nr; ++i) {
        const double s = xr[i];
        for (int j = 0; j < np; ++j) {
            const double ct = xp[j], st = std::sqrt(1.0 - ct * ct);
            for (int k = 0; k < na; ++k) {
                const double ph = 2.0 * std::numbers::pi * (k + 0.5) / na;
                const Eigen::Vector3d dir(st * std::cos(ph), st * std::sin(ph), ct);
                const double t = (T * dir).norm() * s;
                const double haar = t < 1e-4 ? 1.0 - t * t / 12.0 : 2.0 * (1.0 - std::cos(t)) / (t * t);
                const double wgt = wr[i] * wp[j] * (2.0 * std::numbers::pi / na) * s * s * rho * rho * rho * haar;
                out.volume += wgt;
                out.quadratic += wgt * c * rho * rho * s * s;
            }
        }
    }
    return out;
}

DiscrepancyReport local_discrepancy(const SamplingSet<So3>& X, const EllipsoidSpec<So3>& E, double vol_manifold) {
    if (!E.form.positive_definite()) throw EslError(ErrorCode::NotPositiveDefinite, "ellipsoid form");
    const double thr = std::cbrt(E.form.det()) * E.radius * E.radius;
    const Eigen::Matrix3d Q = E.form.m.topLeftCorner<3, 3>();
    double q = 0.0;
    std::uint64_t cnt = 0;
    for (const auto& y : X.points) {
        if (so3_distance(E.center, y) > std::numbers::pi - 1e-6) continue;
        const Eigen::Vector3d u = so3_log(E.center, y);
        const double v = u.dot(Q * u);
        if (v < thr) {
            ++cnt;
            q += v;
        }
    }
    const auto I = so3_ellipsoid_integrals(E.form, E.radius);
    const double n = static_cast<double>(X.size());
    DiscrepancyReport rep;
    rep.radius = E.radius;
    rep.level = X.level;
    rep.inside = cnt;
    rep.count_gap = std::abs(cnt / n - I.volume / vol_manifold);
    rep.quad_gap = std::abs(q / n - I.quadratic / vol_manifold);
    return rep;
}

double ellipsoid_volume_estimate(double rho, int dim) { return unit_ball_volume(dim) * std::pow(rho, dim); }

}  // namespace esl
