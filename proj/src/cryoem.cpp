#include "esl/cryoem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "esl/error.hpp"
#include "esl/fft.hpp"

namespace esl {

namespace {

// Exact 0 / +-1 entries for axis-aligned rotations so lattice-preserving
// rotations sample exactly at grid nodes.
Eigen::Matrix3d snapped_inverse(const Rotation& r) {
    Eigen::Matrix3d m = r.matrix().transpose();
    for (int i = 0; i < 9; ++i) {
        double& a = m.data()[i];
        const double k = std::nearbyint(a);
        if (std::abs(a - k) < 1e-12) a = k;
    }
    return m;
}

// Zero-bordered copy, (n+2)^3, so trilinear stencils never need bounds checks.
std::vector<double> pad_volume(const Volume& v) {
    const int n = v.n, m = n + 2;
    std::vector<double> p(static_cast<size_t>(m) * m * m, 0.0);
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            std::copy_n(&v.data[(static_cast<size_t>(z) * n + y) * n], n,
                        &p[(static_cast<size_t>(z + 1) * m + (y + 1)) * m + 1]);
    return p;
}

struct Stencil {
    size_t base;  // padded index of the lower corner
    double fx, fy, fz;
};

inline bool inside(double x, double y, double z, int n) {
    return x >= -1.0 && x < n && y >= -1.0 && y < n && z >= -1.0 && z < n;
}

// Caller guarantees inside(); weights vanish outside [-1, n)^3 anyway.
inline void stencil(double x, double y, double z, int n, Stencil& s) {
    const int m = n + 2;
    const int ix = static_cast<int>(x + 1.0), iy = static_cast<int>(y + 1.0), iz = static_cast<int>(z + 1.0);
    s.base = (static_cast<size_t>(iz) * m + static_cast<size_t>(iy)) * m + static_cast<size_t>(ix);
    s.fx = x + 1.0 - ix;
    s.fy = y + 1.0 - iy;
    s.fz = z + 1.0 - iz;
}

// Range of z in [0, n) for which a + z d lies in [-1, n)^3.
inline void ray_range(const Eigen::Vector3d& a, const Eigen::Vector3d& d, int n, int& z0, int& z1) {
    double lo = 0.0, hi = n - 1.0;
    for (int k = 0; k < 3; ++k) {
        if (d[k] == 0.0) {
            if (!(a[k] >= -1.0 && a[k] < n)) {
                z0 = 1;
                z1 = 0;
                return;
            }
            continue;
        }
        double t0 = (-1.0 - a[k]) / d[k], t1 = (n - a[k]) / d[k];
        if (t0 > t1) std::swap(t0, t1);
        lo = std::max(lo, t0);
        hi = std::min(hi, t1);
    }
    z0 = static_cast<int>(std::ceil(lo - 1e-9));
    z1 = static_cast<int>(std::floor(hi + 1e-9));
    z0 = std::max(z0, 0);
    z1 = std::min(z1, n - 1);
    auto ok = [&](int z) { return inside(a[0] + z * d[0], a[1] + z * d[1], a[2] + z * d[2], n); };
    while (z0 <= z1 && !ok(z0)) ++z0;
    while (z1 >= z0 && !ok(z1)) --z1;
}

inline double gather(const double* p, int m, const Stencil& s) {
    const size_t sy = static_cast<size_t>(m), sz = static_cast<size_t>(m) * m;
    const double* a = p + s.base;
    const double c00 = a[0] * (1 - s.fx) + a[1] * s.fx;
    const double c01 = a[sy] * (1 - s.fx) + a[sy + 1] * s.fx;
    const double c10 = a[sz] * (1 - s.fx) + a[sz + 1] * s.fx;
    const double c11 = a[sz + sy] * (1 - s.fx) + a[sz + sy + 1] * s.fx;
    return (c00 * (1 - s.fy) + c01 * s.fy) * (1 - s.fz) + (c10 * (1 - s.fy) + c11 * s.fy) * s.fz;
}

inline void scatter(double* p, int m, const Stencil& s, double val) {
    const size_t sy = static_cast<size_t>(m), sz = static_cast<size_t>(m) * m;
    double* a = p + s.base;
    const double w0 = val * (1 - s.fz), w1 = val * s.fz;
    const double w00 = w0 * (1 - s.fy), w01 = w0 * s.fy, w10 = w1 * (1 - s.fy), w11 = w1 * s.fy;
    a[0] += w00 * (1 - s.fx);
    a[1] += w00 * s.fx;
    a[sy] += w01 * (1 - s.fx);
    a[sy + 1] += w01 * s.fx;
    a[sz] += w10 * (1 - s.fx);
    a[sz + 1] += w10 * s.fx;
    a[sz + sy] += w11 * (1 - s.fx);
    a[sz + sy + 1] += w11 * s.fx;
}

}  // namespace

double Volume::norm() const { return std::sqrt(std::inner_product(data.begin(), data.end(), data.begin(), 0.0)); }

CtfParams CtfParams::from_microscope(double defocus_um, double cs_mm, double wavenumber_inv_nm, double amp_contrast,
                                     std::optional<double> aperture) {
    if (!(wavenumber_inv_nm > 0.0)) throw EslError(ErrorCode::InvalidArgument, "wavenumber must be > 0");
    if (!(amp_contrast > 0.0 && amp_contrast <= 1.0))
        throw EslError(ErrorCode::InvalidArgument, "amplitude contrast must lie in (0, 1]");
    CtfParams p;
    p.defocus_nm = defocus_um * 1e3;
    p.cs_nm = cs_mm * 1e6;
    p.wavenumber = wavenumber_inv_nm;
    p.amp_contrast = amp_contrast;
    p.aperture_cutoff = aperture;
    return p;
}

double CtfParams::wavenumber_for_voltage(double kilovolts) {
    if (!(kilovolts > 0.0)) throw EslError(ErrorCode::InvalidArgument, "voltage must be > 0");
    const double V = kilovolts * 1e3;
    const double lambda_nm = 1.226426 / std::sqrt(V * (1.0 + 0.978476e-6 * V));
    return 2.0 * std::numbers::pi / lambda_nm;
}

CtfParams CtfParams::identity_negative() {
    CtfParams p;
    p.defocus_nm = 0.0;
    p.cs_nm = 0.0;
    p.amp_contrast = 1.0;
    p.pure_amplitude = true;
    return p;
}

double ctf_phase(double s, const CtfParams& p) {
    const double k = p.wavenumber;
    const double s2 = s * s;
    return p.defocus_nm / (2.0 * k) * s2 - p.cs_nm / (4.0 * k * k * k) * s2 * s2;
}

double ctf_radial(double s, const CtfParams& p) {
    if (p.pure_amplitude) return -1.0;
    if (p.aperture_cutoff && s > *p.aperture_cutoff) return 0.0;
    const double W = ctf_phase(s, p);
    const double a = p.amp_contrast;
    return -(std::sqrt(1.0 - a * a) * std::sin(W) + a * std::cos(W));
}

Volume rotate_volume(const Volume& v, const Rotation& r) {
    const int n = v.n, m = n + 2;
    const double c = n / 2;
    const std::vector<double> p = pad_volume(v);
    const Eigen::Matrix3d Ri = snapped_inverse(r);
    Volume out(n, v.voxel_size);
#pragma omp parallel for schedule(static)
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                const Eigen::Vector3d s = Ri * Eigen::Vector3d(x - c, y - c, z - c) + Eigen::Vector3d::Constant(c);
                if (!inside(s[0], s[1], s[2], n)) continue;
                Stencil st;
                stencil(s[0], s[1], s[2], n, st);
                out.at(z, y, x) = gather(p.data(), m, st);
            }
    return out;
}

std::vector<double> project_z(const Volume& v) {
    const int n = v.n;
    std::vector<double> img(static_cast<size_t>(n) * n, 0.0);
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) img[static_cast<size_t>(y) * n + x] += v.at(z, y, x);
    for (double& a : img) a *= v.voxel_size;
    return img;
}

PaddedVolume::PaddedVolume(const Volume& v) : n(v.n), voxel_size(v.voxel_size), padded(pad_volume(v)) {}

std::vector<double> PaddedVolume::project(const Rotation& r) const {
    const int m = n + 2;
    const double c = n / 2;
    const Eigen::Matrix3d Ri = snapped_inverse(r);
    const Eigen::Vector3d d = Ri.col(2);
    const double* p = padded.data();
    std::vector<double> img(static_cast<size_t>(n) * n, 0.0);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const Eigen::Vector3d a = Ri * Eigen::Vector3d(x - c, y - c, -c) + Eigen::Vector3d::Constant(c);
            int z0, z1;
            ray_range(a, d, n, z0, z1);
            double acc = 0.0;
            for (int z = z0; z <= z1; ++z) {
                Stencil st;
                stencil(a[0] + z * d[0], a[1] + z * d[1], a[2] + z * d[2], n, st);
                acc += gather(p, m, st);
            }
            img[static_cast<size_t>(y) * n + x] = acc * voxel_size;
        }
    return img;
}

std::vector<double> project_rotated(const Volume& v, const Rotation& r) { return PaddedVolume(v).project(r); }

void backproject_rotated_add(const std::vector<double>& img, const Rotation& r, Volume& acc, double scale) {
    const int n = acc.n, m = n + 2;
    const double c = n / 2;
    std::vector<double> p(static_cast<size_t>(m) * m * m, 0.0);
    const Eigen::Matrix3d Ri = snapped_inverse(r);
    const Eigen::Vector3d d = Ri.col(2);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double val = scale * acc.voxel_size * img[static_cast<size_t>(y) * n + x];
            if (val == 0.0) continue;
            const Eigen::Vector3d a = Ri * Eigen::Vector3d(x - c, y - c, -c) + Eigen::Vector3d::Constant(c);
            int z0, z1;
            ray_range(a, d, n, z0, z1);
            for (int z = z0; z <= z1; ++z) {
                Stencil st;
                stencil(a[0] + z * d[0], a[1] + z * d[1], a[2] + z * d[2], n, st);
                scatter(p.data(), m, st, val);
            }
        }
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) acc.at(z, y, x) += p[(static_cast<size_t>(z + 1) * m + (y + 1)) * m + x + 1];
}

CtfFilter::CtfFilter(int n, double h, const CtfParams& p) : n_(n) {
    neg_identity_ = p.pure_amplitude;
    const int N = 2 * n, H = n + 1;
    mult_.resize(static_cast<size_t>(N) * H);
    const double scale = 1.0 / (static_cast<double>(N) * N);
    for (int k0 = 0; k0 < N; ++k0)
        for (int k1 = 0; k1 < H; ++k1) {
            const double s = 2.0 * std::numbers::pi / (N * h) * std::hypot(fft::freq_index(k0, N), k1);
            mult_[static_cast<size_t>(k0) * H + k1] = ctf_radial(s, p) * scale;
        }
    const int h1 = n / 2 + 1;
    coarse_.resize(static_cast<size_t>(n) * h1);
    for (int k0 = 0; k0 < n; ++k0)
        for (int k1 = 0; k1 < h1; ++k1) {
            const double s = 2.0 * std::numbers::pi / (n * h) * std::hypot(fft::freq_index(k0, n), k1);
            coarse_[static_cast<size_t>(k0) * h1 + k1] = ctf_radial(s, p);
        }
}

void CtfFilter::apply(const double* in, double* out) const {
    const int n = n_;
    if (neg_identity_) {
        for (size_t i = 0; i < static_cast<size_t>(n) * n; ++i) out[i] = -in[i];
        return;
    }
    const int N = 2 * n, H = n + 1;
    std::vector<double> pad(static_cast<size_t>(N) * N, 0.0);
    for (int y = 0; y < n; ++y) std::copy_n(in + static_cast<size_t>(y) * n, n, &pad[static_cast<size_t>(y) * N]);
    std::vector<fft::cplx> spec(static_cast<size_t>(N) * H);
    fft::r2c_2d(N, N, pad.data(), spec.data());
    for (size_t i = 0; i < spec.size(); ++i) spec[i] *= mult_[i];
    fft::c2r_2d(N, N, spec.data(), pad.data());
    for (int y = 0; y < n; ++y) std::copy_n(&pad[static_cast<size_t>(y) * N], n, out + static_cast<size_t>(y) * n);
}

std::vector<double> CtfFilter::apply(const std::vector<double>& in) const {
    std::vector<double> out(in.size());
    apply(in.data(), out.data());
    return out;
}

std::vector<double> forward(const Volume& v, const Rotation& r, const CtfFilter& ctf) {
    return ctf.apply(project_rotated(v, r));
}

std::vector<double> forward(const PaddedVolume& v, const Rotation& r, const CtfFilter& ctf) {
    return ctf.apply(v.project(r));
}

Volume adjoint(const std::vector<double>& g, const Rotation& r, const CtfFilter& ctf, double voxel_size) {
    Volume out(ctf.n(), voxel_size);
    backproject_rotated_add(ctf.apply(g), r, out);
    return out;
}

std::vector<double> forward(const Volume& v, const Rotation& r, const CtfParams& p) {
    return forward(v, r, CtfFilter(v.n, v.voxel_size, p));
}

Volume adjoint(const std::vector<double>& g, const Rotation& r, const CtfParams& p, int n, double voxel_size) {
    return adjoint(g, r, CtfFilter(n, voxel_size, p), voxel_size);
}

Dataset generate_dataset(const Volume& gt, int n_images, double snr, const CtfParams& p, std::uint64_t seed) {
    if (!(snr > 0.0)) throw EslError(ErrorCode::InvalidArgument, "snr must be > 0");
    if (n_images < 1) throw EslError(ErrorCode::InvalidArgument, "need at least one image");
    Dataset ds;
    ds.gt_volume = gt;
    ds.ctf = p;
    ds.snr = snr;
    ds.seed = seed;
    std::mt19937_64 rng(seed);
    for (int i = 0; i < n_images; ++i) ds.gt_rotations.push_back(Rotation::random(rng));
    ds.images = ImageStack(n_images, gt.n, gt.voxel_size);
    const CtfFilter ctf(gt.n, gt.voxel_size, p);
    const size_t np = ds.images.pixels();
    const PaddedVolume pv(gt);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n_images; ++i) {
        const auto img = forward(pv, ds.gt_rotations[static_cast<size_t>(i)], ctf);
        std::copy(img.begin(), img.end(), ds.images.image(i));
    }
    double power = 0.0;
    for (int i = 0; i < n_images; ++i) {
        const double* g = ds.images.image(i);
        double s = 0.0;
        for (size_t k = 0; k < np; ++k) s += g[k] * g[k];
        power += s / static_cast<double>(np);
    }
    power /= n_images;
    ds.clean_power = power;
    ds.noise_variance = power / snr;
    std::normal_distribution<double> noise(0.0, std::sqrt(ds.noise_variance));
    for (double& x : ds.images.data) x += noise(rng);
    return ds;
}

Volume blur_volume(const Volume& v, double sigma) {
    if (!(sigma > 0.0)) throw EslError(ErrorCode::InvalidArgument, "sigma must be > 0");
    const int n = v.n, h = n / 2 + 1;
    std::vector<double> g1(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double d = fft::freq_index(k, n);
        g1[static_cast<size_t>(k)] = std::exp(-d * d / (2.0 * sigma * sigma));
    }
    const double s1 = std::accumulate(g1.begin(), g1.end(), 0.0);
    for (double& x : g1) x /= s1;
    std::vector<double> ker(v.size());
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) ker[(static_cast<size_t>(z) * n + y) * n + x] = g1[z] * g1[y] * g1[x];
    const size_t nc = static_cast<size_t>(n) * n * h;
    std::vector<fft::cplx> V(nc), K(nc);
    fft::r2c_3d(n, n, n, v.data.data(), V.data());
    fft::r2c_3d(n, n, n, ker.data(), K.data());
    const double scale = 1.0 / static_cast<double>(v.size());
    for (size_t i = 0; i < nc; ++i) V[i] *= K[i] * scale;
    Volume out(n, v.voxel_size);
    fft::c2r_3d(n, n, n, V.data(), out.data.data());
    return out;
}

double default_voxel_size(int n) { return 0.21667 * 91.0 / n; }

Volume make_phantom(int n, std::uint64_t seed) {
    if (n < 8) throw EslError(ErrorCode::InvalidArgument, "phantom needs n >= 8");
    Volume v(n, default_voxel_size(n));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    // Pseudo-atoms of 0.6 nm Gaussian width filling an off-axis ellipsoid.
    constexpr int kAtoms = 500;
    const double w = 0.6 / v.voxel_size;
    const double cut2 = 16.0 * w * w;
    const Eigen::Vector3d semi = Eigen::Vector3d(0.36, 0.30, 0.24) * n;
    const Eigen::Vector3d c = Eigen::Vector3d::Constant(n / 2);
    std::vector<Eigen::Vector3d> pos;
    std::vector<double> amp;
    for (int k = 0; k < kAtoms; ++k) {
        Eigen::Vector3d p;
        do {
            p = Eigen::Vector3d(U(rng), U(rng), U(rng)) * 2.0 - Eigen::Vector3d::Ones();
        } while (p.squaredNorm() > 1.0);
        pos.push_back(p.cwiseProduct(semi) + c);
        amp.push_back(0.5 + U(rng));
    }
    const int r = static_cast<int>(std::ceil(4.0 * w));
    for (int k = 0; k < kAtoms; ++k) {
        const Eigen::Vector3d& p = pos[static_cast<size_t>(k)];
        const int x0 = std::max(0, static_cast<int>(p[0]) - r), x1 = std::min(n - 1, static_cast<int>(p[0]) + r + 1);
        const int y0 = std::max(0, static_cast<int>(p[1]) - r), y1 = std::min(n - 1, static_cast<int>(p[1]) + r + 1);
        const int z0 = std::max(0, static_cast<int>(p[2]) - r), z1 = std::min(n - 1, static_cast<int>(p[2]) + r + 1);
        for (int z = z0; z <= z1; ++z)
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const double d2 = (Eigen::Vector3d(x, y, z) - p).squaredNorm();
                    if (d2 < cut2) v.at(z, y, x) += amp[static_cast<size_t>(k)] * std::exp(-0.5 * d2 / (w * w));
                }
    }
    return v;
}

}  // namespace esl
