#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "esl/manifold.hpp"

namespace esl {

// Cubic n^3 grid, index (z n + y) n + x, lengths in nm.
struct Volume {
    int n = 0;
    double voxel_size = 1.0;
    std::vector<double> data;

    Volume() = default;
    Volume(int n_, double h) : n(n_), voxel_size(h), data(static_cast<size_t>(n_) * n_ * n_, 0.0) {}
    double& at(int z, int y, int x) { return data[(static_cast<size_t>(z) * n + y) * n + x]; }
    double at(int z, int y, int x) const { return data[(static_cast<size_t>(z) * n + y) * n + x]; }
    size_t size() const { return data.size(); }
    double norm() const;
};

// count images of n x n pixels, index (i n + y) n + x.
struct ImageStack {
    int count = 0;
    int n = 0;
    double pixel_size = 1.0;
    std::vector<double> data;

    ImageStack() = default;
    ImageStack(int count_, int n_, double h)
        : count(count_), n(n_), pixel_size(h), data(static_cast<size_t>(count_) * n_ * n_, 0.0) {}
    double* image(int i) { return data.data() + static_cast<size_t>(i) * n * n; }
    const double* image(int i) const { return data.data() + static_cast<size_t>(i) * n * n; }
    size_t pixels() const { return static_cast<size_t>(n) * n; }
};

// Optics in nm internally; the factory takes microscope units.
struct CtfParams {
    double defocus_nm = 1500.0;
    double cs_nm = 2.0e6;
    double wavenumber = 0.25;  // nm^-1
    double amp_contrast = 0.1;
    std::optional<double> aperture_cutoff;  // nm^-1 (angular), none = pass all
    bool pure_amplitude = false;             // c = -1 everywhere (identity up to sign)

    static CtfParams from_microscope(double defocus_um, double cs_mm, double wavenumber_inv_nm, double amp_contrast,
                                     std::optional<double> aperture = std::nullopt);
    static CtfParams identity_negative();
    // Angular wavenumber 2 pi / lambda of an electron at the given voltage
    // (relativistic), e.g. 200 kV -> about 2505 nm^-1.
    static double wavenumber_for_voltage(double kilovolts);
};

// W(s) = dz/(2k) s^2 - Cs/(4k^3) s^4.
double ctf_phase(double s, const CtfParams& p);
// -A(s) (sqrt(1 - a^2) sin W(s) + a cos W(s)), s = |xi| angular frequency in rad/nm.
double ctf_radial(double s, const CtfParams& p);
inline double ctf_fourier(const Eigen::Vector2d& xi, const CtfParams& p) { return ctf_radial(xi.norm(), p); }

// v o r^{-1}, trilinear about the integer centre n/2; zero outside the grid.
Volume rotate_volume(const Volume& v, const Rotation& r);
// h sum_z v(z, y, x).
std::vector<double> project_z(const Volume& v);
// Fused project_z(rotate_volume(v, r)) without materialising the rotated grid.
std::vector<double> project_rotated(const Volume& v, const Rotation& r);
// Zero-bordered copy reused across many projections of one volume.
struct PaddedVolume {
    int n = 0;
    double voxel_size = 1.0;
    std::vector<double> padded;
    explicit PaddedVolume(const Volume& v);
    std::vector<double> project(const Rotation& r) const;
};

// Exact transpose of project_rotated.
void backproject_rotated_add(const std::vector<double>& img, const Rotation& r, Volume& acc, double scale = 1.0);

// Convolution with the CTF on a zero-padded 2n grid, cropped back. Self-adjoint.
class CtfFilter {
public:
    CtfFilter(int n, double pixel_size, const CtfParams& p);
    void apply(const double* in, double* out) const;
    std::vector<double> apply(const std::vector<double>& in) const;
    int n() const { return n_; }
    // c(xi) at the unpadded n x n DFT frequencies, r2c layout (n x (n/2+1)).
    const std::vector<double>& coarse_multiplier() const { return coarse_; }
    bool identity_negative() const { return neg_identity_; }

private:
    int n_;
    bool neg_identity_ = false;
    std::vector<double> mult_;    // 2n x (n+1)
    std::vector<double> coarse_;  // n x (n/2+1)
};

std::vector<double> forward(const Volume& v, const Rotation& r, const CtfFilter& ctf);
Volume adjoint(const std::vector<double>& g, const Rotation& r, const CtfFilter& ctf, double voxel_size);
std::vector<double> forward(const PaddedVolume& v, const Rotation& r, const CtfFilter& ctf);

std::vector<double> forward(const Volume& v, const Rotation& r, const CtfParams& p);
Volume adjoint(const std::vector<double>& g, const Rotation& r, const CtfParams& p, int n, double voxel_size);

struct Dataset {
    ImageStack images;
    std::vector<Rotation> gt_rotations;
    Volume gt_volume;
    CtfParams ctf;
    double snr = 1.0 / 16.0;
    std::uint64_t seed = 0;
    double noise_variance = 0.0;
    double clean_power = 0.0;
};

Dataset generate_dataset(const Volume& gt, int n_images, double snr, const CtfParams& p, std::uint64_t seed);

// Mass-preserving circular Gaussian blur; sigma in voxels.
Volume blur_volume(const Volume& v, double sigma_voxels);

// Asymmetric pseudo-atomic density (500 Gaussian atoms, 0.6 nm wide) inside
// the inscribed sphere.
Volume make_phantom(int n, std::uint64_t seed = 7);
// Voxel size of an n^3 grid covering the same box as a 91^3 grid at 0.21667 nm.
double default_voxel_size(int n);

}  // namespace esl
