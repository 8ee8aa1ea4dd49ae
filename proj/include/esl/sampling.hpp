#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "esl/manifold.hpp"

namespace esl {

template <Manifold M>
struct SamplingSet {
    std::vector<typename M::Point> points;
    int level = 0;
    std::string tag;

    size_t size() const { return points.size(); }
};

// ---------------------------------------------------------------- S^3 meshes

// Triangulated antipodally symmetric point set on S^3. Vertex v and antipode[v]
// are opposite quaternions; so3_index[v] is the SO(3) point they represent.
struct S3Triangulation {
    std::vector<Eigen::Vector4d> verts;
    std::vector<int> antipode;
    std::vector<int> so3_index;
    std::vector<std::array<int, 4>> tets;
    int level = 0;
};

// Directory holding the shipped node / tetrahedra files. ESL_DATA_DIR overrides.
std::filesystem::path data_dir();

// Canonical quaternion per antipodal pair. Throws MissingAsset if absent.
std::vector<Eigen::Vector4d> load_base_nodes(const std::filesystem::path& file);
std::vector<std::array<int, 4>> load_tets(const std::filesystem::path& file);
void save_base_nodes(const std::filesystem::path& file, const std::vector<Eigen::Vector4d>& nodes);
void save_tets(const std::filesystem::path& file, const std::vector<std::array<int, 4>>& tets);

// Well-separated antipodally symmetric design of 2 n_pairs points on S^3 by
// Riesz energy descent on projective space; returns one canonical node per pair.
std::vector<Eigen::Vector4d> generate_symmetric_s3_nodes(int n_pairs, std::uint64_t seed, int iters = 400);

// Convex hull of points on S^3 (all points must be extreme) by gift wrapping.
std::vector<std::array<int, 4>> convex_hull_s3(const std::vector<Eigen::Vector4d>& pts);

// Builds the symmetric vertex list (node i, then -node i at i + n).
S3Triangulation make_symmetric_triangulation(const std::vector<Eigen::Vector4d>& nodes,
                                             const std::vector<std::array<int, 4>>& tets);

struct EulerCheck {
    long long V = 0, E = 0, F = 0, T = 0;
    bool ok() const { return V - E + F - T == 0 && F == 2 * T; }
};
EulerCheck euler_characteristic(const S3Triangulation& tri);

// One step of midpoint refinement: each tetrahedron becomes four corner
// tetrahedra plus its inner octahedron cut along the shortest diagonal.
S3Triangulation refine_triangulation(const S3Triangulation& tri);

// Shipped base triangulation (level 0).
const S3Triangulation& base_triangulation();

SamplingSet<So3> so3_points(const S3Triangulation& tri);
SamplingSet<So3> so3_base_mesh();
// Cached, refined `levels` times from the base mesh; parents keep their indices.
const S3Triangulation& so3_triangulation(int level);
SamplingSet<So3> refine_so3_mesh(const S3Triangulation& tri, int levels);
SamplingSet<So3> so3_mesh(int level);

// Nearest-neighbour rotation angles within an SO(3) set.
std::vector<double> nearest_neighbour_distances(const std::vector<Rotation>& pts);
struct SpacingStats {
    double mean = 0.0, std = 0.0, min = 0.0, max = 0.0;
    double cv() const { return std / mean; }
};
SpacingStats spacing_stats(const std::vector<double>& d);

// ---------------------------------------------------------------- interval LDS

// r(M) = (b/2) M^{-(1+eta)/3}.
double lds_radius(double M, double eta, double b);

// Sizes M_1..M_m of the sequence as decimal strings (values outgrow 64 bits).
std::vector<std::string> interval_lds_sizes(double eta, double b, int m);

// Equispaced grid {i/(M_m+1)}; BudgetExceeded when M_m exceeds max_points.
SamplingSet<UnitInterval> interval_lds(double eta, double b, int m, std::uint64_t max_points = 50'000'000);

// ---------------------------------------------------------------- discrepancy

struct DiscrepancyReport {
    double count_gap = 0.0;
    double quad_gap = 0.0;
    double radius = 0.0;
    int level = 0;
    std::uint64_t inside = 0;
};

// Exact for the interval: vol(E) = 2 rho, integral of a(y-p)^2 = 2 a rho^3 / 3.
DiscrepancyReport local_discrepancy(const SamplingSet<UnitInterval>& X, const EllipsoidSpec<UnitInterval>& E,
                                    double vol_manifold = kVolInterval);
// SO(3): integrals against the Haar density by tensor Gauss quadrature.
DiscrepancyReport local_discrepancy(const SamplingSet<So3>& X, const EllipsoidSpec<So3>& E,
                                    double vol_manifold = kVolSo3);

// Grid {i/(M+1)} in closed form (no enumeration), form Q = a xy, radius r.
// When left_aligned, the centre is placed at j/(M+1) + r with j the largest
// index keeping the centre at or below 1/2, so the left end sits on a node.
DiscrepancyReport interval_grid_discrepancy(const std::string& M, double eta, double b, double a, bool left_aligned,
                                            double centre = 0.5);

// Leading-order ellipsoid volume omega_d rho^d.
double ellipsoid_volume_estimate(double rho, int dim);

// Haar-measure integrals over a tangent ellipsoid on SO(3).
struct So3EllipsoidIntegrals {
    double volume = 0.0;
    double quadratic = 0.0;
};
So3EllipsoidIntegrals so3_ellipsoid_integrals(const BilinearForm& Q, double rho, int n_radial = 48, int n_polar = 48,
                                              int n_azimuth = 96);

// Gauss-Legendre nodes/weights on [a, b].
void gauss_legendre(int n, double a, double b, std::vector<double>& x, std::vector<double>& w);

}  // namespace esl
