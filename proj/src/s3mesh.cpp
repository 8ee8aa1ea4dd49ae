#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "esl/error.hpp"
#include "esl/sampling.hpp"

#ifndef ESL_DEFAULT_DATA_DIR
#define ESL_DEFAULT_DATA_DIR "data"
#endif

namespace esl {

namespace {

using V4 = Eigen::Vector4d;

// Vector orthogonal to u, v, w in R^4 (generalised cross product).
V4 cross4(const V4& u, const V4& v, const V4& w) {
    V4 n;
    for (int i = 0; i < 4; ++i) {
        Eigen::Matrix3d m;
        int c = 0;
        for (int j = 0; j < 4; ++j) {
            if (j == i) continue;
            m.col(c++) = Eigen::Vector3d(u[j], v[j], w[j]);
        }
        n[i] = ((i % 2) ? -1.0 : 1.0) * m.determinant();
    }
    return n;
}

std::uint64_t ridge_key(int a, int b, int c) {
    std::array<int, 3> r{a, b, c};
    std::sort(r.begin(), r.end());
    return (static_cast<std::uint64_t>(r[0]) << 42) | (static_cast<std::uint64_t>(r[1]) << 21) |
           static_cast<std::uint64_t>(r[2]);
}

std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

V4 facet_normal(const std::vector<V4>& p, const std::array<int, 4>& f) {
    V4 n = cross4(p[f[1]] - p[f[0]], p[f[2]] - p[f[0]], p[f[3]] - p[f[0]]);
    n.normalize();
    if (n.dot(p[f[0]]) < 0.0) n = -n;
    return n;
}

}  // namespace

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("ESL_DATA_DIR"); env && *env) return env;
    return ESL_DEFAULT_DATA_DIR;
}

std::vector<Eigen::Vector4d> load_base_nodes(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw EslError(ErrorCode::MissingAsset, "cannot open node file " + file.string());
    std::vector<Eigen::Vector4d> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        V4 q;
        if (!(ss >> q[0] >> q[1] >> q[2] >> q[3])) throw EslError(ErrorCode::MissingAsset, "malformed node line");
        out.push_back(canonical_sign(q.normalized()));
    }
    return out;
}

std::vector<std::array<int, 4>> load_tets(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw EslError(ErrorCode::MissingAsset, "cannot open tetrahedra file " + file.string());
    std::vector<std::array<int, 4>> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::array<int, 4> t{};
        if (!(ss >> t[0] >> t[1] >> t[2] >> t[3])) throw EslError(ErrorCode::MissingAsset, "malformed tet line");
        out.push_back(t);
    }
    return out;
}

void save_base_nodes(const std::filesystem::path& file, const std::vector<Eigen::Vector4d>& nodes) {
    std::ofstream out(file);
    if (!out) throw EslError(ErrorCode::Io, "cannot write " + file.string());
    out << "# " << nodes.size() << " canonical unit quaternions (w x y z); with their negatives a symmetric S^3 design\n";
    out << std::setprecision(17);
    for (const auto& q : nodes) out << q[0] << ' ' << q[1] << ' ' << q[2] << ' ' << q[3] << '\n';
}

void save_tets(const std::filesystem::path& file, const std::vector<std::array<int, 4>>& tets) {
    std::ofstream out(file);
    if (!out) throw EslError(ErrorCode::Io, "cannot write " + file.string());
    out << "# " << tets.size() << " tetrahedra; vertex i < n is node i, vertex i >= n is -node (i - n)\n";
    for (const auto& t : tets) out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
}

std::vector<Eigen::Vector4d> generate_symmetric_s3_nodes(int n_pairs, std::uint64_t seed, int iters) {
    std::mt19937_64 rng(seed);
    std::vector<V4> x(static_cast<size_t>(n_pairs));
    for (auto& q : x) q = Rotation::random(rng).q();

    const double s = 4.0;  // Riesz exponent; large enough to act locally
    const double spacing = std::cbrt(2.0 * std::numbers::pi * std::numbers::pi / (2.0 * n_pairs));
    std::vector<V4> force(x.size());
    for (int it = 0; it < iters; ++it) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n_pairs; ++i) {
            V4 f = V4::Zero();
            for (int j = 0; j < n_pairs; ++j) {
                if (j == i) continue;
                const V4 dm = x[i] - x[j];
                const V4 dp = x[i] + x[j];
                const double a = dm.squaredNorm(), b = dp.squaredNorm();
                f += dm / std::pow(a, 0.5 * s + 1.0) + dp / std::pow(b, 0.5 * s + 1.0);
            }
            f -= f.dot(x[i]) * x[i];
            force[i] = f;
        }
        double fmax = 0.0;
        for (const auto& f : force) fmax = std::max(fmax, f.norm());
        // Largest displacement decays from a third of the spacing to ~1e-3 of it.
        const double frac = static_cast<double>(it) / std::max(1, iters - 1);
        const double step = spacing * (0.3 * std::pow(3e-3, frac));
        for (int i = 0; i < n_pairs; ++i) x[i] = (x[i] + (step / fmax) * force[i]).normalized();
    }
    for (auto& q : x) q = canonical_sign(q);
    return x;
}

std::vector<std::array<int, 4>> convex_hull_s3(const std::vector<Eigen::Vector4d>& p) {
    const int n = static_cast<int>(p.size());
    if (n < 5) throw EslError(ErrorCode::InvalidArgument, "hull needs at least 5 points");
    const double tol = 1e-12;

    auto is_facet = [&](const std::array<int, 4>& f, V4& nrm) {
        V4 c = cross4(p[f[1]] - p[f[0]], p[f[2]] - p[f[0]], p[f[3]] - p[f[0]]);
        const double cn = c.norm();
        if (cn < 1e-14) return false;
        nrm = c / cn;
        if (nrm.dot(p[f[0]]) < 0.0) nrm = -nrm;
        const double off = nrm.dot(p[f[0]]);
        for (int k = 0; k < n; ++k)
            if (nrm.dot(p[k]) > off + tol) return false;
        return true;
    };

    // Seed facet among the nearest neighbours of point 0.
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return (p[a] - p[0]).squaredNorm() < (p[b] - p[0]).squaredNorm(); });
    const int k = std::min(n, 24);
    std::array<int, 4> seed{-1, -1, -1, -1};
    V4 nrm;
    for (int b = 1; b < k && seed[0] < 0; ++b)
        for (int c = b + 1; c < k && seed[0] < 0; ++c)
            for (int d = c + 1; d < k && seed[0] < 0; ++d) {
                std::array<int, 4> f{0, order[b], order[c], order[d]};
                if (is_facet(f, nrm)) seed = f;
            }
    if (seed[0] < 0) throw EslError(ErrorCode::InvalidArgument, "no seed facet found");
    std::sort(seed.begin(), seed.end());

    std::vector<std::array<int, 4>> facets{seed};
    std::vector<V4> normals{facet_normal(p, seed)};
    std::set<std::array<int, 4>> seen{seed};
    std::unordered_map<std::uint64_t, int> ridge_count;
    auto add_ridges = [&](const std::array<int, 4>& f) {
        for (int e = 0; e < 4; ++e) {
            std::array<int, 3> r;
            int c = 0;
            for (int j = 0; j < 4; ++j)
                if (j != e) r[c++] = f[j];
            ++ridge_count[ridge_key(r[0], r[1], r[2])];
        }
    };
    add_ridges(seed);

    for (size_t fi = 0; fi < facets.size(); ++fi) {
        const std::array<int, 4> f = facets[fi];
        const V4 nf = normals[fi];
        for (int e = 0; e < 4; ++e) {
            std::array<int, 3> r;
            int c = 0;
            for (int j = 0; j < 4; ++j)
                if (j != e) r[c++] = f[j];
            if (ridge_count[ridge_key(r[0], r[1], r[2])] >= 2) continue;
            const int d = f[e];
            const V4& a = p[r[0]];
            V4 e1 = (p[r[1]] - a).normalized();
            V4 e2 = p[r[2]] - a;
            e2 = (e2 - e2.dot(e1) * e1).normalized();
            V4 u2 = p[d] - a;
            u2 -= u2.dot(e1) * e1 + u2.dot(e2) * e2 + u2.dot(nf) * nf;
            u2.normalize();
            int best = -1;
            double best_theta = 10.0;
            for (int q = 0; q < n; ++q) {
                if (q == r[0] || q == r[1] || q == r[2] || q == d) continue;
                const V4 w = p[q] - a;
                const double th = std::atan2(-w.dot(nf), -w.dot(u2));
                if (th < best_theta) {
                    best_theta = th;
                    best = q;
                }
            }
            std::array<int, 4> g{r[0], r[1], r[2], best};
            std::sort(g.begin(), g.end());
            if (seen.insert(g).second) {
                facets.push_back(g);
                normals.push_back(facet_normal(p, g));
                add_ridges(g);
            }
        }
    }
    return facets;
}

S3Triangulation make_symmetric_triangulation(const std::vector<Eigen::Vector4d>& nodes,
                                             const std::vector<std::array<int, 4>>& tets) {
    const int n = static_cast<int>(nodes.size());
    S3Triangulation t;
    t.verts.resize(2 * static_cast<size_t>(n));
    t.antipode.resize(2 * static_cast<size_t>(n));
    t.so3_index.resize(2 * static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        t.verts[i] = nodes[i];
        t.verts[i + n] = -nodes[i];
        t.antipode[i] = i + n;
        t.antipode[i + n] = i;
        t.so3_index[i] = t.so3_index[i + n] = i;
    }
    t.tets = tets;
    return t;
}

EulerCheck euler_characteristic(const S3Triangulation& tri) {
    std::unordered_map<std::uint64_t, int> edges;
    std::set<std::uint64_t> faces;
    edges.reserve(tri.tets.size() * 2);
    for (const auto& t : tri.tets) {
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j) edges.emplace(edge_key(t[i], t[j]), 0);
        for (int e = 0; e < 4; ++e) {
            std::array<int, 3> r;
            int c = 0;
            for (int j = 0; j < 4; ++j)
                if (j != e) r[c++] = t[j];
            faces.insert(ridge_key(r[0], r[1], r[2]));
        }
    }
    return {static_cast<long long>(tri.verts.size()), static_cast<long long>(edges.size()),
            static_cast<long long>(faces.size()), static_cast<long long>(tri.tets.size())};
}

S3Triangulation refine_triangulation(const S3Triangulation& tri) {
    S3Triangulation out;
    out.verts = tri.verts;
    out.antipode = tri.antipode;
    out.so3_index = tri.so3_index;
    out.level = tri.level + 1;
    int next_so3 = tri.so3_index.empty() ? 0 : *std::max_element(tri.so3_index.begin(), tri.so3_index.end()) + 1;

    std::unordered_map<std::uint64_t, int> mid;
    mid.reserve(tri.tets.size() * 2);
    auto midpoint = [&](int a, int b) {
        auto it = mid.find(edge_key(a, b));
        if (it != mid.end()) return it->second;
        const int v = static_cast<int>(out.verts.size());
        const V4 m = (tri.verts[a] + tri.verts[b]).normalized();
        out.verts.push_back(m);
        out.verts.push_back(-m);
        out.antipode.push_back(v + 1);
        out.antipode.push_back(v);
        out.so3_index.push_back(next_so3);
        out.so3_index.push_back(next_so3);
        ++next_so3;
        mid.emplace(edge_key(a, b), v);
        mid.emplace(edge_key(tri.antipode[a], tri.antipode[b]), v + 1);
        return v;
    };

    out.tets.reserve(tri.tets.size() * 8);
    for (const auto& t : tri.tets) {
        const int a = t[0], b = t[1], c = t[2], d = t[3];
        const int ab = midpoint(a, b), ac = midpoint(a, c), ad = midpoint(a, d);
        const int bc = midpoint(b, c), bd = midpoint(b, d), cd = midpoint(c, d);
        out.tets.push_back({a, ab, ac, ad});
        out.tets.push_back({b, ab, bc, bd});
        out.tets.push_back({c, ac, bc, cd});
        out.tets.push_back({d, ad, bd, cd});
        // Diagonals of the inner octahedron and the 4-cycle around each.
        const std::array<std::array<int, 6>, 3> diag{{{ab, cd, ac, bc, bd, ad},
                                                      {ac, bd, ab, bc, cd, ad},
                                                      {ad, bc, ab, bd, cd, ac}}};
        int best = 0;
        double best_len = 1e300;
        for (int k = 0; k < 3; ++k) {
            const double len = (out.verts[diag[k][0]] - out.verts[diag[k][1]]).squaredNorm();
            if (len < best_len) {
                best_len = len;
                best = k;
            }
        }
        const auto& D = diag[best];
        for (int k = 0; k < 4; ++k) out.tets.push_back({D[0], D[1], D[2 + k], D[2 + (k + 1) % 4]});
    }
    return out;
}

const S3Triangulation& base_triangulation() { return so3_triangulation(0); }

const S3Triangulation& so3_triangulation(int level) {
    if (level < 0) throw EslError(ErrorCode::InvalidArgument, "mesh level must be >= 0");
    static std::mutex mu;
    static std::vector<std::unique_ptr<S3Triangulation>> cache;
    std::lock_guard<std::mutex> lock(mu);
    if (cache.empty()) {
        const auto dir = data_dir();
        auto nodes = load_base_nodes(dir / "s3_base_nodes.txt");
        std::vector<std::array<int, 4>> tets;
        if (std::filesystem::exists(dir / "s3_base_tets.txt")) {
            tets = load_tets(dir / "s3_base_tets.txt");
        } else {
            std::vector<V4> sym;
            for (const auto& q : nodes) sym.push_back(q);
            for (const auto& q : nodes) sym.push_back(-q);
            tets = convex_hull_s3(sym);
        }
        cache.push_back(std::make_unique<S3Triangulation>(make_symmetric_triangulation(nodes, tets)));
    }
    while (static_cast<int>(cache.size()) <= level)
        cache.push_back(std::make_unique<S3Triangulation>(refine_triangulation(*cache.back())));
    return *cache[static_cast<size_t>(level)];
}

SamplingSet<So3> so3_points(const S3Triangulation& tri) {
    SamplingSet<So3> s;
    s.level = tri.level;
    s.tag = "so3-mesh";
    const int m = tri.so3_index.empty() ? 0 : *std::max_element(tri.so3_index.begin(), tri.so3_index.end()) + 1;
    s.points.resize(static_cast<size_t>(m));
    std::vector<char> set(static_cast<size_t>(m), 0);
    for (size_t v = 0; v < tri.verts.size(); ++v) {
        const int k = tri.so3_index[v];
        if (!set[k]) {
            s.points[k] = Rotation(tri.verts[v]);
            set[k] = 1;
        }
    }
    return s;
}

SamplingSet<So3> so3_base_mesh() { return so3_points(base_triangulation()); }

SamplingSet<So3> refine_so3_mesh(const S3Triangulation& tri, int levels) {
    if (levels < 1) throw EslError(ErrorCode::InvalidArgument, "levels must be >= 1");
    S3Triangulation t = refine_triangulation(tri);
    for (int l = 1; l < levels; ++l) t = refine_triangulation(t);
    return so3_points(t);
}

SamplingSet<So3> so3_mesh(int level) { return so3_points(so3_triangulation(level)); }

std::vector<double> nearest_neighbour_distances(const std::vector<Rotation>& pts) {
    const int n = static_cast<int>(pts.size());
    std::vector<double> out(static_cast<size_t>(n), 0.0);
    if (n < 2) return out;
    // Both signs of every quaternion go into a uniform 4D bucket grid.
    std::vector<V4> sym(2 * static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        sym[i] = pts[i].q();
        sym[i + n] = -pts[i].q();
    }
    const double h = 1.6 * std::cbrt(2.0 * std::numbers::pi * std::numbers::pi / (2.0 * n));
    const int m = static_cast<int>(std::ceil(2.0 / h)) + 1;
    auto cell = [&](const V4& x, int k) { return std::clamp(static_cast<int>(std::floor((x[k] + 1.0) / h)), 0, m - 1); };
    auto key = [&](int a, int b, int c, int d) {
        return ((static_cast<std::int64_t>(a) * m + b) * m + c) * m + d;
    };
    std::vector<std::pair<std::int64_t, int>> keyed(sym.size());
    for (size_t i = 0; i < sym.size(); ++i)
        keyed[i] = {key(cell(sym[i], 0), cell(sym[i], 1), cell(sym[i], 2), cell(sym[i], 3)), static_cast<int>(i)};
    std::sort(keyed.begin(), keyed.end());

#pragma omp parallel for schedule(dynamic, 256)
    for (int i = 0; i < n; ++i) {
        const V4& x = sym[i];
        const int c0 = cell(x, 0), c1 = cell(x, 1), c2 = cell(x, 2), c3 = cell(x, 3);
        double best = 1e300;
        for (int R = 1; R <= m; ++R) {
            for (int a = std::max(0, c0 - R); a <= std::min(m - 1, c0 + R); ++a)
                for (int b = std::max(0, c1 - R); b <= std::min(m - 1, c1 + R); ++b)
                    for (int c = std::max(0, c2 - R); c <= std::min(m - 1, c2 + R); ++c)
                        for (int d = std::max(0, c3 - R); d <= std::min(m - 1, c3 + R); ++d) {
                            const std::int64_t k = key(a, b, c, d);
                            auto it = std::lower_bound(keyed.begin(), keyed.end(), std::make_pair(k, -1));
                            for (; it != keyed.end() && it->first == k; ++it) {
                                const int j = it->second;
                                if (j == i || j == i + n) continue;
                                best = std::min(best, (sym[j] - x).squaredNorm());
                            }
                        }
            // Every point closer than R h lies in the searched block.
            if (best <= (R * h) * (R * h)) break;
        }
        const double chord = std::sqrt(best);
        out[i] = 4.0 * std::asin(std::min(1.0, 0.5 * chord));
    }
    return out;
}

SpacingStats spacing_stats(const std::vector<double>& d) {
    SpacingStats s;
    if (d.empty()) return s;
    double sum = 0.0, sq = 0.0;
    s.min = d[0];
    s.max = d[0];
    for (double x : d) {
        sum += x;
        sq += x * x;
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
    }
    s.mean = sum / d.size();
    s.std = std::sqrt(std::max(0.0, sq / d.size() - s.mean * s.mean));
    return s;
}

}  // namespace esl
