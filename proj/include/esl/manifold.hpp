#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <concepts>
#include <numbers>
#include <random>

#include "esl/error.hpp"

namespace esl {

// Unit quaternion (w, x, y, z) with canonical sign, i.e. one representative
// per element of SO(3).
class Rotation {
public:
    Rotation() : q_(1.0, 0.0, 0.0, 0.0) {}
    Rotation(double w, double x, double y, double z);
    explicit Rotation(const Eigen::Vector4d& q) : Rotation(q[0], q[1], q[2], q[3]) {}

    static Rotation identity() { return {}; }
    static Rotation from_matrix(const Eigen::Matrix3d& R);
    static Rotation axis_angle(const Eigen::Vector3d& axis, double angle);
    static Rotation random(std::mt19937_64& rng);

    const Eigen::Vector4d& q() const { return q_; }
    double w() const { return q_[0]; }
    double x() const { return q_[1]; }
    double y() const { return q_[2]; }
    double z() const { return q_[3]; }

    Rotation inverse() const { return Rotation(q_[0], -q_[1], -q_[2], -q_[3]); }
    Eigen::Matrix3d matrix() const;
    Eigen::Vector3d apply(const Eigen::Vector3d& v) const { return matrix() * v; }

    friend Rotation operator*(const Rotation& a, const Rotation& b);

private:
    Eigen::Vector4d q_;
};

// Hamilton product without renormalisation or canonicalisation.
Eigen::Vector4d quat_mul(const Eigen::Vector4d& a, const Eigen::Vector4d& b);
Eigen::Vector4d canonical_sign(const Eigen::Vector4d& q);

// Group exponential / logarithm at the identity (axis-angle).
Rotation so3_Exp(const Eigen::Vector3d& v);
Eigen::Vector3d so3_Log(const Rotation& r);

// Left-trivialised Riemannian maps: exp_p(v) = p Exp(v), log_p(q) = Log(p^-1 q).
Rotation so3_exp(const Rotation& base, const Eigen::Vector3d& v);
Eigen::Vector3d so3_log(const Rotation& base, const Rotation& target);
double so3_distance(const Rotation& a, const Rotation& b);

double interval_exp(double base, double v);
double interval_log(double base, double target);
double interval_distance(double a, double b);

inline constexpr double kAntipodalTol = 1e-9;
inline constexpr double kSmallAngle = 1e-6;

// Volumes of the unit balls in R^d for d = 1, 2, 3.
inline constexpr double kOmega1 = 2.0;
inline constexpr double kOmega2 = std::numbers::pi;
inline constexpr double kOmega3 = 4.0 * std::numbers::pi / 3.0;
double unit_ball_volume(int d);

// Riemannian volume of SO(3) when the distance is the rotation angle:
// Haar density 2(1 - cos t)/t^2 in exponential coordinates integrates to 8 pi^2.
inline constexpr double kVolSo3 = 8.0 * std::numbers::pi * std::numbers::pi;
inline constexpr double kVolInterval = 1.0;

// Symmetric positive (semi)definite form in tangent coordinates.
struct BilinearForm {
    Eigen::MatrixXd m;

    BilinearForm() = default;
    explicit BilinearForm(Eigen::MatrixXd mat);
    static BilinearForm identity(int d) { return BilinearForm(Eigen::MatrixXd::Identity(d, d)); }

    int dim() const { return static_cast<int>(m.rows()); }
    Eigen::VectorXd eigenvalues() const;
    double det() const;
    double lambda_min() const;
    bool positive_definite() const;
    double operator()(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const { return u.dot(m * v); }
};

struct So3 {
    using Point = Rotation;
    using Tangent = Eigen::Vector3d;
    static constexpr int dim = 3;
    static constexpr double volume = kVolSo3;
    // Radius of the ball on which the squared distance is convex.
    static constexpr double convexity_radius = std::numbers::pi / 2.0;

    static Point exp(const Point& p, const Tangent& v) { return so3_exp(p, v); }
    static Tangent log(const Point& p, const Point& q) { return so3_log(p, q); }
    static double distance(const Point& a, const Point& b) { return so3_distance(a, b); }
};

struct UnitInterval {
    using Point = double;
    using Tangent = Eigen::Matrix<double, 1, 1>;
    static constexpr int dim = 1;
    static constexpr double volume = kVolInterval;
    static constexpr double convexity_radius = 1.0;

    static Point exp(const Point& p, const Tangent& v) { return interval_exp(p, v[0]); }
    static Tangent log(const Point& p, const Point& q) { return Tangent(interval_log(p, q)); }
    static double distance(const Point& a, const Point& b) { return interval_distance(a, b); }
};

template <class M>
concept Manifold = requires(const typename M::Point& p, const typename M::Tangent& v) {
    { M::exp(p, v) } -> std::convertible_to<typename M::Point>;
    { M::log(p, p) } -> std::convertible_to<typename M::Tangent>;
    { M::distance(p, p) } -> std::convertible_to<double>;
    { M::dim } -> std::convertible_to<int>;
    { M::volume } -> std::convertible_to<double>;
};

static_assert(Manifold<So3>);
static_assert(Manifold<UnitInterval>);

// Open ellipsoid {y : Q(log_p y, log_p y) < det(Q)^{1/d} rho^2}.
template <Manifold M>
struct EllipsoidSpec {
    typename M::Point center;
    BilinearForm form;
    double radius = 0.0;
};

template <Manifold M>
double ellipsoid_quadratic(const EllipsoidSpec<M>& e, const typename M::Point& y) {
    Eigen::VectorXd u = M::log(e.center, y);
    return e.form(u, u);
}

template <Manifold M>
bool ellipsoid_contains(const EllipsoidSpec<M>& e, const typename M::Point& y) {
    if (!e.form.positive_definite()) throw EslError(ErrorCode::NotPositiveDefinite, "ellipsoid form");
    const double d = static_cast<double>(M::dim);
    return ellipsoid_quadratic(e, y) < std::pow(e.form.det(), 1.0 / d) * e.radius * e.radius;
}

}  // namespace esl
