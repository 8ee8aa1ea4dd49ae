#include "esl/manifold.hpp"

#include <algorithm>

namespace esl {

Eigen::Vector4d canonical_sign(const Eigen::Vector4d& q) {
    for (int i = 0; i < 4; ++i) {
        if (q[i] > 0.0) return q;
        if (q[i] < 0.0) return -q;
    }
    return q;
}

Rotation::Rotation(double w, double x, double y, double z) {
    Eigen::Vector4d q(w, x, y, z);
    const double n = q.norm();
    if (!std::isfinite(n) || n == 0.0) throw EslError(ErrorCode::NonFinite, "quaternion norm");
    q_ = canonical_sign(q / n);
}

Eigen::Vector4d quat_mul(const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
    return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
            a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
            a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
            a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

Rotation operator*(const Rotation& a, const Rotation& b) { return Rotation(quat_mul(a.q_, b.q_)); }

Eigen::Matrix3d Rotation::matrix() const {
    const double w = q_[0], x = q_[1], y = q_[2], z = q_[3];
    Eigen::Matrix3d R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

Rotation Rotation::from_matrix(const Eigen::Matrix3d& R) {
    // Shepperd: pivot on the largest diagonal combination.
    const double t = R.trace();
    Eigen::Vector4d q;
    if (t >= R(0, 0) && t >= R(1, 1) && t >= R(2, 2)) {
        const double s = std::sqrt(1.0 + t) * 2.0;
        q << 0.25 * s, (R(2, 1) - R(1, 2)) / s, (R(0, 2) - R(2, 0)) / s, (R(1, 0) - R(0, 1)) / s;
    } else if (R(0, 0) >= R(1, 1) && R(0, 0) >= R(2, 2)) {
        const double s = std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2)) * 2.0;
        q << (R(2, 1) - R(1, 2)) / s, 0.25 * s, (R(0, 1) + R(1, 0)) / s, (R(0, 2) + R(2, 0)) / s;
    } else if (R(1, 1) >= R(2, 2)) {
        const double s = std::sqrt(1.0 + R(1, 1) - R(0, 0) - R(2, 2)) * 2.0;
        q << (R(0, 2) - R(2, 0)) / s, (R(0, 1) + R(1, 0)) / s, 0.25 * s, (R(1, 2) + R(2, 1)) / s;
    } else {
        const double s = std::sqrt(1.0 + R(2, 2) - R(0, 0) - R(1, 1)) * 2.0;
        q << (R(1, 0) - R(0, 1)) / s, (R(0, 2) + R(2, 0)) / s, (R(1, 2) + R(2, 1)) / s, 0.25 * s;
    }
    return Rotation(q);
}

Rotation Rotation::axis_angle(const Eigen::Vector3d& axis, double angle) {
    return so3_Exp(axis.normalized() * angle);
}

Rotation Rotation::random(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Vector4d q;
    do {
        for (int i = 0; i < 4; ++i) q[i] = n(rng);
    } while (q.norm() < 1e-12);
    return Rotation(q);
}

Rotation so3_Exp(const Eigen::Vector3d& v) {
    const double th = v.norm();
    double c, s;  // cos(th/2), sin(th/2)/th
    if (th < kSmallAngle) {
        c = 1.0 - th * th / 8.0;
        s = 0.5 - th * th / 48.0;
    } else {
        c = std::cos(0.5 * th);
        s = std::sin(0.5 * th) / th;
    }
    return Rotation(c, s * v[0], s * v[1], s * v[2]);
}

Eigen::Vector3d so3_Log(const Rotation& r) {
    const Eigen::Vector4d& q = r.q();
    const Eigen::Vector3d u = q.tail<3>();
    const double sn = u.norm();
    const double w = q[0];  // >= 0 by canonical sign
    const double th = 2.0 * std::atan2(sn, w);
    if (std::numbers::pi - th < kAntipodalTol)
        throw EslError(ErrorCode::AntipodalPoint, "log at the cut locus");
    if (sn < kSmallAngle) return u * (2.0 / w) * (1.0 - sn * sn / (3.0 * w * w));
    return u * (th / sn);
}

Rotation so3_exp(const Rotation& base, const Eigen::Vector3d& v) { return base * so3_Exp(v); }

Eigen::Vector3d so3_log(const Rotation& base, const Rotation& target) {
    return so3_Log(Rotation(quat_mul(base.inverse().q(), target.q())));
}

double so3_distance(const Rotation& a, const Rotation& b) {
    const Eigen::Vector4d rel = quat_mul(a.inverse().q(), b.q());
    return 2.0 * std::atan2(rel.tail<3>().norm(), std::abs(rel[0]));
}

double interval_exp(double base, double v) {
    const double r = base + v;
    if (!(r > 0.0 && r < 1.0)) throw EslError(ErrorCode::OutOfDomain, "interval exp left (0,1)");
    return r;
}

double interval_log(double base, double target) { return target - base; }
double interval_distance(double a, double b) { return std::abs(a - b); }

double unit_ball_volume(int d) {
    switch (d) {
        case 1: return kOmega1;
        case 2: return kOmega2;
        case 3: return kOmega3;
        default: return std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
    }
}

BilinearForm::BilinearForm(Eigen::MatrixXd mat) : m(std::move(mat)) {
    if (m.rows() != m.cols()) throw EslError(ErrorCode::InvalidArgument, "bilinear form must be square");
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
        throw EslError(ErrorCode::InvalidArgument, "bilinear form must be symmetric");
    m = 0.5 * (m + m.transpose());
}

Eigen::VectorXd BilinearForm::eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

double BilinearForm::det() const { return eigenvalues().prod(); }
double BilinearForm::lambda_min() const { return eigenvalues().minCoeff(); }
bool BilinearForm::positive_definite() const { return m.size() > 0 && lambda_min() > 0.0; }

}  // namespace esl
