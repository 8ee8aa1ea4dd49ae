#include "esl/metrics.hpp"

#include <cmath>

#include "esl/error.hpp"

namespace esl {

namespace {

const Eigen::Matrix3d kJ = Eigen::Vector3d(1.0, 1.0, -1.0).asDiagonal();

// Proper rotation O maximising tr(O^T M).
bool kabsch(const Eigen::Matrix3d& M, Eigen::Matrix3d& O) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d s = svd.singularValues();
    if (!(s[0] > 0.0) || s[1] <= 1e-10 * s[0]) return false;
    Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) D(2, 2) = -1.0;
    O = svd.matrixU() * D * svd.matrixV().transpose();
    return true;
}

}  // namespace

Rotation AlignmentResult::apply(const Rotation& est) const {
    Eigen::Matrix3d R = est.matrix();
    if (reflected) R = kJ * R * kJ;
    return Rotation::from_matrix(side == GaugeSide::Right ? Eigen::Matrix3d(R * transform)
                                                          : Eigen::Matrix3d(transform * R));
}

AlignmentResult align_rotations(const std::vector<Rotation>& est, const std::vector<Rotation>& gt, GaugeSide side) {
    if (est.empty() || est.size() != gt.size())
        throw EslError(ErrorCode::InvalidArgument, "alignment needs equal nonempty lists");
    // Right: gt_i ~ E_i O, maximise tr(O^T sum E_i^T G_i). Left: gt_i ~ O E_i,
    // maximise tr(O^T sum G_i E_i^T). E_i is est_i or its mirror J est_i J.
    Eigen::Matrix3d M0 = Eigen::Matrix3d::Zero(), M1 = Eigen::Matrix3d::Zero();
    for (size_t i = 0; i < est.size(); ++i) {
        const Eigen::Matrix3d E = est[i].matrix(), G = gt[i].matrix(), Em = kJ * E * kJ;
        if (side == GaugeSide::Right) {
            M0 += E.transpose() * G;
            M1 += Em.transpose() * G;
        } else {
            M0 += G * E.transpose();
            M1 += G * Em.transpose();
        }
    }
    Eigen::Matrix3d O0, O1;
    const bool ok0 = kabsch(M0, O0), ok1 = kabsch(M1, O1);
    if (!ok0 && !ok1) throw EslError(ErrorCode::DegenerateAlignment, "cross-covariance is rank deficient");
    const double score0 = ok0 ? (O0.transpose() * M0).trace() : -1e300;
    const double score1 = ok1 ? (O1.transpose() * M1).trace() : -1e300;

    AlignmentResult res;
    res.side = side;
    res.reflected = score1 > score0 + 1e-12 * std::abs(score0);
    res.transform = res.reflected ? O1 : O0;
    res.aligned_errors.reserve(est.size());
    for (size_t i = 0; i < est.size(); ++i) res.aligned_errors.push_back(so3_distance(res.apply(est[i]), gt[i]));
    res.mean = mean_of(res.aligned_errors);
    res.std = std_of(res.aligned_errors);
    return res;
}

EulerZyz euler_zyz(const Rotation& r) {
    const Eigen::Matrix3d R = r.matrix();
    EulerZyz e;
    e.theta = std::atan2(std::hypot(R(0, 2), R(1, 2)), R(2, 2));
    if (e.theta < 1e-9) {
        // Only phi + psi is determined; put it all in phi.
        e.psi = 0.0;
        e.phi = std::atan2(R(1, 0), R(0, 0));
    } else if (std::numbers::pi - e.theta < 1e-9) {
        e.psi = 0.0;
        e.phi = std::atan2(-R(1, 0), -R(0, 0));
    } else {
        e.phi = std::atan2(R(1, 2), R(0, 2));
        e.psi = std::atan2(R(2, 1), -R(2, 0));
    }
    auto wrap = [](double a) { return a <= -std::numbers::pi ? a + 2.0 * std::numbers::pi : a; };
    e.phi = wrap(e.phi);
    e.psi = wrap(e.psi);
    return e;
}

Rotation compose_zyz(const EulerZyz& e) {
    const Eigen::Vector3d z = Eigen::Vector3d::UnitZ(), y = Eigen::Vector3d::UnitY();
    return Rotation::axis_angle(z, e.phi) * Rotation::axis_angle(y, e.theta) * Rotation::axis_angle(z, e.psi);
}

Eigen::VectorXd relion_like_weights(const Eigen::VectorXd& losses, double t) {
    if (!losses.allFinite()) throw EslError(ErrorCode::NonFinite, "losses");
    if (!(t > 0.0)) throw EslError(ErrorCode::InvalidArgument, "temperature must be > 0");
    const double m = losses.minCoeff();
    Eigen::VectorXd w = (-(losses.array() - m) / (2.0 * t)).exp();
    return w / w.sum();
}

double mean_of(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    double s = 0.0;
    for (double v : x) s += v;
    return s / x.size();
}

double std_of(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / x.size());
}

ErrorRow summarize(const RunRecord& run) {
    if (run.errors_rad.empty()) throw EslError(ErrorCode::EmptyRun, "no per-image results");
    ErrorRow r;
    r.n_samples = run.n_samples;
    r.eta = run.eta;
    std::vector<double> deg;
    for (double e : run.errors_rad) deg.push_back(rad2deg(e));
    r.mean_deg = mean_of(deg);
    r.std_deg = std_of(deg);
    std::vector<double> l0(run.l0.begin(), run.l0.end());
    r.mean_l0 = mean_of(l0);
    std::vector<double> w2;
    for (double e : run.w2_rad) w2.push_back(rad2deg(e));
    r.mean_w2_deg = mean_of(w2);
    return r;
}

std::vector<ErrorRow> summarize(const std::vector<RunRecord>& runs) {
    if (runs.empty()) throw EslError(ErrorCode::EmptyRun, "no runs");
    std::vector<ErrorRow> out;
    for (const auto& r : runs) out.push_back(summarize(r));
    return out;
}

}  // namespace esl
