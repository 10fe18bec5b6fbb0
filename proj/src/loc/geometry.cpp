#include <Eigen/Dense>
#include <cmath>

#include "evloc/loc/loc.hpp"

namespace evloc::loc {

namespace {

Eigen::Matrix3d to_eigen(const std::array<double, 9>& R) {
    Eigen::Matrix3d m;
    m << R[0], R[1], R[2], R[3], R[4], R[5], R[6], R[7], R[8];
    return m;
}

}  // namespace

std::array<double, 3> Pose::camera_center() const {
    const Eigen::Matrix3d Rm = to_eigen(R);
    const Eigen::Vector3d tv(t[0], t[1], t[2]);
    const Eigen::Vector3d c = -Rm.transpose() * tv;
    return {c.x(), c.y(), c.z()};
}

bool is_rotation(const std::array<double, 9>& R, double tol) {
    const Eigen::Matrix3d Rm = to_eigen(R);
    const double dev =
        (Rm.transpose() * Rm - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    return dev < tol && Rm.determinant() > 0.0;
}

std::optional<std::array<double, 2>> project(const Pose& pose,
                                             const Intrinsics& K,
                                             const std::array<double, 3>& X) {
    const Eigen::Matrix3d Rm = to_eigen(pose.R);
    const Eigen::Vector3d p =
        Rm * Eigen::Vector3d(X[0], X[1], X[2]) +
        Eigen::Vector3d(pose.t[0], pose.t[1], pose.t[2]);
    if (p.z() <= 0.0) return std::nullopt;
    return std::array<double, 2>{K.fx * p.x() / p.z() + K.cx,
                                 K.fy * p.y() / p.z() + K.cy};
}

std::pair<double, double> pose_errors(const Pose& estimate, const Pose& truth) {
    if (!is_rotation(estimate.R) || !is_rotation(truth.R))
        throw core::RuntimeError("pose_errors needs valid rotations");
    const auto c1 = estimate.camera_center();
    const auto c2 = truth.camera_center();
    const double t_err = std::sqrt((c1[0] - c2[0]) * (c1[0] - c2[0]) +
                                   (c1[1] - c2[1]) * (c1[1] - c2[1]) +
                                   (c1[2] - c2[2]) * (c1[2] - c2[2]));
    const Eigen::Matrix3d rel =
        to_eigen(estimate.R).transpose() * to_eigen(truth.R);
    double c = (rel.trace() - 1.0) / 2.0;
    c = std::clamp(c, -1.0, 1.0);
    const double r_err = std::acos(c) * 180.0 / M_PI;
    return {t_err, r_err};
}

}  // namespace evloc::loc
