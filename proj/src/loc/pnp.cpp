#include <Eigen/Dense>
#include <cmath>

#include "evloc/core/rng.hpp"
#include "evloc/loc/loc.hpp"

namespace evloc::loc {

using core::Rng;
using core::RuntimeError;

namespace {

struct DltHypothesis {
    Eigen::Matrix3d R;
    Eigen::Vector3d t;
};

Eigen::Matrix3d hat(const Eigen::Vector3d& w) {
    Eigen::Matrix3d m;
    m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    return m;
}

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w) {
    const double theta = w.norm();
    if (theta < 1e-12) return Eigen::Matrix3d::Identity() + hat(w);
    const Eigen::Matrix3d K = hat(w / theta);
    return Eigen::Matrix3d::Identity() + std::sin(theta) * K +
           (1.0 - std::cos(theta)) * K * K;
}

/// 6-point DLT for P = K[R|t], with Hartley normalization of both point
/// sets and an SVD projection onto the rotations.
std::optional<DltHypothesis> solve_dlt(
    const std::vector<Correspondence>& corr,
    const std::vector<std::uint32_t>& sample, const Intrinsics& K) {
    const std::size_t n = sample.size();

    Eigen::Vector2d mean2 = Eigen::Vector2d::Zero();
    Eigen::Vector3d mean3 = Eigen::Vector3d::Zero();
    for (auto i : sample) {
        mean2 += Eigen::Vector2d(corr[i].pixel[0], corr[i].pixel[1]);
        mean3 += Eigen::Vector3d(corr[i].point[0], corr[i].point[1],
                                 corr[i].point[2]);
    }
    mean2 /= static_cast<double>(n);
    mean3 /= static_cast<double>(n);
    double scale2 = 0.0, scale3 = 0.0;
    for (auto i : sample) {
        scale2 += (Eigen::Vector2d(corr[i].pixel[0], corr[i].pixel[1]) - mean2)
                      .norm();
        scale3 += (Eigen::Vector3d(corr[i].point[0], corr[i].point[1],
                                   corr[i].point[2]) -
                   mean3)
                      .norm();
    }
    scale2 = scale2 > 1e-12 ? std::sqrt(2.0) * static_cast<double>(n) / scale2
                            : 1.0;
    scale3 = scale3 > 1e-12 ? std::sqrt(3.0) * static_cast<double>(n) / scale3
                            : 1.0;

    Eigen::Matrix3d T2 = Eigen::Matrix3d::Identity();
    T2(0, 0) = T2(1, 1) = scale2;
    T2(0, 2) = -scale2 * mean2.x();
    T2(1, 2) = -scale2 * mean2.y();
    Eigen::Matrix4d T3 = Eigen::Matrix4d::Identity();
    T3(0, 0) = T3(1, 1) = T3(2, 2) = scale3;
    T3.block<3, 1>(0, 3) = -scale3 * mean3;

    Eigen::MatrixXd A(2 * n, 12);
    for (std::size_t row = 0; row < n; ++row) {
        const auto& c = corr[sample[row]];
        const Eigen::Vector4d X =
            T3 * Eigen::Vector4d(c.point[0], c.point[1], c.point[2], 1.0);
        const double u = scale2 * (c.pixel[0] - mean2.x());
        const double v = scale2 * (c.pixel[1] - mean2.y());
        A.row(2 * row) << X(0), X(1), X(2), X(3), 0, 0, 0, 0, -u * X(0),
            -u * X(1), -u * X(2), -u * X(3);
        A.row(2 * row + 1) << 0, 0, 0, 0, X(0), X(1), X(2), X(3), -v * X(0),
            -v * X(1), -v * X(2), -v * X(3);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinV);
    const Eigen::VectorXd p = svd.matrixV().col(11);
    Eigen::Matrix<double, 3, 4> Pn;
    Pn << p(0), p(1), p(2), p(3), p(4), p(5), p(6), p(7), p(8), p(9), p(10),
        p(11);
    Eigen::Matrix<double, 3, 4> P = T2.inverse() * Pn * T3;

    Eigen::Matrix3d Km;
    Km << K.fx, 0, K.cx, 0, K.fy, K.cy, 0, 0, 1;
    Eigen::Matrix<double, 3, 4> Rt = Km.inverse() * P;

    // Fix the projective sign so sampled points sit in front of the camera.
    double depth_sign = 0.0;
    for (auto i : sample) {
        const Eigen::Vector4d X(corr[i].point[0], corr[i].point[1],
                                corr[i].point[2], 1.0);
        depth_sign += (Rt.row(2) * X).value();
    }
    if (depth_sign < 0.0) Rt = -Rt;

    const Eigen::Matrix3d M = Rt.block<3, 3>(0, 0);
    Eigen::JacobiSVD<Eigen::Matrix3d> msvd(
        M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double scale = msvd.singularValues().mean();
    if (scale < 1e-12) return std::nullopt;
    Eigen::Matrix3d R = msvd.matrixU() * msvd.matrixV().transpose();
    if (R.determinant() < 0.0) {
        Eigen::Matrix3d U = msvd.matrixU();
        U.col(2) *= -1.0;
        R = U * msvd.matrixV().transpose();
    }
    DltHypothesis h;
    h.R = R;
    h.t = Rt.col(3) / scale;
    return h;
}

double reprojection_error(const Eigen::Matrix3d& R, const Eigen::Vector3d& t,
                          const Intrinsics& K, const Correspondence& c) {
    const Eigen::Vector3d p =
        R * Eigen::Vector3d(c.point[0], c.point[1], c.point[2]) + t;
    if (p.z() <= 1e-9) return 1e18;
    const double du = K.fx * p.x() / p.z() + K.cx - c.pixel[0];
    const double dv = K.fy * p.y() / p.z() + K.cy - c.pixel[1];
    return std::sqrt(du * du + dv * dv);
}

/// Gauss-Newton on (so3 increment, t) minimizing squared pixel residuals.
void refine(Eigen::Matrix3d& R, Eigen::Vector3d& t,
            const std::vector<Correspondence>& corr,
            const std::vector<std::uint32_t>& inliers, const Intrinsics& K,
            std::size_t steps) {
    for (std::size_t step = 0; step < steps; ++step) {
        Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
        Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
        for (auto i : inliers) {
            const auto& c = corr[i];
            const Eigen::Vector3d X(c.point[0], c.point[1], c.point[2]);
            const Eigen::Vector3d p = R * X + t;
            if (p.z() <= 1e-9) continue;
            const double iz = 1.0 / p.z();
            const Eigen::Vector2d r(K.fx * p.x() * iz + K.cx - c.pixel[0],
                                    K.fy * p.y() * iz + K.cy - c.pixel[1]);
            Eigen::Matrix<double, 2, 3> J_p;
            J_p << K.fx * iz, 0.0, -K.fx * p.x() * iz * iz, 0.0, K.fy * iz,
                -K.fy * p.y() * iz * iz;
            Eigen::Matrix<double, 3, 6> J_x;
            J_x.block<3, 3>(0, 0) = -hat(p);  // d p / d omega (left update)
            J_x.block<3, 3>(0, 3) = Eigen::Matrix3d::Identity();
            const Eigen::Matrix<double, 2, 6> J = J_p * J_x;
            H += J.transpose() * J;
            g += J.transpose() * r;
        }
        const Eigen::Matrix<double, 6, 1> delta =
            H.ldlt().solve(-g);
        if (!delta.allFinite()) break;
        R = exp_so3(delta.head<3>()) * R;
        t += delta.tail<3>();
        // Re-orthonormalize drift from the exponential update.
        Eigen::JacobiSVD<Eigen::Matrix3d> svd(
            R, Eigen::ComputeFullU | Eigen::ComputeFullV);
        R = svd.matrixU() * svd.matrixV().transpose();
        if (delta.norm() < 1e-14) break;
    }
}

}  // namespace

PnpResult pnp_ransac(const std::vector<Correspondence>& correspondences,
                     const Intrinsics& K, const RansacConfig& cfg) {
    if (correspondences.size() < 6)
        throw RuntimeError("PnP needs at least 6 correspondences");
    Rng rng(Rng::derive(cfg.seed, "loc.ransac"));

    std::size_t best_count = 0;
    double best_sse = 1e30;
    DltHypothesis best{};
    bool have_best = false;
    std::vector<std::uint32_t> sample(6);

    for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
        // Sample 6 distinct indices.
        for (std::size_t j = 0; j < 6; ++j) {
            for (;;) {
                const auto idx = static_cast<std::uint32_t>(
                    rng.next_below(correspondences.size()));
                bool dup = false;
                for (std::size_t k = 0; k < j; ++k)
                    if (sample[k] == idx) dup = true;
                if (!dup) {
                    sample[j] = idx;
                    break;
                }
            }
        }
        const auto hyp = solve_dlt(correspondences, sample, K);
        if (!hyp) continue;
        std::size_t count = 0;
        double sse = 0.0;
        for (const auto& c : correspondences) {
            const double err = reprojection_error(hyp->R, hyp->t, K, c);
            if (err < cfg.inlier_px) {
                ++count;
                sse += err * err;
            }
        }
        if (count > best_count || (count == best_count && sse < best_sse)) {
            best_count = count;
            best_sse = sse;
            best = *hyp;
            have_best = true;
        }
    }
    if (!have_best || best_count < 6)
        throw RuntimeError("no PnP hypothesis reached 6 inliers");

    PnpResult result;
    for (std::uint32_t i = 0; i < correspondences.size(); ++i)
        if (reprojection_error(best.R, best.t, K, correspondences[i]) <
            cfg.inlier_px)
            result.inliers.push_back(i);
    refine(best.R, best.t, correspondences, result.inliers, K,
           cfg.refine_steps);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) result.pose.R[r * 3 + c] = best.R(r, c);
    result.pose.t = {best.t.x(), best.t.y(), best.t.z()};
    return result;
}

}  // namespace evloc::loc
