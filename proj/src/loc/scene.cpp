#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>

#include "evloc/core/rng.hpp"
#include "evloc/core/serial.hpp"
#include "evloc/events/events.hpp"
#include "evloc/kernels/kernels.hpp"
#include "evloc/loc/loc.hpp"
#include "evloc/synth/synth.hpp"

namespace evloc::loc {

using core::FrameImage;
using core::Rng;
using core::RuntimeError;
using core::VoxelGrid;

namespace {

constexpr double kPi = 3.14159265358979323846;

Pose look_at(const std::array<double, 3>& center) {
    // Camera z looks at the origin, y points down-ish (world -z up).
    Eigen::Vector3d c(center[0], center[1], center[2]);
    Eigen::Vector3d forward = (-c).normalized();
    Eigen::Vector3d world_up(0.0, 0.0, 1.0);
    if (std::fabs(forward.dot(world_up)) > 0.99)
        world_up = Eigen::Vector3d(0.0, 1.0, 0.0);
    const Eigen::Vector3d right = forward.cross(world_up).normalized();
    const Eigen::Vector3d down = forward.cross(right);
    Eigen::Matrix3d R;
    R.row(0) = right;
    R.row(1) = down;
    R.row(2) = forward;
    const Eigen::Vector3d t = -R * c;
    Pose pose;
    for (int r = 0; r < 3; ++r)
        for (int col = 0; col < 3; ++col) pose.R[r * 3 + col] = R(r, col);
    pose.t = {t.x(), t.y(), t.z()};
    return pose;
}

std::vector<std::uint32_t> visible_points(
    const Pose& pose, const Intrinsics& K,
    const std::vector<std::array<double, 3>>& points,
    std::vector<std::array<double, 2>>* keypoints = nullptr) {
    std::vector<std::uint32_t> vis;
    for (std::uint32_t i = 0; i < points.size(); ++i) {
        const auto px = project(pose, K, points[i]);
        if (!px) continue;
        if ((*px)[0] < 0.0 || (*px)[0] >= static_cast<double>(K.width) ||
            (*px)[1] < 0.0 || (*px)[1] >= static_cast<double>(K.height))
            continue;
        vis.push_back(i);
        if (keypoints) keypoints->push_back(*px);
    }
    return vis;
}

bool points_degenerate(const std::vector<std::array<double, 3>>& points) {
    if (points.size() < 6) return true;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& p : points) mean += Eigen::Vector3d(p[0], p[1], p[2]);
    mean /= static_cast<double>(points.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : points) {
        const Eigen::Vector3d d = Eigen::Vector3d(p[0], p[1], p[2]) - mean;
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    return eig.eigenvalues()(0) < 1e-9 * eig.eigenvalues()(2);
}

/// Deterministic point brightness used by the splat renderer.
double point_intensity(std::uint32_t index, std::uint64_t seed) {
    Rng rng(Rng::derive(seed, "loc.point_intensity", index));
    return 0.4 + 0.6 * rng.next_double();
}

/// Splats every visible point as a small Gaussian blob on a dark background;
/// this stands in for the reconstructed view of the scene from that pose.
FrameImage render_splat(const SceneMap& map, const Pose& pose,
                        std::uint64_t seed) {
    const Intrinsics& K = map.intrinsics;
    std::vector<double> acc(K.width * K.height, 0.1);
    std::vector<std::array<double, 2>> pixels;
    const auto vis = visible_points(pose, K, map.points, &pixels);
    const double sigma = 2.0;
    const int radius = 5;
    for (std::size_t j = 0; j < vis.size(); ++j) {
        const double amp = point_intensity(vis[j], seed);
        const int px = static_cast<int>(std::floor(pixels[j][0]));
        const int py = static_cast<int>(std::floor(pixels[j][1]));
        for (int dy = -radius; dy <= radius; ++dy) {
            for (int dx = -radius; dx <= radius; ++dx) {
                const int x = px + dx, y = py + dy;
                if (x < 0 || y < 0 || x >= static_cast<int>(K.width) ||
                    y >= static_cast<int>(K.height))
                    continue;
                const double ddx = pixels[j][0] - static_cast<double>(x);
                const double ddy = pixels[j][1] - static_cast<double>(y);
                acc[static_cast<std::size_t>(y) * K.width + x] +=
                    amp * std::exp(-(ddx * ddx + ddy * ddy) /
                                   (2.0 * sigma * sigma));
            }
        }
    }
    FrameImage image(K.height, K.width);
    for (std::size_t i = 0; i < acc.size(); ++i)
        image.data()[i] = static_cast<float>(std::clamp(acc[i], 0.1, 1.0));
    return image;
}

/// Event-camera view of a rendered frame: translate the frame a little and
/// voxelize the resulting stream, mirroring how real query voxels arise.
VoxelGrid eventize(const FrameImage& frame, std::uint64_t seed,
                   std::size_t bins) {
    synth::SceneSpec motion;
    motion.width = frame.width();
    motion.height = frame.height();
    Rng rng(Rng::derive(seed, "loc.eventize"));
    const double angle = rng.uniform(0.0, 2.0 * kPi);
    motion.vx = 6.0 * std::cos(angle);
    motion.vy = 6.0 * std::sin(angle);
    motion.contrast = 0.1;
    motion.duration = 1.0;
    motion.seed = seed;
    std::vector<double> log_tex(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i)
        log_tex[i] = std::log(static_cast<double>(frame.data()[i]));
    synth::Scene scene(motion, std::move(log_tex), frame.width(),
                       frame.height());
    return events::voxelize(synth::simulate_events(scene, 24), bins);
}

}  // namespace

FrameImage voxel_intensity_image(const VoxelGrid& grid) {
    std::vector<double> sums(grid.height() * grid.width());
    kernels::active().temporal_abs_sum(grid.data(), sums.data(), grid.bins(),
                                       grid.height(), grid.width());
    double max_sum = 0.0;
    for (double s : sums) max_sum = std::max(max_sum, s);
    FrameImage image(grid.height(), grid.width());
    if (max_sum == 0.0) return image;
    for (std::size_t i = 0; i < sums.size(); ++i)
        image.data()[i] = static_cast<float>(sums[i] / max_sum);
    return image;
}

SyntheticScene build_synthetic_scene(std::uint64_t seed, std::size_t n_points,
                                     std::size_t n_refs, std::size_t n_queries,
                                     const Intrinsics& intrinsics) {
    if (n_points < 6) throw RuntimeError("need at least 6 points");
    constexpr std::size_t kVoxelBins = 8;

    for (std::uint64_t attempt = 0; attempt < 32; ++attempt) {
        SyntheticScene scene;
        scene.map.intrinsics = intrinsics;
        Rng prng(Rng::derive(seed, "loc.points", attempt));
        scene.map.points.resize(n_points);
        for (auto& p : scene.map.points)
            p = {prng.uniform(-0.5, 0.5), prng.uniform(-0.5, 0.5),
                 prng.uniform(-0.5, 0.5)};
        if (points_degenerate(scene.map.points)) continue;

        Rng trng(Rng::derive(seed, "loc.trajectory", attempt));
        bool ok = true;
        for (std::size_t i = 0; i < n_refs && ok; ++i) {
            const double theta = 1.7 * kPi * static_cast<double>(i) /
                                     static_cast<double>(n_refs) +
                                 trng.uniform(-0.02, 0.02);
            const double radius = 2.3 + trng.uniform(-0.1, 0.1);
            const std::array<double, 3> center = {
                radius * std::cos(theta), radius * std::sin(theta),
                0.35 * std::sin(2.0 * theta) + trng.uniform(-0.05, 0.05)};
            Reference ref;
            ref.pose = look_at(center);
            ref.visibility =
                visible_points(ref.pose, intrinsics, scene.map.points,
                               &ref.keypoints);
            if (ref.visibility.size() < 6) {
                ok = false;
                break;
            }
            scene.map.references.push_back(std::move(ref));
        }
        if (!ok) continue;

        Rng qrng(Rng::derive(seed, "loc.queries", attempt));
        for (std::size_t i = 0; i < n_queries && ok; ++i) {
            const double theta = qrng.uniform(0.0, 1.7 * kPi);
            const double radius = 2.3 + qrng.uniform(-0.12, 0.12);
            const std::array<double, 3> center = {
                radius * std::cos(theta), radius * std::sin(theta),
                0.35 * std::sin(2.0 * theta) + qrng.uniform(-0.06, 0.06)};
            Query query;
            query.pose = look_at(center);
            query.visible =
                visible_points(query.pose, intrinsics, scene.map.points);
            if (query.visible.size() < 6) {
                ok = false;
                break;
            }
            scene.queries.push_back(std::move(query));
        }
        if (!ok) continue;

        // Sensor-side artifacts: descriptors come from the event-voxel view
        // of each pose, the same modality for references and queries.
        for (std::size_t i = 0; i < scene.map.references.size(); ++i) {
            auto& ref = scene.map.references[i];
            const VoxelGrid voxel =
                eventize(render_splat(scene.map, ref.pose, seed),
                         Rng::derive(seed, "loc.refmotion", i), kVoxelBins);
            ref.descriptor = global_descriptor(voxel_intensity_image(voxel));
        }
        for (std::size_t i = 0; i < scene.queries.size(); ++i) {
            auto& query = scene.queries[i];
            query.voxel =
                eventize(render_splat(scene.map, query.pose, seed),
                         Rng::derive(seed, "loc.querymotion", i), kVoxelBins);
        }
        return scene;
    }
    throw RuntimeError("could not build a non-degenerate scene");
}

void save_map(std::ostream& os, const SceneMap& map) {
    core::write_magic(os, "MAP1");
    core::write_le<std::uint32_t>(
        os, static_cast<std::uint32_t>(map.intrinsics.width));
    core::write_le<std::uint32_t>(
        os, static_cast<std::uint32_t>(map.intrinsics.height));
    core::write_le<double>(os, map.intrinsics.fx);
    core::write_le<double>(os, map.intrinsics.fy);
    core::write_le<double>(os, map.intrinsics.cx);
    core::write_le<double>(os, map.intrinsics.cy);
    core::write_le<std::uint32_t>(os,
                                  static_cast<std::uint32_t>(map.points.size()));
    for (const auto& p : map.points)
        for (double v : p) core::write_le<double>(os, v);
    core::write_le<std::uint32_t>(
        os, static_cast<std::uint32_t>(map.references.size()));
    for (const auto& ref : map.references) {
        for (double v : ref.pose.R) core::write_le<double>(os, v);
        for (double v : ref.pose.t) core::write_le<double>(os, v);
        core::write_le<std::uint32_t>(
            os, static_cast<std::uint32_t>(ref.descriptor.values.size()));
        for (double v : ref.descriptor.values) core::write_le<double>(os, v);
        core::write_le<std::uint32_t>(
            os, static_cast<std::uint32_t>(ref.keypoints.size()));
        for (std::size_t i = 0; i < ref.keypoints.size(); ++i) {
            core::write_le<std::uint32_t>(os, ref.visibility[i]);
            core::write_le<double>(os, ref.keypoints[i][0]);
            core::write_le<double>(os, ref.keypoints[i][1]);
        }
    }
}

SceneMap load_map(std::istream& is) {
    core::expect_magic(is, "MAP1");
    SceneMap map;
    map.intrinsics.width = core::read_le<std::uint32_t>(is);
    map.intrinsics.height = core::read_le<std::uint32_t>(is);
    map.intrinsics.fx = core::read_le<double>(is);
    map.intrinsics.fy = core::read_le<double>(is);
    map.intrinsics.cx = core::read_le<double>(is);
    map.intrinsics.cy = core::read_le<double>(is);
    const auto n_points = core::read_le<std::uint32_t>(is);
    map.points.resize(n_points);
    for (auto& p : map.points)
        for (double& v : p) v = core::read_le<double>(is);
    const auto n_refs = core::read_le<std::uint32_t>(is);
    map.references.resize(n_refs);
    for (auto& ref : map.references) {
        for (double& v : ref.pose.R) v = core::read_le<double>(is);
        for (double& v : ref.pose.t) v = core::read_le<double>(is);
        const auto n_desc = core::read_le<std::uint32_t>(is);
        ref.descriptor.values.resize(n_desc);
        for (double& v : ref.descriptor.values) v = core::read_le<double>(is);
        const auto n_kp = core::read_le<std::uint32_t>(is);
        ref.visibility.resize(n_kp);
        ref.keypoints.resize(n_kp);
        for (std::size_t i = 0; i < n_kp; ++i) {
            ref.visibility[i] = core::read_le<std::uint32_t>(is);
            if (ref.visibility[i] >= map.points.size())
                throw core::FormatError("visibility index out of range");
            ref.keypoints[i][0] = core::read_le<double>(is);
            ref.keypoints[i][1] = core::read_le<double>(is);
        }
    }
    return map;
}

void save_map(const std::string& path, const SceneMap& map) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw RuntimeError("cannot open for writing: " + path);
    save_map(os, map);
}

SceneMap load_map(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw RuntimeError("cannot open for reading: " + path);
    return load_map(is);
}

}  // namespace evloc::loc
