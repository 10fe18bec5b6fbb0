#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "evloc/core/types.hpp"

namespace evloc::loc {

/// Rigid world-to-camera pose: x_cam = R * X + t. R row-major, orthonormal
/// with det +1.
struct Pose {
    std::array<double, 9> R{1, 0, 0, 0, 1, 0, 0, 0, 1};
    std::array<double, 3> t{0, 0, 0};

    std::array<double, 3> camera_center() const;  // -R^T t
};

bool is_rotation(const std::array<double, 9>& R, double tol = 1e-9);

struct Intrinsics {
    double fx = 128.0, fy = 128.0, cx = 80.0, cy = 80.0;
    std::size_t width = 160, height = 160;
};

/// Pinhole projection; nullopt when the point is behind the camera.
std::optional<std::array<double, 2>> project(const Pose& pose,
                                             const Intrinsics& K,
                                             const std::array<double, 3>& X);

/// (translation error in scene units between camera centers,
///  rotation error in degrees, geodesic angle clamped to [0, 180]).
std::pair<double, double> pose_errors(const Pose& estimate, const Pose& truth);

struct GlobalDescriptor {
    std::vector<double> values;  // length 256
};

double descriptor_distance(const GlobalDescriptor& a, const GlobalDescriptor& b);

/// Grid-pooled surrogate for a learned global feature: 8x8 cells of pixel
/// mean and population standard deviation, L2-normalized, zero-padded to 256.
GlobalDescriptor global_descriptor(const core::FrameImage& image);

struct Reference {
    Pose pose;
    GlobalDescriptor descriptor;
    std::vector<std::array<double, 2>> keypoints;  // exact projections
    std::vector<std::uint32_t> visibility;         // indices into points
};

struct SceneMap {
    Intrinsics intrinsics;
    std::vector<std::array<double, 3>> points;
    std::vector<Reference> references;
};

/// Held-out query with ground truth, plus the synthetic sensor-side
/// artifacts used by the retrieval stage (voxel grid of the simulated events
/// observed from this pose).
struct Query {
    Pose pose;
    std::vector<std::uint32_t> visible;
    core::VoxelGrid voxel;
};

struct SyntheticScene {
    SceneMap map;
    std::vector<Query> queries;
};

/// Ground-truth scene builder: random points in a unit-scale box, reference
/// poses on a smooth orbit around it, keypoints as exact projections with
/// in-frame positive-depth visibility, and queries with ground-truth poses.
/// Every reference and query sees at least 6 points (resampled otherwise).
SyntheticScene build_synthetic_scene(std::uint64_t seed, std::size_t n_points,
                                     std::size_t n_refs, std::size_t n_queries,
                                     const Intrinsics& intrinsics);

/// Max-normalized temporal absolute accumulation, the image the surrogate
/// descriptor runs on.
core::FrameImage voxel_intensity_image(const core::VoxelGrid& grid);

/// Indices of the K nearest references by descriptor L2 distance, ascending,
/// ties broken by the smaller index. K > |references| returns all.
std::vector<std::size_t> retrieve_topk(const GlobalDescriptor& query,
                                       const SceneMap& map, std::size_t k);

struct MatchConfig {
    double noise_px = 0.0;
    double outlier_fraction = 0.0;
    std::uint64_t seed = 0;
};

struct Correspondence {
    std::array<double, 2> pixel;   // query-image observation
    std::array<double, 3> point;   // lifted 3D point
    std::uint32_t point_index = 0;
    bool outlier = false;
};

/// Ground-truth match oracle: 3D points visible from both the query and the
/// chosen reference, projected into the query with Gaussian pixel noise and
/// exactly llround(fraction * M) outliers replaced by uniform in-frame
/// pixels. Throws when fewer than 4 correspondences exist.
std::vector<Correspondence> match_and_lift(const Query& query,
                                           const Reference& reference,
                                           const SceneMap& map,
                                           const MatchConfig& cfg);

struct RansacConfig {
    std::size_t iterations = 1000;
    double inlier_px = 3.0;
    std::uint64_t seed = 0;
    std::size_t refine_steps = 10;
};

struct PnpResult {
    Pose pose;
    std::vector<std::uint32_t> inliers;  // indices into correspondences
};

/// RANSAC over 6-point DLT hypotheses scored by reprojection error, best
/// hypothesis refined with Gauss-Newton on its inliers. Deterministic given
/// the seed. Throws when no hypothesis reaches 6 inliers or fewer than 6
/// correspondences are supplied.
PnpResult pnp_ransac(const std::vector<Correspondence>& correspondences,
                     const Intrinsics& K, const RansacConfig& cfg);

struct QueryResult {
    std::size_t query_id = 0;
    double t_error = 0.0;
    double r_error = 0.0;
    bool correct = false;  // strict thresholds: t < 0.1 and R < 5 degrees
};

struct AccuracyReport {
    double median_t_error = 0.0;
    double median_r_error = 0.0;
    double accuracy = 0.0;
};

AccuracyReport accuracy_report(const std::vector<QueryResult>& results);

struct LocalizeConfig {
    std::size_t top_k = 3;
    MatchConfig match;
    RansacConfig ransac;
    bool protect_queries = false;  // sensor-level protect before descriptors
    std::size_t protect_kt = 13;
    std::size_t protect_ks = 23;
};

/// Full structure-based run over the held-out queries: retrieval on the
/// (optionally protected) query voxels, reference choice by shared-point
/// count among the top K, oracle matches, PnP-RANSAC, error metrics.
std::vector<QueryResult> localize_queries(const SyntheticScene& scene,
                                          const LocalizeConfig& cfg);

/// Results CSV: `query_id,t_err,r_err,correct`.
void write_results_csv(std::ostream& os,
                       const std::vector<QueryResult>& results);

// `MAP1` container: intrinsics, point cloud, references with pose
// (9 + 3 f64), descriptor, keypoints and visibility indices, little-endian.
void save_map(std::ostream& os, const SceneMap& map);
SceneMap load_map(std::istream& is);
void save_map(const std::string& path, const SceneMap& map);
SceneMap load_map(const std::string& path);

}  // namespace evloc::loc
