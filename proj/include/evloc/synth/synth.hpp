#pragma once

#include <cstdint>
#include <vector>

#include "evloc/core/types.hpp"
#include "evloc/events/events.hpp"

namespace evloc::synth {

enum class SceneKind { Ramp, Step, Texture };

/// Analytically moving intensity scene. The scene is a periodic log-intensity
/// texture translated at constant velocity; intensities stay in [0.1, 1.0]
/// so the log is always defined.
///
/// Ramp is linear in log-intensity along x, which keeps the per-pixel event
/// rate constant under constant velocity (the property the temporal-median
/// identity tests rely on). Ramp and step textures are padded by the motion
/// span so the periodic seam is never sampled during [0, duration].
struct SceneSpec {
    SceneKind kind = SceneKind::Ramp;
    std::size_t width = 64;
    std::size_t height = 64;
    double vx = 10.0;  // pixels / second
    double vy = 0.0;
    double contrast = 0.2;  // threshold C, log-intensity units
    double duration = 1.0;  // seconds
    std::uint64_t seed = 0;
};

/// Periodic log-intensity texture with bilinear sampling.
class Scene {
public:
    explicit Scene(const SceneSpec& spec);

    /// Scene over an explicit log-intensity texture (periodic); spec supplies
    /// frame size, motion, contrast and duration.
    Scene(const SceneSpec& spec, std::vector<double> log_texture,
          std::size_t tex_width, std::size_t tex_height);

    const SceneSpec& spec() const { return spec_; }

    /// Log intensity at frame pixel (x, y) at time t.
    double log_intensity(double x, double y, double t) const;

    std::size_t tex_width() const { return tex_w_; }
    std::size_t tex_height() const { return tex_h_; }
    double texel(std::size_t ty, std::size_t tx) const {
        return tex_[ty * tex_w_ + tx];
    }

private:
    SceneSpec spec_;
    std::size_t tex_w_ = 0, tex_h_ = 0;
    double off_x_ = 0.0, off_y_ = 0.0;  // keeps sampled positions >= 0
    std::vector<double> tex_;           // log intensities
};

/// Intensity frame at time t (deterministic given spec and t).
/// Throws core::UsageError when t is outside [0, duration].
core::FrameImage render_frame(const SceneSpec& spec, double t);

/// Per-pixel residual-accumulator event generation: the scene is advanced in
/// `substeps` equal steps, the log-intensity change per pixel accumulates,
/// and an event of polarity sign(residual) fires each time |residual|
/// reaches C, with its timestamp linearly interpolated inside the substep.
/// Output is sorted by time (ties keep pixel row-major order).
events::EventStream simulate_events(const SceneSpec& spec,
                                    std::size_t substeps);
events::EventStream simulate_events(const Scene& scene, std::size_t substeps);

}  // namespace evloc::synth
