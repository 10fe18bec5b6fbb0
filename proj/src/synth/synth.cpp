#include "evloc/synth/synth.hpp"

#include <algorithm>
#include <cmath>

#include "evloc/core/rng.hpp"

namespace evloc::synth {

using core::FrameImage;
using core::Rng;
using core::UsageError;
using events::Event;
using events::EventStream;

namespace {

constexpr double kLogLo = -2.302585092994045684;  // log(0.1)
constexpr double kLogHi = 0.0;                    // log(1.0)

}  // namespace

Scene::Scene(const SceneSpec& spec) : spec_(spec) {
    if (spec.width == 0 || spec.height == 0)
        throw UsageError("scene resolution must be positive");
    if (spec.contrast <= 0.0) throw UsageError("contrast must be > 0");
    if (spec.duration <= 0.0) throw UsageError("duration must be > 0");

    const double span_x = std::fabs(spec.vx) * spec.duration;
    const double span_y = std::fabs(spec.vy) * spec.duration;
    off_x_ = std::max(0.0, -spec.vx * spec.duration);
    off_y_ = std::max(0.0, -spec.vy * spec.duration);
    tex_w_ = spec.width + static_cast<std::size_t>(std::ceil(span_x)) + 2;
    tex_h_ = spec.height + static_cast<std::size_t>(std::ceil(span_y)) + 2;
    tex_.assign(tex_w_ * tex_h_, kLogLo);

    switch (spec.kind) {
        case SceneKind::Ramp: {
            const double slope =
                (kLogHi - kLogLo) / static_cast<double>(tex_w_ - 1);
            for (std::size_t y = 0; y < tex_h_; ++y)
                for (std::size_t x = 0; x < tex_w_; ++x)
                    tex_[y * tex_w_ + x] =
                        kLogLo + slope * static_cast<double>(x);
            break;
        }
        case SceneKind::Step: {
            // Edge sits at the frame centre at t = 0.
            const double edge =
                off_x_ + static_cast<double>(spec.width) / 2.0;
            for (std::size_t y = 0; y < tex_h_; ++y)
                for (std::size_t x = 0; x < tex_w_; ++x)
                    tex_[y * tex_w_ + x] =
                        static_cast<double>(x) < edge ? kLogLo : kLogHi;
            break;
        }
        case SceneKind::Texture: {
            Rng rng(Rng::derive(spec.seed, "synth.texture"));
            struct Wave {
                double fx, fy, phase, amp;
            };
            std::vector<Wave> waves(6);
            for (auto& w : waves) {
                w.fx = static_cast<double>(1 + rng.next_below(4));
                w.fy = static_cast<double>(1 + rng.next_below(4));
                w.phase = rng.uniform(0.0, 6.283185307179586);
                w.amp = rng.uniform(0.3, 1.0);
            }
            double lo = 1e30, hi = -1e30;
            std::vector<double> field(tex_w_ * tex_h_);
            for (std::size_t y = 0; y < tex_h_; ++y) {
                for (std::size_t x = 0; x < tex_w_; ++x) {
                    double s = 0.0;
                    for (const auto& w : waves)
                        s += w.amp *
                             std::sin(6.283185307179586 *
                                          (w.fx * static_cast<double>(x) /
                                               static_cast<double>(tex_w_) +
                                           w.fy * static_cast<double>(y) /
                                               static_cast<double>(tex_h_)) +
                                      w.phase);
                    field[y * tex_w_ + x] = s;
                    lo = std::min(lo, s);
                    hi = std::max(hi, s);
                }
            }
            const double scale = hi > lo ? (kLogHi - kLogLo) / (hi - lo) : 0.0;
            for (std::size_t i = 0; i < field.size(); ++i)
                tex_[i] = kLogLo + (field[i] - lo) * scale;
            break;
        }
    }
}

Scene::Scene(const SceneSpec& spec, std::vector<double> log_texture,
             std::size_t tex_width, std::size_t tex_height)
    : spec_(spec), tex_w_(tex_width), tex_h_(tex_height),
      tex_(std::move(log_texture)) {
    if (tex_.size() != tex_w_ * tex_h_ || tex_w_ == 0 || tex_h_ == 0)
        throw UsageError("texture size mismatch");
    if (spec.contrast <= 0.0) throw UsageError("contrast must be > 0");
    if (spec.duration <= 0.0) throw UsageError("duration must be > 0");
    off_x_ = std::max(0.0, -spec.vx * spec.duration);
    off_y_ = std::max(0.0, -spec.vy * spec.duration);
}

double Scene::log_intensity(double x, double y, double t) const {
    const double px = x + spec_.vx * t + off_x_;
    const double py = y + spec_.vy * t + off_y_;
    double fx = std::floor(px);
    double fy = std::floor(py);
    const double ax = px - fx;
    const double ay = py - fy;
    const auto wrap = [](double v, std::size_t n) {
        long long i = static_cast<long long>(v) %
                      static_cast<long long>(n);
        if (i < 0) i += static_cast<long long>(n);
        return static_cast<std::size_t>(i);
    };
    const std::size_t x0 = wrap(fx, tex_w_);
    const std::size_t x1 = (x0 + 1) % tex_w_;
    const std::size_t y0 = wrap(fy, tex_h_);
    const std::size_t y1 = (y0 + 1) % tex_h_;
    const double v00 = tex_[y0 * tex_w_ + x0];
    const double v01 = tex_[y0 * tex_w_ + x1];
    const double v10 = tex_[y1 * tex_w_ + x0];
    const double v11 = tex_[y1 * tex_w_ + x1];
    return (1.0 - ay) * ((1.0 - ax) * v00 + ax * v01) +
           ay * ((1.0 - ax) * v10 + ax * v11);
}

FrameImage render_frame(const SceneSpec& spec, double t) {
    if (t < 0.0 || t > spec.duration)
        throw UsageError("render time outside [0, duration]");
    Scene scene(spec);
    FrameImage image(spec.height, spec.width);
    for (std::size_t y = 0; y < spec.height; ++y)
        for (std::size_t x = 0; x < spec.width; ++x)
            image.at(y, x) = static_cast<float>(
                std::exp(scene.log_intensity(static_cast<double>(x),
                                             static_cast<double>(y), t)));
    return image;
}

EventStream simulate_events(const SceneSpec& spec, std::size_t substeps) {
    return simulate_events(Scene(spec), substeps);
}

EventStream simulate_events(const Scene& scene, std::size_t substeps) {
    if (substeps < 2) throw UsageError("substeps must be >= 2");
    const SceneSpec& spec = scene.spec();
    const std::size_t W = spec.width, H = spec.height;
    const double C = spec.contrast;
    const double dt = spec.duration / static_cast<double>(substeps);

    std::vector<double> prev(W * H), cur(W * H), residual(W * H, 0.0);
    std::vector<std::vector<Event>> per_pixel(W * H);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            prev[y * W + x] = scene.log_intensity(
                static_cast<double>(x), static_cast<double>(y), 0.0);

    for (std::size_t s = 1; s <= substeps; ++s) {
        const double t_prev = static_cast<double>(s - 1) * dt;
        const double t_cur =
            s == substeps ? spec.duration : static_cast<double>(s) * dt;
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) {
                const std::size_t i = y * W + x;
                cur[i] = scene.log_intensity(static_cast<double>(x),
                                             static_cast<double>(y), t_cur);
                const double dL = cur[i] - prev[i];
                const double r_start = residual[i];
                double r = r_start + dL;
                const std::int8_t p = dL > 0.0 ? 1 : -1;
                int k = 0;
                while (r >= C || r <= -C) {
                    ++k;
                    double frac =
                        (static_cast<double>(k) * static_cast<double>(p) * C -
                         r_start) /
                        dL;
                    frac = std::clamp(frac, 0.0, 1.0);
                    per_pixel[i].push_back(
                        Event{t_prev + frac * (t_cur - t_prev),
                              static_cast<std::uint16_t>(x),
                              static_cast<std::uint16_t>(y), p});
                    r -= static_cast<double>(p) * C;
                }
                residual[i] = r;
            }
        }
        std::swap(prev, cur);
    }

    std::vector<Event> all;
    for (const auto& px : per_pixel)
        all.insert(all.end(), px.begin(), px.end());
    std::stable_sort(all.begin(), all.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    return EventStream(std::move(all), W, H, 0.0, spec.duration);
}

}  // namespace evloc::synth
