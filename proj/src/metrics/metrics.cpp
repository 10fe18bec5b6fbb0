#include "evloc/metrics/metrics.hpp"

#include <cmath>
#include <vector>

namespace evloc::metrics {

using core::FrameImage;
using core::RuntimeError;
using core::UsageError;

namespace {

void check_shapes(const FrameImage& a, const FrameImage& b) {
    if (a.height() != b.height() || a.width() != b.width())
        throw RuntimeError("images must share a shape");
}

}  // namespace

double mae(const FrameImage& a, const FrameImage& b) {
    check_shapes(a, b);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        sum += std::fabs(static_cast<double>(a.data()[i]) -
                         static_cast<double>(b.data()[i]));
    return sum / static_cast<double>(a.size());
}

std::optional<double> psnr(const FrameImage& a, const FrameImage& b,
                           const MetricConfig& cfg) {
    check_shapes(a, b);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data()[i]) -
                         static_cast<double>(b.data()[i]);
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(a.size());
    if (mse == 0.0) return std::nullopt;
    return 20.0 * std::log10(cfg.psnr_max) - 10.0 * std::log10(mse);
}

double ssim(const FrameImage& a, const FrameImage& b,
            const MetricConfig& cfg) {
    check_shapes(a, b);
    const std::size_t N = cfg.ssim_window;
    if (N < 3 || N % 2 == 0) throw UsageError("SSIM window must be odd, >= 3");
    if (a.height() < N || a.width() < N)
        throw UsageError("image smaller than the SSIM window");
    const std::size_t H = a.height(), W = a.width();
    const double scale = cfg.ssim_scale ? 255.0 : 1.0;

    // Per-row prefix sums of x, y, x^2, y^2, x*y: a different summation
    // route than the per-window double loop the tests compare against.
    const std::size_t P = W + 1;
    std::vector<double> sx(H * P, 0.0), sy(H * P, 0.0), sxx(H * P, 0.0),
        syy(H * P, 0.0), sxy(H * P, 0.0);
    for (std::size_t r = 0; r < H; ++r) {
        for (std::size_t c = 0; c < W; ++c) {
            const double x = static_cast<double>(a.at(r, c)) * scale;
            const double y = static_cast<double>(b.at(r, c)) * scale;
            const std::size_t i = r * P + c;
            sx[i + 1] = sx[i] + x;
            sy[i + 1] = sy[i] + y;
            sxx[i + 1] = sxx[i] + x * x;
            syy[i + 1] = syy[i] + y * y;
            sxy[i + 1] = sxy[i] + x * y;
        }
    }
    const auto window_sum = [&](const std::vector<double>& s, std::size_t r0,
                                std::size_t c0) {
        double acc = 0.0;
        for (std::size_t r = r0; r < r0 + N; ++r)
            acc += s[r * P + c0 + N] - s[r * P + c0];
        return acc;
    };

    const double inv_n = 1.0 / static_cast<double>(N * N);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t r0 = 0; r0 + N <= H; ++r0) {
        for (std::size_t c0 = 0; c0 + N <= W; ++c0) {
            const double mx = window_sum(sx, r0, c0) * inv_n;
            const double my = window_sum(sy, r0, c0) * inv_n;
            const double vx = window_sum(sxx, r0, c0) * inv_n - mx * mx;
            const double vy = window_sum(syy, r0, c0) * inv_n - my * my;
            const double cov = window_sum(sxy, r0, c0) * inv_n - mx * my;
            const double num = (2.0 * mx * my + cfg.c1) * (2.0 * cov + cfg.c2);
            const double den =
                (mx * mx + my * my + cfg.c1) * (vx + vy + cfg.c2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

}  // namespace evloc::metrics
