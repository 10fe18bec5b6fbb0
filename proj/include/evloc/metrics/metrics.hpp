#pragma once

#include <optional>

#include "evloc/core/types.hpp"

namespace evloc::metrics {

struct MetricConfig {
    std::size_t ssim_window = 11;  // N, odd and >= 3
    double c1 = 6.5025;
    double c2 = 58.5225;
    double psnr_max = 1.0;   // MAX_I
    bool ssim_scale = true;  // multiply inputs by 255 before SSIM
};

/// Mean absolute pixel difference. Throws on shape mismatch.
double mae(const core::FrameImage& a, const core::FrameImage& b);

/// 20*log10(MAX_I) - 10*log10(MSE). Identical images (MSE = 0) are the
/// defined-infinite case, reported as nullopt.
std::optional<double> psnr(const core::FrameImage& a, const core::FrameImage& b,
                           const MetricConfig& cfg = {});

/// Mean over dense stride-1 NxN windows (valid region) of
/// (2 mx my + c1)(2 sxy + c2) / ((mx^2 + my^2 + c1)(sx^2 + sy^2 + c2))
/// with population (co)variances. Inputs are scaled by 255 first when
/// cfg.ssim_scale is on. Throws when the images are smaller than the window.
double ssim(const core::FrameImage& a, const core::FrameImage& b,
            const MetricConfig& cfg = {});

}  // namespace evloc::metrics
