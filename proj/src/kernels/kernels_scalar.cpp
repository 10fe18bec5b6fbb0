#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "evloc/kernels/kernels.hpp"

namespace evloc::kernels {

namespace {

// Median of w values by insertion sort into a small stack buffer. Window
// lengths are at most 2*kt+1; callers keep that modest.
double median_of(const double* vals, std::size_t count) {
    double buf[512];
    std::size_t n = std::min<std::size_t>(count, 512);
    for (std::size_t i = 0; i < n; ++i) {
        double v = vals[i];
        std::size_t j = i;
        while (j > 0 && buf[j - 1] > v) {
            buf[j] = buf[j - 1];
            --j;
        }
        buf[j] = v;
    }
    if (n % 2 == 1) return buf[n / 2];
    return (buf[n / 2 - 1] + buf[n / 2]) * 0.5;
}

void median_filter_temporal_scalar(const double* in, double* out,
                                   std::size_t B, std::size_t H, std::size_t W,
                                   std::size_t kt) {
    const std::size_t HW = H * W;
    std::vector<double> window(2 * kt + 1);
    for (std::size_t m = 0; m < H; ++m) {
        for (std::size_t n = 0; n < W; ++n) {
            const double* col = in + m * W + n;
            for (std::size_t l = 0; l < B; ++l) {
                std::size_t lo = l >= kt ? l - kt : 0;
                std::size_t hi = std::min(B - 1, l + kt);
                std::size_t count = hi - lo + 1;
                for (std::size_t i = 0; i < count; ++i)
                    window[i] = col[(lo + i) * HW];
                out[(l * H + m) * W + n] = median_of(window.data(), count);
            }
        }
    }
}

void max_reflection_filter_scalar(const double* in, double* out, std::size_t B,
                                  std::size_t H, std::size_t W,
                                  std::size_t ks) {
    for (std::size_t l = 0; l < B; ++l) {
        double* oslice = out + l * H * W;
        for (std::size_t m = 0; m < H; ++m)
            for (std::size_t n = 0; n < W; ++n)
                oslice[m * W + n] =
                    max_reflection_entry(in, B, H, W, ks, l, m, n);
    }
}

void temporal_abs_sum_scalar(const double* in, double* out_hw, std::size_t B,
                             std::size_t H, std::size_t W) {
    const std::size_t HW = H * W;
    for (std::size_t p = 0; p < HW; ++p) {
        double s = 0.0;
        for (std::size_t l = 0; l < B; ++l) s += std::fabs(in[l * HW + p]);
        out_hw[p] = s;
    }
}

void blend_select_scalar(const double* e, const double* med, const double* mx,
                         const std::uint8_t* mask_hw, double* out,
                         std::size_t B, std::size_t H, std::size_t W) {
    const std::size_t HW = H * W;
    for (std::size_t l = 0; l < B; ++l) {
        const std::size_t base = l * HW;
        for (std::size_t p = 0; p < HW; ++p)
            out[base + p] = mask_hw[p] ? (med[base + p] + mx[base + p]) * 0.5
                                       : e[base + p];
    }
}

void conv3x3_plane_f32_scalar(const float* in, std::size_t Cin, std::size_t H,
                              std::size_t W, const float* k, float bias,
                              float* out) {
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(H);
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(W);
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            float acc = bias;
            for (std::size_t ci = 0; ci < Cin; ++ci) {
                const float* plane = in + ci * H * W;
                const float* kk = k + ci * 9;
                for (int ky = 0; ky < 3; ++ky) {
                    std::ptrdiff_t yy = y + ky - 1;
                    if (yy < 0 || yy >= h) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        std::ptrdiff_t xx = x + kx - 1;
                        if (xx < 0 || xx >= w) continue;
                        acc += plane[yy * w + xx] * kk[ky * 3 + kx];
                    }
                }
            }
            out[y * w + x] = acc;
        }
    }
}

void sobel_row_magnitude_f32_scalar(const float* img, std::size_t H,
                                    std::size_t W, std::size_t y, float* mag) {
    (void)H;
    const float* r0 = img + (y - 1) * W;
    const float* r1 = img + y * W;
    const float* r2 = img + (y + 1) * W;
    for (std::size_t x = 1; x + 1 < W; ++x) {
        float gx = (r0[x + 1] - r0[x - 1]) + 2.0f * (r1[x + 1] - r1[x - 1]) +
                   (r2[x + 1] - r2[x - 1]);
        float gy = (r2[x - 1] - r0[x - 1]) + 2.0f * (r2[x] - r0[x]) +
                   (r2[x + 1] - r0[x + 1]);
        mag[x - 1] = std::sqrt(gx * gx + gy * gy);
    }
}

}  // namespace

void median_filter_column(const double* in, double* out_col, std::size_t B,
                          std::size_t H, std::size_t W, std::size_t kt,
                          std::size_t m, std::size_t n) {
    const std::size_t HW = H * W;
    const double* col = in + m * W + n;
    std::vector<double> window(2 * kt + 1);
    for (std::size_t l = 0; l < B; ++l) {
        std::size_t lo = l >= kt ? l - kt : 0;
        std::size_t hi = std::min(B - 1, l + kt);
        std::size_t count = hi - lo + 1;
        for (std::size_t i = 0; i < count; ++i) window[i] = col[(lo + i) * HW];
        out_col[l] = median_of(window.data(), count);
    }
}

double max_reflection_entry(const double* in, std::size_t B, std::size_t H,
                            std::size_t W, std::size_t ks, std::size_t l,
                            std::size_t m, std::size_t n) {
    (void)B;
    const double* slice = in + l * H * W;
    const std::size_t m_lo = m >= ks ? m - ks : 0;
    const std::size_t m_hi = std::min(H - 1, m + ks);
    const std::size_t n_lo = n >= ks ? n - ks : 0;
    const std::size_t n_hi = std::min(W - 1, n + ks);
    double best = -1.0;
    std::size_t bm = m, bn = n;
    for (std::size_t mm = m_lo; mm <= m_hi; ++mm) {
        for (std::size_t nn = n_lo; nn <= n_hi; ++nn) {
            double a = std::fabs(slice[mm * W + nn]);
            if (a > best) {
                best = a;
                bm = mm;
                bn = nn;
            }
        }
    }
    // Point reflection about the argmax; off-frame keeps the original value.
    std::ptrdiff_t rm = 2 * static_cast<std::ptrdiff_t>(bm) -
                        static_cast<std::ptrdiff_t>(m);
    std::ptrdiff_t rn = 2 * static_cast<std::ptrdiff_t>(bn) -
                        static_cast<std::ptrdiff_t>(n);
    if (rm < 0 || rm >= static_cast<std::ptrdiff_t>(H) || rn < 0 ||
        rn >= static_cast<std::ptrdiff_t>(W))
        return slice[m * W + n];
    return slice[rm * W + rn];
}

const KernelSet& scalar_set() {
    static const KernelSet set = {
        median_filter_temporal_scalar, max_reflection_filter_scalar,
        temporal_abs_sum_scalar,       blend_select_scalar,
        conv3x3_plane_f32_scalar,      sobel_row_magnitude_f32_scalar,
    };
    return set;
}

}  // namespace evloc::kernels
