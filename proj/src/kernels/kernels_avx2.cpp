// AVX2 kernel variants. Built with -mavx2 in its own translation unit and
// only ever entered after the runtime CPU probe. Each kernel reproduces the
// scalar reference bit-for-bit: identical per-entry accumulation order,
// mul+add instead of FMA, and the same first-wins tie-breaks.

#if defined(__AVX2__)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "evloc/kernels/kernels.hpp"

namespace evloc::kernels {

namespace {

inline __m256d abs_pd(__m256d v) {
    return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

// Compare-exchange for the odd-even transposition network.
inline void cmpx(__m256d& a, __m256d& b) {
    __m256d lo = _mm256_min_pd(a, b);
    __m256d hi = _mm256_max_pd(a, b);
    a = lo;
    b = hi;
}

void median_filter_temporal_avx2(const double* in, double* out, std::size_t B,
                                 std::size_t H, std::size_t W,
                                 std::size_t kt) {
    const std::size_t HW = H * W;
    std::vector<__m256d> regs(2 * kt + 1);
    std::vector<double> window(2 * kt + 1);
    for (std::size_t l = 0; l < B; ++l) {
        const std::size_t lo = l >= kt ? l - kt : 0;
        const std::size_t hi = std::min(B - 1, l + kt);
        const std::size_t count = hi - lo + 1;
        for (std::size_t m = 0; m < H; ++m) {
            const double* row = in + m * W;
            double* orow = out + (l * H + m) * W;
            std::size_t n = 0;
            for (; n + 4 <= W; n += 4) {
                for (std::size_t i = 0; i < count; ++i)
                    regs[i] = _mm256_loadu_pd(row + (lo + i) * HW + n);
                // Odd-even transposition sort; data-independent, exact.
                for (std::size_t pass = 0; pass < count; ++pass)
                    for (std::size_t i = pass & 1; i + 1 < count; i += 2)
                        cmpx(regs[i], regs[i + 1]);
                __m256d med;
                if (count % 2 == 1) {
                    med = regs[count / 2];
                } else {
                    med = _mm256_mul_pd(
                        _mm256_add_pd(regs[count / 2 - 1], regs[count / 2]),
                        _mm256_set1_pd(0.5));
                }
                _mm256_storeu_pd(orow + n, med);
            }
            for (; n < W; ++n) {
                const double* col = in + m * W + n;
                for (std::size_t i = 0; i < count; ++i)
                    window[i] = col[(lo + i) * HW];
                std::sort(window.begin(), window.begin() + count);
                orow[n] = count % 2 == 1 ? window[count / 2]
                                         : (window[count / 2 - 1] +
                                            window[count / 2]) *
                                               0.5;
            }
        }
    }
}

void max_reflection_filter_avx2(const double* in, double* out, std::size_t B,
                                std::size_t H, std::size_t W, std::size_t ks) {
    const std::ptrdiff_t sks = static_cast<std::ptrdiff_t>(ks);
    const std::ptrdiff_t sw = static_cast<std::ptrdiff_t>(W);
    const std::ptrdiff_t sh = static_cast<std::ptrdiff_t>(H);
    for (std::size_t l = 0; l < B; ++l) {
        const double* slice = in + l * H * W;
        double* oslice = out + l * H * W;
        for (std::size_t m = 0; m < H; ++m) {
            const std::size_t m_lo = m >= ks ? m - ks : 0;
            const std::size_t m_hi = std::min(H - 1, m + ks);
            std::size_t n = 0;
            // Lanes n..n+3 all need fully in-frame column windows.
            const std::ptrdiff_t fast_lo = sks;
            const std::ptrdiff_t fast_hi = sw - 4 - sks;  // inclusive start
            for (; static_cast<std::ptrdiff_t>(n) < fast_lo && n < W; ++n)
                oslice[m * W + n] =
                    max_reflection_entry(in, B, H, W, ks, l, m, n);
            for (; static_cast<std::ptrdiff_t>(n) <= fast_hi; n += 4) {
                __m256d best = _mm256_set1_pd(-1.0);
                __m256d bm = _mm256_setzero_pd();
                __m256d bn = _mm256_setzero_pd();
                const __m256d base_n = _mm256_setr_pd(
                    static_cast<double>(n), static_cast<double>(n + 1),
                    static_cast<double>(n + 2), static_cast<double>(n + 3));
                for (std::size_t mm = m_lo; mm <= m_hi; ++mm) {
                    const double* wrow = slice + mm * W;
                    const __m256d mmv = _mm256_set1_pd(static_cast<double>(mm));
                    for (std::ptrdiff_t dd = -sks; dd <= sks; ++dd) {
                        __m256d v = _mm256_loadu_pd(
                            wrow + static_cast<std::ptrdiff_t>(n) + dd);
                        __m256d a = abs_pd(v);
                        __m256d gt = _mm256_cmp_pd(a, best, _CMP_GT_OQ);
                        best = _mm256_blendv_pd(best, a, gt);
                        bm = _mm256_blendv_pd(bm, mmv, gt);
                        __m256d nn = _mm256_add_pd(
                            base_n, _mm256_set1_pd(static_cast<double>(dd)));
                        bn = _mm256_blendv_pd(bn, nn, gt);
                    }
                }
                alignas(32) double bms[4], bns[4];
                _mm256_store_pd(bms, bm);
                _mm256_store_pd(bns, bn);
                for (int j = 0; j < 4; ++j) {
                    const std::ptrdiff_t nj =
                        static_cast<std::ptrdiff_t>(n) + j;
                    std::ptrdiff_t rm =
                        2 * static_cast<std::ptrdiff_t>(bms[j]) -
                        static_cast<std::ptrdiff_t>(m);
                    std::ptrdiff_t rn =
                        2 * static_cast<std::ptrdiff_t>(bns[j]) - nj;
                    if (rm < 0 || rm >= sh || rn < 0 || rn >= sw)
                        oslice[m * W + nj] = slice[m * W + nj];
                    else
                        oslice[m * W + nj] = slice[rm * W + rn];
                }
            }
            for (; n < W; ++n)
                oslice[m * W + n] =
                    max_reflection_entry(in, B, H, W, ks, l, m, n);
        }
    }
}

void temporal_abs_sum_avx2(const double* in, double* out_hw, std::size_t B,
                           std::size_t H, std::size_t W) {
    const std::size_t HW = H * W;
    std::size_t p = 0;
    for (; p + 4 <= HW; p += 4) {
        __m256d s = _mm256_setzero_pd();
        for (std::size_t l = 0; l < B; ++l)
            s = _mm256_add_pd(s, abs_pd(_mm256_loadu_pd(in + l * HW + p)));
        _mm256_storeu_pd(out_hw + p, s);
    }
    for (; p < HW; ++p) {
        double s = 0.0;
        for (std::size_t l = 0; l < B; ++l) s += std::fabs(in[l * HW + p]);
        out_hw[p] = s;
    }
}

void blend_select_avx2(const double* e, const double* med, const double* mx,
                       const std::uint8_t* mask_hw, double* out, std::size_t B,
                       std::size_t H, std::size_t W) {
    const std::size_t HW = H * W;
    const __m256d half = _mm256_set1_pd(0.5);
    for (std::size_t l = 0; l < B; ++l) {
        const std::size_t base = l * HW;
        std::size_t p = 0;
        for (; p + 4 <= HW; p += 4) {
            __m256d sel = _mm256_setr_pd(
                mask_hw[p] ? -1.0 : 0.0, mask_hw[p + 1] ? -1.0 : 0.0,
                mask_hw[p + 2] ? -1.0 : 0.0, mask_hw[p + 3] ? -1.0 : 0.0);
            __m256d filt = _mm256_mul_pd(
                _mm256_add_pd(_mm256_loadu_pd(med + base + p),
                              _mm256_loadu_pd(mx + base + p)),
                half);
            __m256d orig = _mm256_loadu_pd(e + base + p);
            _mm256_storeu_pd(
                out + base + p,
                _mm256_blendv_pd(orig, filt,
                                 _mm256_cmp_pd(sel, _mm256_setzero_pd(),
                                               _CMP_LT_OQ)));
        }
        for (; p < HW; ++p)
            out[base + p] = mask_hw[p] ? (med[base + p] + mx[base + p]) * 0.5
                                       : e[base + p];
    }
}

// Scalar tail identical to the reference implementation (same skip logic,
// same accumulation order).
float conv_entry(const float* in, std::size_t Cin, std::size_t H,
                 std::size_t W, const float* k, float bias, std::ptrdiff_t y,
                 std::ptrdiff_t x) {
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(H);
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(W);
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
    return acc;
}

void conv3x3_plane_f32_avx2(const float* in, std::size_t Cin, std::size_t H,
                            std::size_t W, const float* k, float bias,
                            float* out) {
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(H);
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(W);
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        std::ptrdiff_t x = 0;
        if (w >= 10) {
            out[y * w] = conv_entry(in, Cin, H, W, k, bias, y, 0);
            for (x = 1; x + 8 <= w - 1; x += 8) {
                __m256 acc = _mm256_set1_ps(bias);
                for (std::size_t ci = 0; ci < Cin; ++ci) {
                    const float* plane = in + ci * H * W;
                    const float* kk = k + ci * 9;
                    for (int ky = 0; ky < 3; ++ky) {
                        std::ptrdiff_t yy = y + ky - 1;
                        if (yy < 0 || yy >= h) continue;
                        const float* row = plane + yy * w;
                        for (int kx = 0; kx < 3; ++kx) {
                            __m256 v = _mm256_loadu_ps(row + x + kx - 1);
                            acc = _mm256_add_ps(
                                acc,
                                _mm256_mul_ps(v,
                                              _mm256_set1_ps(kk[ky * 3 + kx])));
                        }
                    }
                }
                _mm256_storeu_ps(out + y * w + x, acc);
            }
        }
        for (; x < w; ++x)
            out[y * w + x] = conv_entry(in, Cin, H, W, k, bias, y, x);
    }
}

void sobel_row_magnitude_f32_avx2(const float* img, std::size_t H,
                                  std::size_t W, std::size_t y, float* mag) {
    (void)H;
    const float* r0 = img + (y - 1) * W;
    const float* r1 = img + y * W;
    const float* r2 = img + (y + 1) * W;
    const __m256 two = _mm256_set1_ps(2.0f);
    std::size_t x = 1;
    for (; x + 8 <= W - 1; x += 8) {
        __m256 gx = _mm256_add_ps(
            _mm256_add_ps(
                _mm256_sub_ps(_mm256_loadu_ps(r0 + x + 1),
                              _mm256_loadu_ps(r0 + x - 1)),
                _mm256_mul_ps(two,
                              _mm256_sub_ps(_mm256_loadu_ps(r1 + x + 1),
                                            _mm256_loadu_ps(r1 + x - 1)))),
            _mm256_sub_ps(_mm256_loadu_ps(r2 + x + 1),
                          _mm256_loadu_ps(r2 + x - 1)));
        __m256 gy = _mm256_add_ps(
            _mm256_add_ps(
                _mm256_sub_ps(_mm256_loadu_ps(r2 + x - 1),
                              _mm256_loadu_ps(r0 + x - 1)),
                _mm256_mul_ps(two, _mm256_sub_ps(_mm256_loadu_ps(r2 + x),
                                                 _mm256_loadu_ps(r0 + x)))),
            _mm256_sub_ps(_mm256_loadu_ps(r2 + x + 1),
                          _mm256_loadu_ps(r0 + x + 1)));
        __m256 m2 = _mm256_add_ps(_mm256_mul_ps(gx, gx),
                                  _mm256_mul_ps(gy, gy));
        _mm256_storeu_ps(mag + x - 1, _mm256_sqrt_ps(m2));
    }
    for (; x + 1 < W; ++x) {
        float gx = (r0[x + 1] - r0[x - 1]) + 2.0f * (r1[x + 1] - r1[x - 1]) +
                   (r2[x + 1] - r2[x - 1]);
        float gy = (r2[x - 1] - r0[x - 1]) + 2.0f * (r2[x] - r0[x]) +
                   (r2[x + 1] - r0[x + 1]);
        mag[x - 1] = std::sqrt(gx * gx + gy * gy);
    }
}

}  // namespace

const KernelSet* avx2_set() {
    static const KernelSet set = {
        median_filter_temporal_avx2, max_reflection_filter_avx2,
        temporal_abs_sum_avx2,       blend_select_avx2,
        conv3x3_plane_f32_avx2,      sobel_row_magnitude_f32_avx2,
    };
    return &set;
}

}  // namespace evloc::kernels

#else

#include "evloc/kernels/kernels.hpp"

namespace evloc::kernels {
const KernelSet* avx2_set() { return nullptr; }
}  // namespace evloc::kernels

#endif
