#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops behind the voxel filters and the reconstruction
// network. Every operation has a scalar reference implementation and may have
// an AVX2 variant; the active set is selected once at runtime (CPU probe,
// overridable). The contract between variants is bit-exactness: for every
// input, scalar and AVX2 produce identical bytes. That holds because each
// output entry is computed with the same accumulation order and the same
// primitive ops in every variant (no FMA, no reordered reductions), and it is
// what lets higher layers promise reproducible results regardless of the
// machine the binary lands on. Equivalence is enforced by tests/test_kernels.

namespace evloc::kernels {

enum class Mode { Auto, Scalar, Avx2 };

/// Select the kernel set. Auto resolves to the best supported variant.
/// Throws core::UsageError if an unsupported variant is forced.
void set_mode(Mode mode);
Mode active_mode();          // never Auto after resolution
const char* active_name();   // "scalar" or "avx2"
bool cpu_has_avx2();

struct KernelSet {
    // Temporal median over the window [l-kt, l+kt] clamped to [0, B-1];
    // even-length clamped windows average the two central order statistics.
    void (*median_filter_temporal)(const double* in, double* out,
                                   std::size_t B, std::size_t H, std::size_t W,
                                   std::size_t kt);

    // Maximum-reflection: per entry, argmax of |E| over the clamped
    // (2ks+1)^2 spatial window in the same slice (ties: smallest row, then
    // smallest column), output = value at the point reflection of (m,n)
    // about the argmax, or the original entry if that lands off-frame.
    void (*max_reflection_filter)(const double* in, double* out,
                                  std::size_t B, std::size_t H, std::size_t W,
                                  std::size_t ks);

    // out_hw[m*W+n] = sum over l of |in(l,m,n)|, accumulated in temporal
    // order per pixel.
    void (*temporal_abs_sum)(const double* in, double* out_hw, std::size_t B,
                             std::size_t H, std::size_t W);

    // out = mask ? (med + mx) * 0.5 : e, mask broadcast along the temporal
    // axis. Select semantics, so masked-off entries are bit-identical to e.
    void (*blend_select)(const double* e, const double* med, const double* mx,
                         const std::uint8_t* mask_hw, double* out,
                         std::size_t B, std::size_t H, std::size_t W);

    // 3x3 same-padding convolution, single output channel plane:
    // out(y,x) = bias + sum_{ci,ky,kx} in(ci, y+ky-1, x+kx-1) * k(ci,ky,kx)
    // with off-frame taps skipped. k layout: (ci, ky, kx) row-major.
    void (*conv3x3_plane_f32)(const float* in, std::size_t Cin, std::size_t H,
                              std::size_t W, const float* k, float bias,
                              float* out);

    // Sobel gradient magnitude for one interior row y (1 <= y <= H-2),
    // written to mag[0..W-3] for x = 1..W-2.
    void (*sobel_row_magnitude_f32)(const float* img, std::size_t H,
                                    std::size_t W, std::size_t y, float* mag);
};

const KernelSet& active();
const KernelSet& scalar_set();
const KernelSet* avx2_set();  // nullptr when not compiled in / unsupported

// Scalar per-column / per-entry helpers used by the sparse filtering path.
// These are the same routines the scalar dense kernels loop over, so sparse
// and dense outputs agree bit-for-bit.
void median_filter_column(const double* in, double* out_col, std::size_t B,
                          std::size_t H, std::size_t W, std::size_t kt,
                          std::size_t m, std::size_t n);
double max_reflection_entry(const double* in, std::size_t B, std::size_t H,
                            std::size_t W, std::size_t ks, std::size_t l,
                            std::size_t m, std::size_t n);

}  // namespace evloc::kernels
