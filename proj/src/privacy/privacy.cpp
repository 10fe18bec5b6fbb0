#include "evloc/privacy/privacy.hpp"

#include <cmath>
#include <vector>

#include "evloc/kernels/kernels.hpp"

namespace evloc::privacy {

using core::BlendMask;
using core::RuntimeError;
using core::VoxelGrid;

VoxelGrid median_filter_temporal(const VoxelGrid& grid, std::size_t k_t) {
    VoxelGrid out(grid.bins(), grid.height(), grid.width(), grid.t0(),
                  grid.duration());
    kernels::active().median_filter_temporal(grid.data(), out.data(),
                                             grid.bins(), grid.height(),
                                             grid.width(), k_t);
    return out;
}

VoxelGrid max_reflection_filter(const VoxelGrid& grid, std::size_t k_s) {
    VoxelGrid out(grid.bins(), grid.height(), grid.width(), grid.t0(),
                  grid.duration());
    kernels::active().max_reflection_filter(grid.data(), out.data(),
                                            grid.bins(), grid.height(),
                                            grid.width(), k_s);
    return out;
}

BlendMask accumulation_mask(const VoxelGrid& grid) {
    const std::size_t HW = grid.height() * grid.width();
    std::vector<double> sums(HW);
    kernels::active().temporal_abs_sum(grid.data(), sums.data(), grid.bins(),
                                       grid.height(), grid.width());
    // mu and sigma in a fixed row-major order, two passes, population form.
    double mu = 0.0;
    for (std::size_t p = 0; p < HW; ++p) mu += sums[p];
    mu /= static_cast<double>(HW);
    double var = 0.0;
    for (std::size_t p = 0; p < HW; ++p) {
        const double d = sums[p] - mu;
        var += d * d;
    }
    var /= static_cast<double>(HW);
    const double threshold = mu + std::sqrt(var);
    BlendMask mask(grid.height(), grid.width());
    for (std::size_t p = 0; p < HW; ++p)
        mask.data()[p] = sums[p] > threshold ? 1 : 0;
    return mask;
}

VoxelGrid blend(const VoxelGrid& grid, const VoxelGrid& median_filtered,
                const VoxelGrid& max_reflected, const BlendMask& mask) {
    if (!grid.same_shape(median_filtered) || !grid.same_shape(max_reflected) ||
        mask.height() != grid.height() || mask.width() != grid.width())
        throw RuntimeError("blend operands must share one shape");
    VoxelGrid out(grid.bins(), grid.height(), grid.width(), grid.t0(),
                  grid.duration());
    kernels::active().blend_select(grid.data(), median_filtered.data(),
                                   max_reflected.data(), mask.data(),
                                   out.data(), grid.bins(), grid.height(),
                                   grid.width());
    return out;
}

VoxelGrid protect(const VoxelGrid& grid, const FilterParams& params,
                  ProtectMode mode) {
    const BlendMask mask = accumulation_mask(grid);
    if (mode == ProtectMode::Dense) {
        const VoxelGrid med = median_filter_temporal(grid, params.k_t);
        const VoxelGrid mx = max_reflection_filter(grid, params.k_s);
        return blend(grid, med, mx, mask);
    }

    // Sparse path: filtered values are only ever kept where the mask is set,
    // so compute them just there. Reads go to the original grid, so the
    // result matches the dense path bit-for-bit.
    VoxelGrid out = grid;
    const std::size_t B = grid.bins();
    std::vector<double> med_col(B);
    for (std::size_t m = 0; m < grid.height(); ++m) {
        for (std::size_t n = 0; n < grid.width(); ++n) {
            if (!mask.at(m, n)) continue;
            kernels::median_filter_column(grid.data(), med_col.data(), B,
                                          grid.height(), grid.width(),
                                          params.k_t, m, n);
            for (std::size_t l = 0; l < B; ++l) {
                const double mx = kernels::max_reflection_entry(
                    grid.data(), B, grid.height(), grid.width(), params.k_s,
                    l, m, n);
                out.at(l, m, n) = (med_col[l] + mx) * 0.5;
            }
        }
    }
    return out;
}

}  // namespace evloc::privacy
