#pragma once

#include <cstddef>

#include "evloc/core/types.hpp"

namespace evloc::privacy {

/// k_t: temporal half-window, k_s: spatial half-window. Windows clamp at
/// grid boundaries. Defaults follow the evaluated setting.
struct FilterParams {
    std::size_t k_t = 13;
    std::size_t k_s = 23;
};

enum class ProtectMode { Dense, Sparse };

/// Temporal median over [l-kt, l+kt] clamped to the grid; even-length
/// clamped windows average the two central order statistics.
core::VoxelGrid median_filter_temporal(const core::VoxelGrid& grid,
                                       std::size_t k_t);

/// Per entry, find the spatial-window argmax of |E| in the same temporal
/// slice (ties: smallest row, then column) and take the value at the point
/// reflection of (m, n) about it; off-frame reflections keep the original.
core::VoxelGrid max_reflection_filter(const core::VoxelGrid& grid,
                                      std::size_t k_s);

/// Mask bit (m, n) = 1 iff sum_l |E(l, m, n)| > mu + sigma, where mu and
/// sigma are the mean and population standard deviation of the temporally
/// summed absolute accumulations over all H*W pixels. Accumulation order is
/// fixed: temporal order per pixel, then pixel row-major, two passes.
core::BlendMask accumulation_mask(const core::VoxelGrid& grid);

/// E_blend = U * (E_med + E_max)/2 + (1 - U) * E with U broadcast along the
/// temporal axis; implemented as a select so U = 0 entries are bit-identical
/// to the input. Throws on shape mismatch.
core::VoxelGrid blend(const core::VoxelGrid& grid,
                      const core::VoxelGrid& median_filtered,
                      const core::VoxelGrid& max_reflected,
                      const core::BlendMask& mask);

/// Full pipeline: mask, both filters, blend. Dense filters the whole grid;
/// sparse filters only masked pixels and copies the rest, which is
/// semantics-preserving because blending discards filtered values where
/// U = 0. The two modes produce bit-identical outputs.
core::VoxelGrid protect(const core::VoxelGrid& grid, const FilterParams& params,
                        ProtectMode mode = ProtectMode::Dense);

}  // namespace evloc::privacy
