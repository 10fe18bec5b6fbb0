#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "evloc/core/types.hpp"

// Little-endian stream primitives shared by every binary file format and the
// wire protocol. The build targets little-endian hosts; a static_assert below
// keeps the assumption honest.

namespace evloc::core {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

template <typename T>
void write_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    os.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    static_assert(std::is_trivially_copyable_v<T>);
    char buf[sizeof(T)];
    is.read(buf, sizeof(T));
    if (!is) throw FormatError("unexpected end of stream");
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

inline void write_magic(std::ostream& os, const char magic[5]) {
    os.write(magic, 4);
}

inline void expect_magic(std::istream& is, const char magic[5]) {
    char buf[4];
    is.read(buf, 4);
    if (!is || std::memcmp(buf, magic, 4) != 0)
        throw FormatError(std::string("bad file magic, expected ") + magic);
}

// VoxelGrid container `VOX1`: u32 B, u32 H, u32 W, f64 t0, f64 duration,
// then B*H*W little-endian f32 in (l, m, n) row-major order.
void save_voxel_grid(std::ostream& os, const VoxelGrid& grid);
VoxelGrid load_voxel_grid(std::istream& is);
void save_voxel_grid(const std::string& path, const VoxelGrid& grid);
VoxelGrid load_voxel_grid(const std::string& path);

// FrameImage containers: binary PGM (P5, 8-bit, round(p*255)) for viewing and
// a lossless f32 `IMG1` container for metric-grade comparisons.
void save_pgm(std::ostream& os, const FrameImage& image);
void save_image(std::ostream& os, const FrameImage& image);
FrameImage load_image(std::istream& is);
void save_pgm(const std::string& path, const FrameImage& image);
void save_image(const std::string& path, const FrameImage& image);
FrameImage load_image(const std::string& path);

}  // namespace evloc::core
