#include "evloc/core/serial.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace evloc::core {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw RuntimeError("cannot open for writing: " + path);
    return os;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw RuntimeError("cannot open for reading: " + path);
    return is;
}

}  // namespace

void save_voxel_grid(std::ostream& os, const VoxelGrid& grid) {
    write_magic(os, "VOX1");
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(grid.bins()));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(grid.height()));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(grid.width()));
    write_le<double>(os, grid.t0());
    write_le<double>(os, grid.duration());
    for (std::size_t i = 0; i < grid.size(); ++i)
        write_le<float>(os, static_cast<float>(grid.data()[i]));
}

VoxelGrid load_voxel_grid(std::istream& is) {
    expect_magic(is, "VOX1");
    auto b = read_le<std::uint32_t>(is);
    auto h = read_le<std::uint32_t>(is);
    auto w = read_le<std::uint32_t>(is);
    auto t0 = read_le<double>(is);
    auto dur = read_le<double>(is);
    VoxelGrid grid(b, h, w, t0, dur);
    for (std::size_t i = 0; i < grid.size(); ++i)
        grid.data()[i] = read_le<float>(is);
    return grid;
}

void save_voxel_grid(const std::string& path, const VoxelGrid& grid) {
    auto os = open_out(path);
    save_voxel_grid(os, grid);
}

VoxelGrid load_voxel_grid(const std::string& path) {
    auto is = open_in(path);
    return load_voxel_grid(is);
}

void save_pgm(std::ostream& os, const FrameImage& image) {
    os << "P5\n" << image.width() << " " << image.height() << "\n255\n";
    for (std::size_t i = 0; i < image.size(); ++i) {
        double v = std::lround(static_cast<double>(image.data()[i]) * 255.0);
        v = std::clamp(v, 0.0, 255.0);
        os.put(static_cast<char>(static_cast<unsigned char>(v)));
    }
}

void save_image(std::ostream& os, const FrameImage& image) {
    write_magic(os, "IMG1");
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(image.height()));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(image.width()));
    for (std::size_t i = 0; i < image.size(); ++i)
        write_le<float>(os, image.data()[i]);
}

FrameImage load_image(std::istream& is) {
    expect_magic(is, "IMG1");
    auto h = read_le<std::uint32_t>(is);
    auto w = read_le<std::uint32_t>(is);
    FrameImage image(h, w);
    for (std::size_t i = 0; i < image.size(); ++i)
        image.data()[i] = read_le<float>(is);
    return image;
}

void save_pgm(const std::string& path, const FrameImage& image) {
    auto os = open_out(path);
    save_pgm(os, image);
}

void save_image(const std::string& path, const FrameImage& image) {
    auto os = open_out(path);
    save_image(os, image);
}

FrameImage load_image(const std::string& path) {
    auto is = open_in(path);
    return load_image(is);
}

}  // namespace evloc::core
