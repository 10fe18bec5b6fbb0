#include <fstream>

#include "evloc/core/serial.hpp"
#include "evloc/recon/net.hpp"
#include "evloc/recon/train.hpp"

namespace evloc::recon {

using core::FormatError;
using core::FrameImage;
using core::RuntimeError;
using core::VoxelGrid;

FrameImage forward(const ConvNet<float>& net, const VoxelGrid& grid,
                   FlopCounter* flops) {
    validate(net, grid.bins());
    return to_image(forward_tensor(net, to_tensor<float>(grid), flops));
}

double sobel_sharpness(const FrameImage& image) {
    if (image.height() < 3 || image.width() < 3)
        throw RuntimeError("image smaller than 3x3");
    const auto& ks = kernels::active();
    std::vector<float> mag(image.width() - 2);
    double sum = 0.0;
    for (std::size_t y = 1; y + 1 < image.height(); ++y) {
        ks.sobel_row_magnitude_f32(image.data(), image.height(), image.width(),
                                   y, mag.data());
        for (float m : mag) sum += static_cast<double>(m);
    }
    return sum / static_cast<double>((image.height() - 2) *
                                     (image.width() - 2));
}

NoiseWatermark make_watermark(std::uint64_t seed, std::size_t bins,
                              std::size_t height, std::size_t width) {
    NoiseWatermark wm;
    wm.seed = seed;
    wm.values = VoxelGrid(bins, height, width);
    core::Rng rng(core::Rng::derive(seed, "recon.watermark"));
    for (std::size_t i = 0; i < wm.values.size(); ++i)
        wm.values.data()[i] = rng.normal();
    return wm;
}

VoxelGrid infuse(const VoxelGrid& grid, const NoiseWatermark& wm) {
    if (!grid.same_shape(wm.values))
        throw RuntimeError("watermark shape mismatch");
    VoxelGrid out = grid;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] += wm.values.data()[i];
    return out;
}

void save_watermark(std::ostream& os, const NoiseWatermark& wm) {
    core::write_magic(os, "WMK1");
    core::write_le<std::uint64_t>(os, wm.seed);
    core::write_le<std::uint32_t>(os,
                                  static_cast<std::uint32_t>(wm.values.bins()));
    core::write_le<std::uint32_t>(
        os, static_cast<std::uint32_t>(wm.values.height()));
    core::write_le<std::uint32_t>(
        os, static_cast<std::uint32_t>(wm.values.width()));
}

NoiseWatermark load_watermark(std::istream& is) {
    core::expect_magic(is, "WMK1");
    const auto seed = core::read_le<std::uint64_t>(is);
    const auto b = core::read_le<std::uint32_t>(is);
    const auto h = core::read_le<std::uint32_t>(is);
    const auto w = core::read_le<std::uint32_t>(is);
    return make_watermark(seed, b, h, w);
}

void save_watermark(const std::string& path, const NoiseWatermark& wm) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw RuntimeError("cannot open for writing: " + path);
    save_watermark(os, wm);
}

NoiseWatermark load_watermark(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw RuntimeError("cannot open for reading: " + path);
    return load_watermark(is);
}

void save_net(std::ostream& os, const ConvNet<float>& net) {
    core::write_magic(os, "NET1");
    core::write_le<std::uint32_t>(os,
                                  static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& layer : net.layers) {
        core::write_le<std::uint32_t>(
            os, static_cast<std::uint32_t>(layer.in_channels));
        core::write_le<std::uint32_t>(
            os, static_cast<std::uint32_t>(layer.out_channels));
        core::write_le<std::uint8_t>(
            os, static_cast<std::uint8_t>(layer.activation));
        for (float k : layer.kernel) core::write_le<float>(os, k);
        for (float b : layer.bias) core::write_le<float>(os, b);
    }
    core::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.split1));
    core::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.split2));
}

ConvNet<float> load_net_loose(std::istream& is) {
    core::expect_magic(is, "NET1");
    const auto count = core::read_le<std::uint32_t>(is);
    ConvNet<float> net;
    for (std::uint32_t i = 0; i < count; ++i) {
        ConvLayer<float> layer;
        layer.in_channels = core::read_le<std::uint32_t>(is);
        layer.out_channels = core::read_le<std::uint32_t>(is);
        const auto act = core::read_le<std::uint8_t>(is);
        if (act > 1) throw FormatError("unknown activation tag");
        layer.activation = static_cast<Activation>(act);
        layer.kernel.resize(layer.in_channels * layer.out_channels * 9);
        for (auto& k : layer.kernel) k = core::read_le<float>(is);
        layer.bias.resize(layer.out_channels);
        for (auto& b : layer.bias) b = core::read_le<float>(is);
        net.layers.push_back(std::move(layer));
    }
    net.split1 = core::read_le<std::uint32_t>(is);
    net.split2 = core::read_le<std::uint32_t>(is);
    return net;
}

ConvNet<float> load_net(std::istream& is) {
    ConvNet<float> net = load_net_loose(is);
    if (net.layers.empty()) throw FormatError("network has no layers");
    validate(net, net.layers.front().in_channels);
    return net;
}

void save_net(const std::string& path, const ConvNet<float>& net) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw RuntimeError("cannot open for writing: " + path);
    save_net(os, net);
}

ConvNet<float> load_net(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw RuntimeError("cannot open for reading: " + path);
    return load_net(is);
}

}  // namespace evloc::recon
