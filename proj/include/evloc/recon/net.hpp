#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "evloc/core/rng.hpp"
#include "evloc/core/types.hpp"
#include "evloc/kernels/kernels.hpp"

namespace evloc::recon {

/// (C, H, W) dense tensor, row-major with x fastest.
template <typename T>
struct Tensor {
    std::size_t c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor() = default;
    Tensor(std::size_t c_, std::size_t h_, std::size_t w_, T fill = T(0))
        : c(c_), h(h_), w(w_), v(c_ * h_ * w_, fill) {}

    T& at(std::size_t ci, std::size_t y, std::size_t x) {
        return v[(ci * h + y) * w + x];
    }
    T at(std::size_t ci, std::size_t y, std::size_t x) const {
        return v[(ci * h + y) * w + x];
    }
    std::size_t size() const { return v.size(); }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

enum class Activation : std::uint8_t { LeakyRelu = 0, Sigmoid = 1 };

/// 3x3 same-padding convolution layer. Kernel layout (co, ci, ky, kx).
template <typename T>
struct ConvLayer {
    std::size_t in_channels = 0, out_channels = 0;
    Activation activation = Activation::LeakyRelu;
    std::vector<T> kernel;
    std::vector<T> bias;

    T k(std::size_t co, std::size_t ci, std::size_t ky, std::size_t kx) const {
        return kernel[((co * in_channels + ci) * 3 + ky) * 3 + kx];
    }
};

/// Three-part reconstruction network: frontal [0, split1), middle
/// [split1, split2), rear [split2, layers). The last layer ends in a sigmoid
/// so outputs live in (0, 1).
template <typename T>
struct ConvNet {
    std::vector<ConvLayer<T>> layers;
    std::size_t split1 = 2, split2 = 4;
};

enum class Part { Frontal, Middle, Rear };

/// Counts multiply-accumulates actually executed (border taps are skipped,
/// so this is measured work, not a shape formula).
struct FlopCounter {
    std::uint64_t macs = 0;
};

template <typename T>
void validate(const ConvNet<T>& net, std::size_t input_channels) {
    if (net.layers.empty()) throw core::FormatError("network has no layers");
    if (net.layers.front().in_channels != input_channels)
        throw core::RuntimeError("input channel count mismatch");
    if (net.layers.back().out_channels != 1 ||
        net.layers.back().activation != Activation::Sigmoid)
        throw core::FormatError("last layer must be 1-channel sigmoid");
    for (std::size_t i = 0; i + 1 < net.layers.size(); ++i)
        if (net.layers[i].out_channels != net.layers[i + 1].in_channels)
            throw core::FormatError("channel chain mismatch between layers");
    if (!(net.split1 > 0 && net.split1 < net.split2 &&
          net.split2 < net.layers.size()))
        throw core::FormatError("split points must be interior and increasing");
}

constexpr double kLeakySlope = 0.1;

template <typename T>
T activate(Activation act, T z) {
    if (act == Activation::LeakyRelu)
        return z > T(0) ? z : static_cast<T>(kLeakySlope) * z;
    return T(1) / (T(1) + std::exp(-z));
}

/// Linear part of one layer (no activation). Float instantiations go through
/// the dispatched kernels; other types use the identical scalar loop.
template <typename T>
Tensor<T> conv_forward_linear(const ConvLayer<T>& layer, const Tensor<T>& in,
                              FlopCounter* flops = nullptr) {
    if (in.c != layer.in_channels)
        throw core::RuntimeError("activation shape mismatch");
    Tensor<T> out(layer.out_channels, in.h, in.w);
    if constexpr (std::is_same_v<T, float>) {
        const auto& ks = kernels::active();
        for (std::size_t co = 0; co < layer.out_channels; ++co)
            ks.conv3x3_plane_f32(in.v.data(), in.c, in.h, in.w,
                                 layer.kernel.data() + co * in.c * 9,
                                 layer.bias[co],
                                 out.v.data() + co * in.h * in.w);
    } else {
        const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(in.h);
        const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(in.w);
        for (std::size_t co = 0; co < layer.out_channels; ++co) {
            for (std::ptrdiff_t y = 0; y < h; ++y) {
                for (std::ptrdiff_t x = 0; x < w; ++x) {
                    T acc = layer.bias[co];
                    for (std::size_t ci = 0; ci < in.c; ++ci) {
                        for (int ky = 0; ky < 3; ++ky) {
                            const std::ptrdiff_t yy = y + ky - 1;
                            if (yy < 0 || yy >= h) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                const std::ptrdiff_t xx = x + kx - 1;
                                if (xx < 0 || xx >= w) continue;
                                acc += in.at(ci, yy, xx) * layer.k(co, ci, ky, kx);
                            }
                        }
                    }
                    out.at(co, y, x) = acc;
                }
            }
        }
    }
    if (flops) {
        // Interior pixels take all 9 taps; borders lose one row and/or col.
        const std::uint64_t taps =
            9ull * in.h * in.w - 3ull * 2 * (in.h + in.w) + 4ull;
        flops->macs += taps * in.c * layer.out_channels;
    }
    return out;
}

template <typename T>
void activation_forward(Activation act, Tensor<T>& t) {
    for (auto& z : t.v) z = activate(act, z);
}

/// Applies layers [begin, end) of net.
template <typename T>
Tensor<T> forward_range(const ConvNet<T>& net, Tensor<T> x, std::size_t begin,
                        std::size_t end, FlopCounter* flops = nullptr) {
    for (std::size_t i = begin; i < end; ++i) {
        x = conv_forward_linear(net.layers[i], x, flops);
        activation_forward(net.layers[i].activation, x);
    }
    return x;
}

template <typename T>
Tensor<T> forward_tensor(const ConvNet<T>& net, Tensor<T> x,
                         FlopCounter* flops = nullptr) {
    return forward_range(net, std::move(x), 0, net.layers.size(), flops);
}

template <typename T>
std::pair<std::size_t, std::size_t> part_range(const ConvNet<T>& net,
                                               Part part) {
    switch (part) {
        case Part::Frontal: return {0, net.split1};
        case Part::Middle: return {net.split1, net.split2};
        default: return {net.split2, net.layers.size()};
    }
}

/// forward_range over one of the three parts; the chained parts reproduce
/// forward_tensor exactly (same layers, same order, same ops).
template <typename T>
Tensor<T> forward_part(const ConvNet<T>& net, Part part, Tensor<T> x,
                       FlopCounter* flops = nullptr) {
    auto [b, e] = part_range(net, part);
    return forward_range(net, std::move(x), b, e, flops);
}

template <typename T>
Tensor<T> to_tensor(const core::VoxelGrid& grid) {
    Tensor<T> t(grid.bins(), grid.height(), grid.width());
    for (std::size_t i = 0; i < t.size(); ++i)
        t.v[i] = static_cast<T>(grid.data()[i]);
    return t;
}

template <typename T>
core::FrameImage to_image(const Tensor<T>& t) {
    if (t.c != 1) throw core::RuntimeError("expected a 1-channel tensor");
    core::FrameImage image(t.h, t.w);
    for (std::size_t i = 0; i < t.size(); ++i)
        image.data()[i] = static_cast<float>(t.v[i]);
    return image;
}

/// F(E) = I on the production float path.
core::FrameImage forward(const ConvNet<float>& net, const core::VoxelGrid& grid,
                         FlopCounter* flops = nullptr);

/// Mean Sobel gradient magnitude over interior pixels (kernel-dispatched
/// per-row magnitudes, fixed-order sum). Throws if the image is < 3x3.
double sobel_sharpness(const core::FrameImage& image);

/// Default architecture: input->8->8->32->32->8->1, 3x3 kernels, leaky-ReLU
/// (slope 0.1) except the sigmoid head; splits after layer 2 and 4 so the
/// middle holds the bulk of the compute.
template <typename T>
ConvNet<T> default_net(std::size_t input_bins) {
    const std::size_t widths[] = {input_bins, 8, 8, 32, 32, 8, 1};
    ConvNet<T> net;
    for (std::size_t i = 0; i + 1 < std::size(widths); ++i) {
        ConvLayer<T> layer;
        layer.in_channels = widths[i];
        layer.out_channels = widths[i + 1];
        layer.activation = i + 2 == std::size(widths) ? Activation::Sigmoid
                                                      : Activation::LeakyRelu;
        layer.kernel.assign(layer.in_channels * layer.out_channels * 9, T(0));
        layer.bias.assign(layer.out_channels, T(0));
        net.layers.push_back(std::move(layer));
    }
    net.split1 = 2;
    net.split2 = 4;
    return net;
}

/// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], fan_in = Cin * 9,
/// one derived stream per layer.
template <typename T>
void init_random(ConvNet<T>& net, std::uint64_t seed) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& layer = net.layers[i];
        core::Rng rng(core::Rng::derive(seed, "recon.init", i));
        const double bound =
            1.0 / std::sqrt(static_cast<double>(layer.in_channels) * 9.0);
        for (auto& k : layer.kernel)
            k = static_cast<T>(rng.uniform(-bound, bound));
        for (auto& b : layer.bias) b = static_cast<T>(rng.uniform(-bound, bound));
    }
}

template <typename To, typename From>
ConvNet<To> convert_net(const ConvNet<From>& in) {
    ConvNet<To> out;
    out.split1 = in.split1;
    out.split2 = in.split2;
    for (const auto& l : in.layers) {
        ConvLayer<To> layer;
        layer.in_channels = l.in_channels;
        layer.out_channels = l.out_channels;
        layer.activation = l.activation;
        layer.kernel.assign(l.kernel.begin(), l.kernel.end());
        layer.bias.assign(l.bias.begin(), l.bias.end());
        out.layers.push_back(std::move(layer));
    }
    return out;
}

// `NET1` container: u32 layer count, per layer u32 Cin, u32 Cout, u8
// activation tag, f32 kernel then bias, then two u32 split points.
void save_net(std::ostream& os, const ConvNet<float>& net);
ConvNet<float> load_net(std::istream& is);
/// Same container without full-network validation; used for part files
/// whose split fields carry part boundaries instead.
ConvNet<float> load_net_loose(std::istream& is);
void save_net(const std::string& path, const ConvNet<float>& net);
ConvNet<float> load_net(const std::string& path);

}  // namespace evloc::recon
