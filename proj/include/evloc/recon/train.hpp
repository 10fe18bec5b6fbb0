#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "evloc/core/rng.hpp"
#include "evloc/core/types.hpp"
#include "evloc/recon/net.hpp"

namespace evloc::recon {

/// Fixed standard-normal tensor added to input voxels; values regenerate
/// exactly from the seed.
struct NoiseWatermark {
    std::uint64_t seed = 0;
    core::VoxelGrid values;
};

NoiseWatermark make_watermark(std::uint64_t seed, std::size_t bins,
                              std::size_t height, std::size_t width);
core::VoxelGrid infuse(const core::VoxelGrid& grid, const NoiseWatermark& wm);

// `WMK1` container: u64 seed, u32 B, u32 H, u32 W; values never stored.
void save_watermark(std::ostream& os, const NoiseWatermark& wm);
NoiseWatermark load_watermark(std::istream& is);
void save_watermark(const std::string& path, const NoiseWatermark& wm);
NoiseWatermark load_watermark(const std::string& path);

/// Image distance d(.,.) used by the reconstruction loss. Pluggable; the
/// default is the mean absolute difference.
template <typename T>
struct Distance {
    virtual ~Distance() = default;
    virtual T value(const Tensor<T>& ref, const Tensor<T>& out) const = 0;
    /// dd(ref, out)/dout.
    virtual Tensor<T> gradient(const Tensor<T>& ref,
                               const Tensor<T>& out) const = 0;
};

template <typename T>
struct MeanAbsDistance final : Distance<T> {
    T value(const Tensor<T>& ref, const Tensor<T>& out) const override {
        T sum = T(0);
        for (std::size_t i = 0; i < ref.size(); ++i)
            sum += std::abs(out.v[i] - ref.v[i]);
        return sum / static_cast<T>(ref.size());
    }
    Tensor<T> gradient(const Tensor<T>& ref,
                       const Tensor<T>& out) const override {
        Tensor<T> g(out.c, out.h, out.w);
        const T inv = T(1) / static_cast<T>(ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) {
            const T d = out.v[i] - ref.v[i];
            g.v[i] = d > T(0) ? inv : (d < T(0) ? -inv : T(0));
        }
        return g;
    }
};

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 2;
    std::size_t epochs = 10;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double adv_weight = 1.0;  // weight on the sharpness terms; 1 as written
    std::uint64_t seed = 0;
};

/// Mean interior Sobel magnitude of a 1-channel tensor; grad is its
/// derivative w.r.t. the pixels (zero where the magnitude vanishes).
template <typename T>
T sharpness_value(const Tensor<T>& img);
template <typename T>
Tensor<T> sharpness_gradient(const Tensor<T>& img);

template <typename T>
struct LayerGrad {
    std::vector<T> kernel;
    std::vector<T> bias;
};

template <typename T>
using NetGrad = std::vector<LayerGrad<T>>;

template <typename T>
NetGrad<T> zero_grad(const ConvNet<T>& net) {
    NetGrad<T> g(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        g[i].kernel.assign(net.layers[i].kernel.size(), T(0));
        g[i].bias.assign(net.layers[i].bias.size(), T(0));
    }
    return g;
}

/// One step of a mixed-ownership forward path: `train` segments accumulate
/// parameter gradients, frozen segments only pass input gradients through.
template <typename T>
struct PathSegment {
    const ConvNet<T>* net;
    std::size_t begin, end;
    bool train;
};

template <typename T>
struct PathTrace {
    std::vector<const ConvLayer<T>*> layers;
    std::vector<bool> train;
    std::vector<std::size_t> grad_slot;  // index into NetGrad when train
    std::vector<Tensor<T>> inputs;       // input of each layer
    std::vector<Tensor<T>> post;         // post-activation output of each
    Tensor<T> output;
};

template <typename T>
PathTrace<T> forward_traced(const std::vector<PathSegment<T>>& segments,
                            const Tensor<T>& x);

/// Accumulates dLoss/dparams of the trained segments into `grads` given
/// dLoss/doutput; returns dLoss/dinput.
template <typename T>
Tensor<T> backward_traced(const PathTrace<T>& trace, Tensor<T> grad_out,
                          NetGrad<T>& grads);

/// The private training objective evaluated on one sample:
///   d(reference, F'(x)) + w * [ s(rear_o(mid_o(front'(x)))) +
///                               s(rear_o(mid'(front'(x)))) ]
/// where `reference` = F(E) is precomputed by the caller, F is frozen and
/// F' is trained. Returns the loss and accumulates gradients.
template <typename T>
T private_loss_and_grad(const ConvNet<T>& frozen, const ConvNet<T>& trained,
                        const Tensor<T>& x, const Tensor<T>& reference,
                        const Distance<T>& dist, double adv_weight,
                        NetGrad<T>& grads);

/// Loss value only (used by finite-difference checks).
template <typename T>
T private_loss(const ConvNet<T>& frozen, const ConvNet<T>& trained,
               const Tensor<T>& x, const Tensor<T>& reference,
               const Distance<T>& dist, double adv_weight);

template <typename T>
class Adam {
public:
    Adam(const ConvNet<T>& net, const TrainConfig& cfg);
    void step(ConvNet<T>& net, const NetGrad<T>& grads);

private:
    TrainConfig cfg_;
    std::uint64_t t_ = 0;
    NetGrad<T> m_, v_;
};

template <typename T>
struct TrainResult {
    ConvNet<T> net;
    std::vector<double> epoch_loss;
};

/// Private retraining: fresh random init from cfg.seed, Adam over batches of
/// watermark-infused voxels against the frozen original's reconstructions.
/// Deterministic: fixed data order, single thread. The watermark may be null
/// (attacker-style training on raw voxels).
template <typename T>
TrainResult<T> train_private(const ConvNet<T>& original,
                             const std::vector<core::VoxelGrid>& data,
                             const NoiseWatermark* watermark,
                             const TrainConfig& cfg,
                             const Distance<T>* distance = nullptr,
                             const ConvNet<T>* start = nullptr);

// --- implementation ---

template <typename T>
T sharpness_value(const Tensor<T>& img) {
    if (img.h < 3 || img.w < 3)
        throw core::RuntimeError("image smaller than 3x3");
    T sum = T(0);
    for (std::size_t y = 1; y + 1 < img.h; ++y) {
        for (std::size_t x = 1; x + 1 < img.w; ++x) {
            const T gx = (img.at(0, y - 1, x + 1) - img.at(0, y - 1, x - 1)) +
                         T(2) * (img.at(0, y, x + 1) - img.at(0, y, x - 1)) +
                         (img.at(0, y + 1, x + 1) - img.at(0, y + 1, x - 1));
            const T gy = (img.at(0, y + 1, x - 1) - img.at(0, y - 1, x - 1)) +
                         T(2) * (img.at(0, y + 1, x) - img.at(0, y - 1, x)) +
                         (img.at(0, y + 1, x + 1) - img.at(0, y - 1, x + 1));
            sum += std::sqrt(gx * gx + gy * gy);
        }
    }
    return sum / static_cast<T>((img.h - 2) * (img.w - 2));
}

template <typename T>
Tensor<T> sharpness_gradient(const Tensor<T>& img) {
    Tensor<T> grad(1, img.h, img.w);
    const T inv = T(1) / static_cast<T>((img.h - 2) * (img.w - 2));
    static constexpr int sobel_x[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    static constexpr int sobel_y[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
    for (std::size_t y = 1; y + 1 < img.h; ++y) {
        for (std::size_t x = 1; x + 1 < img.w; ++x) {
            T gx = T(0), gy = T(0);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const T p = img.at(0, y + dy, x + dx);
                    gx += static_cast<T>(sobel_x[dy + 1][dx + 1]) * p;
                    gy += static_cast<T>(sobel_y[dy + 1][dx + 1]) * p;
                }
            const T mag = std::sqrt(gx * gx + gy * gy);
            if (!(mag > T(0))) continue;
            const T cx = inv * gx / mag;
            const T cy = inv * gy / mag;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    grad.at(0, y + dy, x + dx) +=
                        cx * static_cast<T>(sobel_x[dy + 1][dx + 1]) +
                        cy * static_cast<T>(sobel_y[dy + 1][dx + 1]);
        }
    }
    return grad;
}

template <typename T>
PathTrace<T> forward_traced(const std::vector<PathSegment<T>>& segments,
                            const Tensor<T>& x) {
    PathTrace<T> trace;
    Tensor<T> cur = x;
    for (const auto& seg : segments) {
        for (std::size_t i = seg.begin; i < seg.end; ++i) {
            const ConvLayer<T>& layer = seg.net->layers[i];
            trace.layers.push_back(&layer);
            trace.train.push_back(seg.train);
            trace.grad_slot.push_back(i);
            trace.inputs.push_back(cur);
            cur = conv_forward_linear(layer, cur);
            activation_forward(layer.activation, cur);
            trace.post.push_back(cur);
        }
    }
    trace.output = cur;
    return trace;
}

template <typename T>
Tensor<T> backward_traced(const PathTrace<T>& trace, Tensor<T> grad_out,
                          NetGrad<T>& grads) {
    for (std::size_t s = trace.layers.size(); s-- > 0;) {
        const ConvLayer<T>& layer = *trace.layers[s];
        const Tensor<T>& input = trace.inputs[s];
        const Tensor<T>& post = trace.post[s];

        // Through the activation.
        Tensor<T> gz(post.c, post.h, post.w);
        if (layer.activation == Activation::Sigmoid) {
            for (std::size_t i = 0; i < post.size(); ++i)
                gz.v[i] = grad_out.v[i] * post.v[i] * (T(1) - post.v[i]);
        } else {
            for (std::size_t i = 0; i < post.size(); ++i) {
                // post > 0 iff pre > 0 (leaky relu keeps sign).
                const T slope = post.v[i] > T(0) ? T(1)
                                                 : static_cast<T>(kLeakySlope);
                gz.v[i] = grad_out.v[i] * slope;
            }
        }

        const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(input.h);
        const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(input.w);
        Tensor<T> gin(input.c, input.h, input.w);
        LayerGrad<T>* lg = trace.train[s] ? &grads[trace.grad_slot[s]] : nullptr;
        for (std::size_t co = 0; co < layer.out_channels; ++co) {
            for (std::ptrdiff_t y = 0; y < h; ++y) {
                for (std::ptrdiff_t x = 0; x < w; ++x) {
                    const T g = gz.at(co, y, x);
                    if (lg) lg->bias[co] += g;
                    for (std::size_t ci = 0; ci < input.c; ++ci) {
                        for (int ky = 0; ky < 3; ++ky) {
                            const std::ptrdiff_t yy = y + ky - 1;
                            if (yy < 0 || yy >= h) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                const std::ptrdiff_t xx = x + kx - 1;
                                if (xx < 0 || xx >= w) continue;
                                gin.at(ci, yy, xx) +=
                                    g * layer.k(co, ci, ky, kx);
                                if (lg)
                                    lg->kernel[((co * input.c + ci) * 3 + ky) *
                                                   3 +
                                               kx] += g * input.at(ci, yy, xx);
                            }
                        }
                    }
                }
            }
        }
        grad_out = std::move(gin);
    }
    return grad_out;
}

template <typename T>
T private_loss_and_grad(const ConvNet<T>& frozen, const ConvNet<T>& trained,
                        const Tensor<T>& x, const Tensor<T>& reference,
                        const Distance<T>& dist, double adv_weight,
                        NetGrad<T>& grads) {
    const T w = static_cast<T>(adv_weight);
    // Reconstruction: the trained network end to end.
    std::vector<PathSegment<T>> p_main = {
        {&trained, 0, trained.layers.size(), true}};
    auto t_main = forward_traced(p_main, x);
    const T l_recon = dist.value(reference, t_main.output);
    backward_traced(t_main, dist.gradient(reference, t_main.output), grads);

    // Sharpness of the frozen rear+middle applied to the trained frontal.
    std::vector<PathSegment<T>> p_adv1 = {
        {&trained, 0, trained.split1, true},
        {&frozen, frozen.split1, frozen.layers.size(), false}};
    auto t_adv1 = forward_traced(p_adv1, x);
    const T s1 = sharpness_value(t_adv1.output);
    {
        auto g = sharpness_gradient(t_adv1.output);
        for (auto& v : g.v) v *= w;
        backward_traced(t_adv1, std::move(g), grads);
    }

    // Sharpness of the frozen rear applied to the trained frontal+middle.
    std::vector<PathSegment<T>> p_adv2 = {
        {&trained, 0, trained.split2, true},
        {&frozen, frozen.split2, frozen.layers.size(), false}};
    auto t_adv2 = forward_traced(p_adv2, x);
    const T s2 = sharpness_value(t_adv2.output);
    {
        auto g = sharpness_gradient(t_adv2.output);
        for (auto& v : g.v) v *= w;
        backward_traced(t_adv2, std::move(g), grads);
    }

    return l_recon + w * (s1 + s2);
}

template <typename T>
T private_loss(const ConvNet<T>& frozen, const ConvNet<T>& trained,
               const Tensor<T>& x, const Tensor<T>& reference,
               const Distance<T>& dist, double adv_weight) {
    const T w = static_cast<T>(adv_weight);
    auto out = forward_tensor(trained, x);
    const T l_recon = dist.value(reference, out);
    auto front = forward_range(trained, x, 0, trained.split1);
    const T s1 = sharpness_value(
        forward_range(frozen, front, frozen.split1, frozen.layers.size()));
    auto mid = forward_range(trained, front, trained.split1, trained.split2);
    const T s2 = sharpness_value(
        forward_range(frozen, mid, frozen.split2, frozen.layers.size()));
    return l_recon + w * (s1 + s2);
}

template <typename T>
Adam<T>::Adam(const ConvNet<T>& net, const TrainConfig& cfg)
    : cfg_(cfg), m_(zero_grad(net)), v_(zero_grad(net)) {}

template <typename T>
void Adam<T>::step(ConvNet<T>& net, const NetGrad<T>& grads) {
    ++t_;
    const T b1 = static_cast<T>(cfg_.adam_beta1);
    const T b2 = static_cast<T>(cfg_.adam_beta2);
    const T lr = static_cast<T>(cfg_.learning_rate);
    const T eps = static_cast<T>(cfg_.adam_epsilon);
    const T c1 = T(1) - static_cast<T>(std::pow(cfg_.adam_beta1,
                                                static_cast<double>(t_)));
    const T c2 = T(1) - static_cast<T>(std::pow(cfg_.adam_beta2,
                                                static_cast<double>(t_)));
    auto update = [&](std::vector<T>& p, std::vector<T>& m, std::vector<T>& v,
                      const std::vector<T>& g) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (T(1) - b1) * g[i];
            v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
            const T mhat = m[i] / c1;
            const T vhat = v[i] / c2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    };
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        update(net.layers[i].kernel, m_[i].kernel, v_[i].kernel,
               grads[i].kernel);
        update(net.layers[i].bias, m_[i].bias, v_[i].bias, grads[i].bias);
    }
}

template <typename T>
TrainResult<T> train_private(const ConvNet<T>& original,
                             const std::vector<core::VoxelGrid>& data,
                             const NoiseWatermark* watermark,
                             const TrainConfig& cfg,
                             const Distance<T>* distance,
                             const ConvNet<T>* start) {
    if (data.empty()) throw core::RuntimeError("empty training data set");
    MeanAbsDistance<T> default_distance;
    const Distance<T>& dist = distance ? *distance : default_distance;

    ConvNet<T> net;
    if (start) {
        net = *start;
    } else {
        net = original;
        init_random(net, cfg.seed);
    }

    // References F(E) are fixed; precompute once.
    std::vector<Tensor<T>> refs, inputs;
    refs.reserve(data.size());
    inputs.reserve(data.size());
    for (const auto& grid : data) {
        refs.push_back(forward_tensor(original, to_tensor<T>(grid)));
        inputs.push_back(watermark ? to_tensor<T>(infuse(grid, *watermark))
                                   : to_tensor<T>(grid));
    }

    TrainResult<T> result;
    Adam<T> adam(net, cfg);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < data.size();
             begin += cfg.batch_size) {
            const std::size_t end =
                std::min(data.size(), begin + cfg.batch_size);
            NetGrad<T> grads = zero_grad(net);
            T batch_loss = T(0);
            for (std::size_t i = begin; i < end; ++i)
                batch_loss += private_loss_and_grad(
                    original, net, inputs[i], refs[i], dist, cfg.adv_weight,
                    grads);
            const T inv = T(1) / static_cast<T>(end - begin);
            for (auto& lg : grads) {
                for (auto& g : lg.kernel) g *= inv;
                for (auto& g : lg.bias) g *= inv;
            }
            adam.step(net, grads);
            epoch_loss += static_cast<double>(batch_loss);
        }
        result.epoch_loss.push_back(epoch_loss /
                                    static_cast<double>(data.size()));
    }
    result.net = std::move(net);
    return result;
}

}  // namespace evloc::recon
