#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "evloc/core/types.hpp"
#include "evloc/recon/net.hpp"
#include "evloc/recon/train.hpp"
#include "evloc/split/wire.hpp"

namespace evloc::split {

/// The only parameters ever shared with the service provider.
struct MiddlePart {
    std::vector<recon::ConvLayer<float>> layers;
};

/// The parameters that stay on-device: frontal and rear layers.
struct EndsParts {
    std::vector<recon::ConvLayer<float>> frontal;
    std::vector<recon::ConvLayer<float>> rear;
};

MiddlePart extract_middle(const recon::ConvNet<float>& net);
EndsParts extract_ends(const recon::ConvNet<float>& net);

// Part files reuse the `NET1` layer encoding; the split fields mark the
// frontal/rear boundary for ends files and are zero for middle files.
void save_middle(const std::string& path, const MiddlePart& part);
MiddlePart load_middle(const std::string& path);
void save_ends(const std::string& path, const EndsParts& parts);
EndsParts load_ends(const std::string& path);

/// Serves F2 over a TCP byte stream. Sessions are independent; each gets a
/// thread. The server owns only the middle parameters: input voxels, the
/// watermark, and the end parts never reach this process boundary.
class SplitServer {
public:
    explicit SplitServer(MiddlePart middle, std::uint16_t port = 0);
    ~SplitServer();

    SplitServer(const SplitServer&) = delete;
    SplitServer& operator=(const SplitServer&) = delete;

    std::uint16_t port() const { return port_; }
    void stop();
    std::uint64_t sessions_served() const { return sessions_.load(); }

private:
    void accept_loop();
    void session(int fd);

    MiddlePart middle_;
    std::size_t middle_in_channels_ = 0;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::atomic<std::uint64_t> sessions_{0};
    std::thread accept_thread_;
    std::vector<std::thread> workers_;
    std::mutex workers_mutex_;
};

/// One reconstruction round trip: F1 locally on the watermark-infused voxel,
/// ACT_UP to the server, F2 remotely, ACT_DOWN back, F3 locally. Equal to
/// the monolithic forward bit-for-bit. watermark may be null.
core::FrameImage client_reconstruct(const EndsParts& ends,
                                    const recon::NoiseWatermark* watermark,
                                    const core::VoxelGrid& grid,
                                    const std::string& host,
                                    std::uint16_t port,
                                    recon::FlopCounter* flops = nullptr);

enum class SpliceDepth { L2, L3, L4, Mid };
const char* splice_label(SpliceDepth depth);
std::size_t splice_layer(SpliceDepth depth, const recon::ConvNet<float>& net);

/// Swapped-layer inference: the victim's layers up to the splice depth, the
/// provider-side network for the rest. Throws when channel shapes do not
/// line up at the splice point.
core::FrameImage attack_swapped_layer(const recon::ConvNet<float>& provider_net,
                                      const recon::ConvNet<float>& victim_net,
                                      SpliceDepth depth,
                                      const core::VoxelGrid& observed_voxel);

/// Attacker retraining. Both run the private training objective on
/// attacker-side data; neither can take a watermark. The targeted variant
/// starts from the shared middle parameters instead of a fully random init.
recon::ConvNet<float> attack_generic_retrain(
    const recon::ConvNet<float>& original,
    const std::vector<core::VoxelGrid>& attacker_data,
    const recon::TrainConfig& cfg);
recon::ConvNet<float> attack_targeted_retrain(
    const recon::ConvNet<float>& original, const MiddlePart& shared_middle,
    const std::vector<core::VoxelGrid>& attacker_data,
    const recon::TrainConfig& cfg);

struct AttackReport {
    std::string attack;  // swapped | generic | targeted
    std::string depth;   // L2 | L3 | L4 | MID
    double mae = 0.0;
    std::optional<double> psnr;  // nullopt = infinite (identical images)
    double ssim = 0.0;
    std::size_t n = 0;
};

/// One report row per (attack x splice depth), metrics averaged over the
/// evaluation voxels against the original network's reconstructions.
std::vector<AttackReport> evaluate_attacks(
    const recon::ConvNet<float>& original,
    const recon::ConvNet<float>& generic_net,
    const recon::ConvNet<float>& targeted_net,
    const recon::ConvNet<float>& victim,
    const recon::NoiseWatermark& watermark,
    const std::vector<core::VoxelGrid>& eval_voxels);

/// CSV with header `attack,depth,mae,psnr,ssim,n`.
void write_attack_csv(std::ostream& os, const std::vector<AttackReport>& rows);

}  // namespace evloc::split
