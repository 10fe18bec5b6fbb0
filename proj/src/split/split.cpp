#include "evloc/split/split.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <fstream>

#include "evloc/core/serial.hpp"
#include "evloc/metrics/metrics.hpp"

namespace evloc::split {

using core::FrameImage;
using core::ProtocolError;
using core::RuntimeError;
using core::VoxelGrid;
using recon::ConvLayer;
using recon::ConvNet;
using recon::Tensor;

MiddlePart extract_middle(const ConvNet<float>& net) {
    MiddlePart part;
    part.layers.assign(net.layers.begin() + net.split1,
                       net.layers.begin() + net.split2);
    return part;
}

EndsParts extract_ends(const ConvNet<float>& net) {
    EndsParts parts;
    parts.frontal.assign(net.layers.begin(), net.layers.begin() + net.split1);
    parts.rear.assign(net.layers.begin() + net.split2, net.layers.end());
    return parts;
}

namespace {

void save_part_file(const std::string& path,
                    const std::vector<ConvLayer<float>>& layers,
                    std::uint32_t split1, std::uint32_t split2) {
    ConvNet<float> shell;
    shell.layers = layers;
    shell.split1 = split1;
    shell.split2 = split2;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw RuntimeError("cannot open for writing: " + path);
    recon::save_net(os, shell);
}

ConvNet<float> load_part_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw RuntimeError("cannot open for reading: " + path);
    return recon::load_net_loose(is);
}

Tensor<float> apply_layers(const std::vector<ConvLayer<float>>& layers,
                           Tensor<float> x,
                           recon::FlopCounter* flops = nullptr) {
    for (const auto& layer : layers) {
        x = recon::conv_forward_linear(layer, x, flops);
        recon::activation_forward(layer.activation, x);
    }
    return x;
}

}  // namespace

void save_middle(const std::string& path, const MiddlePart& part) {
    save_part_file(path, part.layers, 0, 0);
}

MiddlePart load_middle(const std::string& path) {
    auto shell = load_part_file(path);
    if (shell.split1 != 0 || shell.split2 != 0)
        throw core::FormatError("not a middle-part file");
    MiddlePart part;
    part.layers = std::move(shell.layers);
    return part;
}

void save_ends(const std::string& path, const EndsParts& parts) {
    std::vector<ConvLayer<float>> layers = parts.frontal;
    layers.insert(layers.end(), parts.rear.begin(), parts.rear.end());
    save_part_file(path, layers,
                   static_cast<std::uint32_t>(parts.frontal.size()),
                   static_cast<std::uint32_t>(parts.frontal.size()));
}

EndsParts load_ends(const std::string& path) {
    auto shell = load_part_file(path);
    if (shell.split1 == 0 || shell.split1 != shell.split2 ||
        shell.split1 > shell.layers.size())
        throw core::FormatError("not an ends-part file");
    EndsParts parts;
    parts.frontal.assign(shell.layers.begin(),
                         shell.layers.begin() + shell.split1);
    parts.rear.assign(shell.layers.begin() + shell.split1,
                      shell.layers.end());
    return parts;
}

namespace {

void write_all(int fd, const std::uint8_t* data, std::size_t n) {
    while (n > 0) {
        const ssize_t sent = ::send(fd, data, n, MSG_NOSIGNAL);
        if (sent <= 0) throw ProtocolError("transport write failed");
        data += sent;
        n -= static_cast<std::size_t>(sent);
    }
}

ReadFn reader_for(int fd) {
    return [fd](void* buf, std::size_t n) {
        auto* out = static_cast<std::uint8_t*>(buf);
        while (n > 0) {
            const ssize_t got = ::recv(fd, out, n, 0);
            if (got <= 0) throw ProtocolError("transport read failed");
            out += got;
            n -= static_cast<std::size_t>(got);
        }
    };
}

void send_message(int fd, const WireMessage& msg) {
    const auto frame = encode_frame(msg);
    write_all(fd, frame.data(), frame.size());
}

void send_error(int fd, std::uint32_t code, const std::string& text) {
    WireMessage err;
    err.kind = MessageKind::Error;
    err.error_code = code;
    err.error_text = text;
    try {
        send_message(fd, err);
    } catch (const ProtocolError&) {
        // Peer already gone; nothing to report to.
    }
}

}  // namespace

SplitServer::SplitServer(MiddlePart middle, std::uint16_t port)
    : middle_(std::move(middle)) {
    if (middle_.layers.empty()) throw RuntimeError("middle part is empty");
    middle_in_channels_ = middle_.layers.front().in_channels;

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw RuntimeError("cannot create server socket");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) !=
            0 ||
        ::listen(listen_fd_, 16) != 0) {
        ::close(listen_fd_);
        throw RuntimeError("cannot bind/listen on requested port");
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

SplitServer::~SplitServer() { stop(); }

void SplitServer::stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (accept_thread_.joinable()) accept_thread_.join();
    std::lock_guard lock(workers_mutex_);
    for (auto& worker : workers_)
        if (worker.joinable()) worker.join();
    workers_.clear();
}

void SplitServer::accept_loop() {
    while (running_) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (!running_) break;
            continue;
        }
        ++sessions_;
        std::lock_guard lock(workers_mutex_);
        workers_.emplace_back([this, fd] { session(fd); });
    }
}

void SplitServer::session(int fd) {
    const auto read_exact = reader_for(fd);
    try {
        for (;;) {
            WireMessage msg;
            try {
                msg = decode_frame(read_exact);
            } catch (const ProtocolError& e) {
                // Includes CRC mismatches: report and drop the session. The
                // next connection gets a fresh thread.
                send_error(fd, 3, e.what());
                break;
            }
            if (msg.kind == MessageKind::Bye) break;
            if (msg.kind == MessageKind::Hello) {
                WireMessage reply;
                reply.kind = MessageKind::Hello;
                reply.c = static_cast<std::uint32_t>(middle_in_channels_);
                send_message(fd, reply);
                continue;
            }
            if (msg.kind != MessageKind::ActUp) {
                send_error(fd, 5, "unexpected message kind");
                break;
            }
            if (msg.c != middle_in_channels_ || msg.h == 0 || msg.w == 0) {
                send_error(fd, 5, "activation shape mismatch");
                break;
            }
            Tensor<float> x(msg.c, msg.h, msg.w);
            x.v = std::move(msg.payload);
            Tensor<float> y = apply_layers(middle_.layers, std::move(x));
            WireMessage reply;
            reply.kind = MessageKind::ActDown;
            reply.c = static_cast<std::uint32_t>(y.c);
            reply.h = static_cast<std::uint32_t>(y.h);
            reply.w = static_cast<std::uint32_t>(y.w);
            reply.payload = std::move(y.v);
            send_message(fd, reply);
        }
    } catch (const ProtocolError&) {
        // Transport failure ends the session.
    }
    ::close(fd);
}

FrameImage client_reconstruct(const EndsParts& ends,
                              const recon::NoiseWatermark* watermark,
                              const VoxelGrid& grid, const std::string& host,
                              std::uint16_t port,
                              recon::FlopCounter* flops) {
    if (ends.frontal.empty() || ends.rear.empty())
        throw RuntimeError("ends parts are empty");

    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ProtocolError("cannot create client socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    const std::string resolved = host == "localhost" ? "127.0.0.1" : host;
    if (::inet_pton(AF_INET, resolved.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw ProtocolError("cannot parse host address: " + host);
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(fd);
        throw ProtocolError("cannot connect to server");
    }

    try {
        const VoxelGrid infused =
            watermark ? recon::infuse(grid, *watermark) : grid;
        Tensor<float> up =
            apply_layers(ends.frontal, recon::to_tensor<float>(infused), flops);

        WireMessage msg;
        msg.kind = MessageKind::ActUp;
        msg.c = static_cast<std::uint32_t>(up.c);
        msg.h = static_cast<std::uint32_t>(up.h);
        msg.w = static_cast<std::uint32_t>(up.w);
        msg.payload = std::move(up.v);
        send_message(fd, msg);

        const auto read_exact = reader_for(fd);
        WireMessage reply = decode_frame(read_exact);
        if (reply.kind == MessageKind::Error)
            throw ProtocolError("server error: " + reply.error_text);
        if (reply.kind != MessageKind::ActDown)
            throw ProtocolError("unexpected reply kind");
        if (reply.c != ends.rear.front().in_channels)
            throw ProtocolError("reply activation shape mismatch");
        Tensor<float> down(reply.c, reply.h, reply.w);
        down.v = std::move(reply.payload);
        Tensor<float> out = apply_layers(ends.rear, std::move(down), flops);

        WireMessage bye;
        bye.kind = MessageKind::Bye;
        send_message(fd, bye);
        ::close(fd);
        return recon::to_image(out);
    } catch (...) {
        ::close(fd);
        throw;
    }
}

const char* splice_label(SpliceDepth depth) {
    switch (depth) {
        case SpliceDepth::L2: return "L2";
        case SpliceDepth::L3: return "L3";
        case SpliceDepth::L4: return "L4";
        default: return "MID";
    }
}

std::size_t splice_layer(SpliceDepth depth, const ConvNet<float>& net) {
    switch (depth) {
        case SpliceDepth::L2: return 2;
        case SpliceDepth::L3: return 3;
        case SpliceDepth::L4: return 4;
        default: return net.split2;
    }
}

FrameImage attack_swapped_layer(const ConvNet<float>& provider_net,
                                const ConvNet<float>& victim_net,
                                SpliceDepth depth,
                                const VoxelGrid& observed_voxel) {
    const std::size_t cut = splice_layer(depth, victim_net);
    if (cut >= victim_net.layers.size() || cut >= provider_net.layers.size())
        throw RuntimeError("splice depth beyond network size");
    if (provider_net.layers[cut].in_channels !=
        victim_net.layers[cut].in_channels)
        throw RuntimeError("incompatible shapes at the splice point");
    Tensor<float> x = recon::to_tensor<float>(observed_voxel);
    x = recon::forward_range(victim_net, std::move(x), 0, cut);
    x = recon::forward_range(provider_net, std::move(x), cut,
                             provider_net.layers.size());
    return recon::to_image(x);
}

ConvNet<float> attack_generic_retrain(
    const ConvNet<float>& original,
    const std::vector<VoxelGrid>& attacker_data,
    const recon::TrainConfig& cfg) {
    return recon::train_private<float>(original, attacker_data, nullptr, cfg)
        .net;
}

ConvNet<float> attack_targeted_retrain(
    const ConvNet<float>& original, const MiddlePart& shared_middle,
    const std::vector<VoxelGrid>& attacker_data,
    const recon::TrainConfig& cfg) {
    if (shared_middle.layers.size() != original.split2 - original.split1)
        throw RuntimeError("shared middle does not match the architecture");
    ConvNet<float> start = original;
    recon::init_random(start, cfg.seed);
    for (std::size_t i = 0; i < shared_middle.layers.size(); ++i)
        start.layers[original.split1 + i] = shared_middle.layers[i];
    return recon::train_private<float>(original, attacker_data, nullptr, cfg,
                                       nullptr, &start)
        .net;
}

std::vector<AttackReport> evaluate_attacks(
    const ConvNet<float>& original, const ConvNet<float>& generic_net,
    const ConvNet<float>& targeted_net, const ConvNet<float>& victim,
    const recon::NoiseWatermark& watermark,
    const std::vector<VoxelGrid>& eval_voxels) {
    if (eval_voxels.empty()) throw RuntimeError("empty evaluation set");
    const std::pair<const char*, const ConvNet<float>*> attacks[] = {
        {"swapped", &original},
        {"generic", &generic_net},
        {"targeted", &targeted_net},
    };
    const SpliceDepth depths[] = {SpliceDepth::L2, SpliceDepth::L3,
                                  SpliceDepth::L4, SpliceDepth::Mid};

    std::vector<AttackReport> rows;
    for (const auto& [name, provider] : attacks) {
        for (SpliceDepth depth : depths) {
            AttackReport row;
            row.attack = name;
            row.depth = splice_label(depth);
            double mae_sum = 0.0, psnr_sum = 0.0, ssim_sum = 0.0;
            bool psnr_inf = false;
            for (const auto& grid : eval_voxels) {
                const FrameImage reference = recon::forward(original, grid);
                const FrameImage attacked = attack_swapped_layer(
                    *provider, victim, depth, recon::infuse(grid, watermark));
                mae_sum += metrics::mae(reference, attacked);
                if (auto p = metrics::psnr(reference, attacked))
                    psnr_sum += *p;
                else
                    psnr_inf = true;
                ssim_sum += metrics::ssim(reference, attacked);
            }
            const double inv = 1.0 / static_cast<double>(eval_voxels.size());
            row.mae = mae_sum * inv;
            row.psnr = psnr_inf ? std::nullopt
                                : std::optional<double>(psnr_sum * inv);
            row.ssim = ssim_sum * inv;
            row.n = eval_voxels.size();
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_attack_csv(std::ostream& os, const std::vector<AttackReport>& rows) {
    os << "attack,depth,mae,psnr,ssim,n\n";
    char buf[160];
    for (const auto& row : rows) {
        if (row.psnr)
            std::snprintf(buf, sizeof(buf), "%s,%s,%.9g,%.9g,%.9g,%zu\n",
                          row.attack.c_str(), row.depth.c_str(), row.mae,
                          *row.psnr, row.ssim, row.n);
        else
            std::snprintf(buf, sizeof(buf), "%s,%s,%.9g,inf,%.9g,%zu\n",
                          row.attack.c_str(), row.depth.c_str(), row.mae,
                          row.ssim, row.n);
        os << buf;
    }
}

}  // namespace evloc::split
