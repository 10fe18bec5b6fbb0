#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace evloc::core {

// Error categories map 1:1 onto the CLI exit codes (2/3/4/5).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct RuntimeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// B x H x W signed accumulation tensor, (l, m, n) = (bin, row, col),
/// row-major with n fastest. t0/duration record the source stream window.
class VoxelGrid {
public:
    VoxelGrid() = default;
    VoxelGrid(std::size_t bins, std::size_t height, std::size_t width,
              double t0 = 0.0, double duration = 0.0)
        : bins_(bins), height_(height), width_(width), t0_(t0),
          duration_(duration), data_(bins * height * width, 0.0) {}

    std::size_t bins() const { return bins_; }
    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return data_.size(); }
    double t0() const { return t0_; }
    double duration() const { return duration_; }
    void set_window(double t0, double duration) {
        t0_ = t0;
        duration_ = duration;
    }

    double& at(std::size_t l, std::size_t m, std::size_t n) {
        return data_[(l * height_ + m) * width_ + n];
    }
    double at(std::size_t l, std::size_t m, std::size_t n) const {
        return data_[(l * height_ + m) * width_ + n];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const VoxelGrid& o) const {
        return bins_ == o.bins_ && height_ == o.height_ && width_ == o.width_;
    }
    friend bool operator==(const VoxelGrid& a, const VoxelGrid& b) {
        return a.bins_ == b.bins_ && a.height_ == b.height_ &&
               a.width_ == b.width_ && a.data_ == b.data_;
    }

private:
    std::size_t bins_ = 0, height_ = 0, width_ = 0;
    double t0_ = 0.0, duration_ = 0.0;
    std::vector<double> data_;
};

/// H x W grayscale frame, pixels in [0, 1].
class FrameImage {
public:
    FrameImage() = default;
    FrameImage(std::size_t height, std::size_t width, float fill = 0.0f)
        : height_(height), width_(width), pixels_(height * width, fill) {}

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return pixels_.size(); }

    float& at(std::size_t y, std::size_t x) { return pixels_[y * width_ + x]; }
    float at(std::size_t y, std::size_t x) const {
        return pixels_[y * width_ + x];
    }

    float* data() { return pixels_.data(); }
    const float* data() const { return pixels_.data(); }

    friend bool operator==(const FrameImage& a, const FrameImage& b) {
        return a.height_ == b.height_ && a.width_ == b.width_ &&
               a.pixels_ == b.pixels_;
    }

private:
    std::size_t height_ = 0, width_ = 0;
    std::vector<float> pixels_;
};

/// H x W boolean mask, broadcast along the temporal axis when applied.
class BlendMask {
public:
    BlendMask() = default;
    BlendMask(std::size_t height, std::size_t width)
        : height_(height), width_(width), bits_(height * width, 0) {}

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }

    std::uint8_t& at(std::size_t m, std::size_t n) {
        return bits_[m * width_ + n];
    }
    std::uint8_t at(std::size_t m, std::size_t n) const {
        return bits_[m * width_ + n];
    }

    std::uint8_t* data() { return bits_.data(); }
    const std::uint8_t* data() const { return bits_.data(); }

    std::size_t count() const {
        std::size_t c = 0;
        for (auto b : bits_) c += b;
        return c;
    }

private:
    std::size_t height_ = 0, width_ = 0;
    std::vector<std::uint8_t> bits_;
};

}  // namespace evloc::core
