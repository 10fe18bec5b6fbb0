#include "evloc/events/events.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "evloc/core/serial.hpp"

namespace evloc::events {

using core::FormatError;
using core::FrameImage;
using core::RuntimeError;
using core::UsageError;
using core::VoxelGrid;

EventStream::EventStream(std::vector<Event> events, std::size_t width,
                         std::size_t height, double t0, double duration)
    : events_(std::move(events)), width_(width), height_(height), t0_(t0),
      duration_(duration) {
    if (duration_ < 0.0) throw FormatError("negative stream duration");
    double prev = t0_;
    for (const Event& e : events_) {
        if (e.x >= width_ || e.y >= height_)
            throw FormatError("event outside sensor bounds");
        if (e.p != 1 && e.p != -1) throw FormatError("polarity not in {+1,-1}");
        if (e.t < prev) throw FormatError("events not ordered in time");
        if (e.t > t0_ + duration_)
            throw FormatError("event after end of stream window");
        prev = e.t;
    }
}

EventStream EventStream::from_events(std::vector<Event> events,
                                     std::size_t width, std::size_t height) {
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    double t0 = events.empty() ? 0.0 : events.front().t;
    double duration = events.empty() ? 0.0 : events.back().t - t0;
    return EventStream(std::move(events), width, height, t0, duration);
}

namespace {

[[noreturn]] void line_error(std::size_t line, const std::string& what) {
    throw FormatError("line " + std::to_string(line) + ": " + what);
}

}  // namespace

EventStream parse_csv(std::istream& is, std::size_t width, std::size_t height,
                      const CsvOptions& opts) {
    if (width == 0 || height == 0)
        throw UsageError("CSV parsing needs the sensor resolution");
    std::vector<Event> events;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        double t;
        long x, y, p;
        char extra;
        int got = std::sscanf(line.c_str(), "%lf ,%ld ,%ld ,%ld %c", &t, &x,
                              &y, &p, &extra);
        if (got != 4) line_error(lineno, "malformed record '" + line + "'");
        if (!(t >= 0.0) || !std::isfinite(t))
            line_error(lineno, "timestamp must be a non-negative real");
        if (x < 0 || static_cast<std::size_t>(x) >= width)
            line_error(lineno, "x out of bounds");
        if (y < 0 || static_cast<std::size_t>(y) >= height)
            line_error(lineno, "y out of bounds");
        std::int8_t pol;
        if (p == 1) {
            pol = 1;
        } else if (p == -1 || (opts.zero_means_negative && p == 0)) {
            pol = -1;
        } else {
            line_error(lineno, "polarity not in the declared encoding");
        }
        events.push_back(Event{t, static_cast<std::uint16_t>(x),
                               static_cast<std::uint16_t>(y), pol});
    }
    return EventStream::from_events(std::move(events), width, height);
}

void write_csv(std::ostream& os, const EventStream& stream) {
    os << "# t,x,y,p\n";
    char buf[64];
    for (const Event& e : stream.events()) {
        std::snprintf(buf, sizeof(buf), "%.17g,%u,%u,%d\n", e.t,
                      static_cast<unsigned>(e.x), static_cast<unsigned>(e.y),
                      static_cast<int>(e.p));
        os << buf;
    }
}

EventStream parse_binary(std::istream& is) {
    core::expect_magic(is, "EVS1");
    auto w = core::read_le<std::uint32_t>(is);
    auto h = core::read_le<std::uint32_t>(is);
    auto count = core::read_le<std::uint64_t>(is);
    std::vector<Event> events;
    events.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        auto t_us = core::read_le<std::uint64_t>(is);
        auto x = core::read_le<std::uint16_t>(is);
        auto y = core::read_le<std::uint16_t>(is);
        auto p = core::read_le<std::int8_t>(is);
        if (x >= w || y >= h)
            throw FormatError("record " + std::to_string(i) +
                              ": coordinates out of bounds");
        if (p != 1 && p != -1)
            throw FormatError("record " + std::to_string(i) +
                              ": polarity not in {+1,-1}");
        events.push_back(
            Event{static_cast<double>(t_us) * 1e-6, x, y, p});
    }
    return EventStream::from_events(std::move(events), w, h);
}

void write_binary(std::ostream& os, const EventStream& stream) {
    core::write_magic(os, "EVS1");
    core::write_le<std::uint32_t>(os,
                                  static_cast<std::uint32_t>(stream.width()));
    core::write_le<std::uint32_t>(os,
                                  static_cast<std::uint32_t>(stream.height()));
    core::write_le<std::uint64_t>(os, stream.size());
    for (const Event& e : stream.events()) {
        core::write_le<std::uint64_t>(
            os, static_cast<std::uint64_t>(std::llround(e.t * 1e6)));
        core::write_le<std::uint16_t>(os, e.x);
        core::write_le<std::uint16_t>(os, e.y);
        core::write_le<std::int8_t>(os, e.p);
    }
}

EventStream parse_events(std::istream& is, EventFormat format,
                         std::size_t width, std::size_t height,
                         const CsvOptions& opts) {
    return format == EventFormat::Csv ? parse_csv(is, width, height, opts)
                                      : parse_binary(is);
}

EventStream load_events(const std::string& path, std::size_t width,
                        std::size_t height, const CsvOptions& opts) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw RuntimeError("cannot open for reading: " + path);
    bool csv = path.size() >= 4 && path.substr(path.size() - 4) == ".csv";
    return parse_events(is, csv ? EventFormat::Csv : EventFormat::Binary,
                        width, height, opts);
}

VoxelGrid voxelize(const EventStream& stream, std::size_t bins) {
    if (bins == 0) throw UsageError("bin count must be >= 1");
    VoxelGrid grid(bins, stream.height(), stream.width(), stream.t0(),
                   stream.duration());
    const double scale =
        stream.duration() > 0.0
            ? static_cast<double>(bins - 1) / stream.duration()
            : 0.0;
    for (const Event& e : stream.events()) {
        const double tstar = scale * (e.t - stream.t0());
        const double l0 = std::floor(tstar);
        for (double l = l0; l <= l0 + 1.0; l += 1.0) {
            if (l < 0.0 || l >= static_cast<double>(bins)) continue;
            // Same expression as the defining formula so brute-force
            // recomputation matches bit-for-bit.
            const double w = 1.0 - std::fabs(l - tstar);
            if (w > 0.0)
                grid.at(static_cast<std::size_t>(l), e.y, e.x) +=
                    static_cast<double>(e.p) * w;
        }
    }
    return grid;
}

std::vector<EventStream> slice_stream(const EventStream& stream,
                                      std::size_t count_per_slice) {
    if (count_per_slice == 0) throw UsageError("count_per_slice must be >= 1");
    std::vector<EventStream> slices;
    const auto& ev = stream.events();
    for (std::size_t begin = 0; begin < ev.size(); begin += count_per_slice) {
        std::size_t end = std::min(ev.size(), begin + count_per_slice);
        std::vector<Event> part(ev.begin() + begin, ev.begin() + end);
        double t0 = part.front().t;
        double duration = part.back().t - t0;
        slices.emplace_back(std::move(part), stream.width(), stream.height(),
                            t0, duration);
    }
    return slices;
}

namespace {

struct LastEvent {
    double t;
    std::int8_t p;
    bool seen = false;
};

std::vector<LastEvent> last_events(const EventStream& stream) {
    std::vector<LastEvent> last(stream.width() * stream.height());
    for (const Event& e : stream.events()) {
        auto& slot = last[e.y * stream.width() + e.x];
        slot.t = e.t;
        slot.p = e.p;
        slot.seen = true;
    }
    return last;
}

}  // namespace

FrameImage binary_event_image(const EventStream& stream) {
    FrameImage image(stream.height(), stream.width(), 0.5f);
    auto last = last_events(stream);
    for (std::size_t i = 0; i < last.size(); ++i)
        if (last[i].seen) image.data()[i] = last[i].p > 0 ? 1.0f : 0.0f;
    return image;
}

FrameImage event_histogram(const EventStream& stream) {
    FrameImage image(stream.height(), stream.width(), 0.0f);
    std::vector<std::size_t> counts(image.size(), 0);
    for (const Event& e : stream.events())
        ++counts[e.y * stream.width() + e.x];
    std::size_t max_count = 0;
    for (auto c : counts) max_count = std::max(max_count, c);
    if (max_count == 0) return image;
    for (std::size_t i = 0; i < counts.size(); ++i)
        image.data()[i] = static_cast<float>(static_cast<double>(counts[i]) /
                                             static_cast<double>(max_count));
    return image;
}

FrameImage timestamp_image(const EventStream& stream) {
    FrameImage image(stream.height(), stream.width(), 0.0f);
    auto last = last_events(stream);
    for (std::size_t i = 0; i < last.size(); ++i) {
        if (!last[i].seen) continue;
        image.data()[i] =
            stream.duration() > 0.0
                ? static_cast<float>((last[i].t - stream.t0()) /
                                     stream.duration())
                : 1.0f;
    }
    return image;
}

FrameImage sorted_timestamp_image(const EventStream& stream) {
    FrameImage image(stream.height(), stream.width(), 0.0f);
    auto last = last_events(stream);
    std::map<double, std::size_t> ranks;
    for (const auto& le : last)
        if (le.seen) ranks[le.t] = 0;
    std::size_t rank = 0;
    for (auto& [t, r] : ranks) r = ++rank;
    if (rank == 0) return image;
    for (std::size_t i = 0; i < last.size(); ++i)
        if (last[i].seen)
            image.data()[i] =
                static_cast<float>(static_cast<double>(ranks[last[i].t]) /
                                   static_cast<double>(rank));
    return image;
}

}  // namespace evloc::events
