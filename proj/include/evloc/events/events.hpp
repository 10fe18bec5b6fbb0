#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "evloc/core/types.hpp"

namespace evloc::events {

/// One brightness-change event: timestamp (seconds), pixel, polarity +-1.
struct Event {
    double t = 0.0;
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::int8_t p = 1;

    friend bool operator==(const Event&, const Event&) = default;
};

/// Time-ordered event list with sensor geometry and the capture window
/// [t0, t0 + duration]. Construction validates the type invariants.
class EventStream {
public:
    EventStream() = default;
    EventStream(std::vector<Event> events, std::size_t width,
                std::size_t height, double t0, double duration);

    /// Builds the stream window from the event extremes (t0 = first event
    /// time, duration = span); used by the file parsers.
    static EventStream from_events(std::vector<Event> events,
                                   std::size_t width, std::size_t height);

    const std::vector<Event>& events() const { return events_; }
    std::size_t width() const { return width_; }
    std::size_t height() const { return height_; }
    double t0() const { return t0_; }
    double duration() const { return duration_; }
    std::size_t size() const { return events_.size(); }
    bool empty() const { return events_.empty(); }

private:
    std::vector<Event> events_;
    std::size_t width_ = 0, height_ = 0;
    double t0_ = 0.0, duration_ = 0.0;
};

enum class EventFormat { Csv, Binary };

struct CsvOptions {
    // Accept p in {1,0} with 0 meaning -1 (flag-selected alternative to the
    // default {1,-1} encoding).
    bool zero_means_negative = false;
};

/// CSV: one `t,x,y,p` record per line, optional `#` comment/header lines.
/// Unordered input is stable-sorted by t. Malformed records report the line
/// number; coordinates are checked against the declared sensor bounds.
EventStream parse_csv(std::istream& is, std::size_t width, std::size_t height,
                      const CsvOptions& opts = {});
void write_csv(std::ostream& os, const EventStream& stream);

/// Binary `EVS1`: u32 W, u32 H, u64 count, then count records of
/// (u64 t_microseconds, u16 x, u16 y, i8 p), little-endian.
EventStream parse_binary(std::istream& is);
void write_binary(std::ostream& os, const EventStream& stream);

EventStream parse_events(std::istream& is, EventFormat format,
                         std::size_t width = 0, std::size_t height = 0,
                         const CsvOptions& opts = {});
EventStream load_events(const std::string& path, std::size_t width = 0,
                        std::size_t height = 0, const CsvOptions& opts = {});

/// Voxelize with B temporal bins:
///   E(l, m, n) += p * max(0, 1 - |l - t*|),  t* = (B-1)/dT * (t - t0),
/// so each event splits its polarity bilinearly across the two adjacent
/// bins. duration == 0 maps every event to bin 0. Throws on B == 0.
core::VoxelGrid voxelize(const EventStream& stream, std::size_t bins);

/// Split into consecutive slices of count_per_slice events (last may be
/// short); concatenating the slices reproduces the original order.
std::vector<EventStream> slice_stream(const EventStream& stream,
                                      std::size_t count_per_slice);

// Event-image baselines. All four depend only on the per-pixel last event
// (and counts), so they are invariant to reorderings that keep last-event
// identity.

/// 1.0 where the last event is positive, 0.0 where negative, 0.5 otherwise.
core::FrameImage binary_event_image(const EventStream& stream);

/// Per-pixel event count, max-normalized into [0, 1].
core::FrameImage event_histogram(const EventStream& stream);

/// (t_last - t0) / duration for pixels with events, 0 otherwise. A
/// zero-duration window maps event pixels to 1.
core::FrameImage timestamp_image(const EventStream& stream);

/// rank(t_last) / #distinct ranks in (0, 1] for event pixels, 0 otherwise.
core::FrameImage sorted_timestamp_image(const EventStream& stream);

}  // namespace evloc::events
