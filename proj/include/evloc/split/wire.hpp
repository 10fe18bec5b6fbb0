#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace evloc::split {

// Frame layout (little-endian):
//   magic "SPL1" | u8 version | u8 kind
//   HELLO / ACT_UP / ACT_DOWN : u32 C, u32 H, u32 W, then C*H*W f32 payload
//   ERROR                     : u32 code, u32 text length, text bytes
//   BYE                       : empty
//   u32 CRC32 (ISO-HDLC) over every preceding byte of the frame.
// HELLO carries the tensor shape the peer expects (H = W = 0 means any).

enum class MessageKind : std::uint8_t {
    Hello = 0,
    ActUp = 1,
    ActDown = 2,
    Error = 3,
    Bye = 4,
};

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::uint64_t kMaxTensorElems = 1ull << 26;

struct WireMessage {
    MessageKind kind = MessageKind::Bye;
    std::uint32_t c = 0, h = 0, w = 0;
    std::vector<float> payload;
    std::uint32_t error_code = 0;
    std::string error_text;
};

std::vector<std::uint8_t> encode_frame(const WireMessage& msg);

/// Reads one frame through `read_exact(buf, n)` (throws on transport
/// failure). Malformed frames (bad magic/version/kind, oversized tensor,
/// CRC mismatch) throw core::ProtocolError.
using ReadFn = std::function<void(void* buf, std::size_t n)>;
WireMessage decode_frame(const ReadFn& read_exact);

std::uint32_t crc32_ieee(const std::uint8_t* data, std::size_t n,
                         std::uint32_t seed = 0);

}  // namespace evloc::split
