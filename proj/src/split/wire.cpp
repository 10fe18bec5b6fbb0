#include "evloc/split/wire.hpp"

#include <zlib.h>

#include <cstring>

#include "evloc/core/types.hpp"

namespace evloc::split {

using core::ProtocolError;

std::uint32_t crc32_ieee(const std::uint8_t* data, std::size_t n,
                         std::uint32_t seed) {
    return static_cast<std::uint32_t>(
        ::crc32(seed, reinterpret_cast<const Bytef*>(data),
                static_cast<uInt>(n)));
}

namespace {

template <typename T>
void append_le(std::vector<std::uint8_t>& buf, T value) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    buf.insert(buf.end(), raw, raw + sizeof(T));
}

bool is_tensor_kind(MessageKind kind) {
    return kind == MessageKind::Hello || kind == MessageKind::ActUp ||
           kind == MessageKind::ActDown;
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const WireMessage& msg) {
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), {'S', 'P', 'L', '1'});
    buf.push_back(kWireVersion);
    buf.push_back(static_cast<std::uint8_t>(msg.kind));
    if (is_tensor_kind(msg.kind)) {
        append_le<std::uint32_t>(buf, msg.c);
        append_le<std::uint32_t>(buf, msg.h);
        append_le<std::uint32_t>(buf, msg.w);
        for (float v : msg.payload) append_le<float>(buf, v);
    } else if (msg.kind == MessageKind::Error) {
        append_le<std::uint32_t>(buf, msg.error_code);
        append_le<std::uint32_t>(
            buf, static_cast<std::uint32_t>(msg.error_text.size()));
        buf.insert(buf.end(), msg.error_text.begin(), msg.error_text.end());
    }
    append_le<std::uint32_t>(buf, crc32_ieee(buf.data(), buf.size()));
    return buf;
}

WireMessage decode_frame(const ReadFn& read_exact) {
    std::vector<std::uint8_t> raw(6);
    read_exact(raw.data(), 6);
    if (std::memcmp(raw.data(), "SPL1", 4) != 0)
        throw ProtocolError("bad frame magic");
    if (raw[4] != kWireVersion) throw ProtocolError("unsupported version");
    if (raw[5] > static_cast<std::uint8_t>(MessageKind::Bye))
        throw ProtocolError("unknown message kind");

    WireMessage msg;
    msg.kind = static_cast<MessageKind>(raw[5]);
    const auto read_more = [&](std::size_t n) {
        const std::size_t off = raw.size();
        raw.resize(off + n);
        read_exact(raw.data() + off, n);
        return raw.data() + off;
    };
    const auto get_u32 = [](const std::uint8_t* p) {
        std::uint32_t v;
        std::memcpy(&v, p, 4);
        return v;
    };

    if (is_tensor_kind(msg.kind)) {
        const std::uint8_t* dims = read_more(12);
        msg.c = get_u32(dims);
        msg.h = get_u32(dims + 4);
        msg.w = get_u32(dims + 8);
        const std::uint64_t elems = static_cast<std::uint64_t>(msg.c) *
                                    msg.h * msg.w;
        if (elems > kMaxTensorElems)
            throw ProtocolError("tensor payload too large");
        const std::uint8_t* payload = read_more(elems * 4);
        msg.payload.resize(elems);
        std::memcpy(msg.payload.data(), payload, elems * 4);
    } else if (msg.kind == MessageKind::Error) {
        const std::uint8_t* head = read_more(8);
        msg.error_code = get_u32(head);
        const std::uint32_t len = get_u32(head + 4);
        if (len > 1 << 16) throw ProtocolError("error text too large");
        const std::uint8_t* text = read_more(len);
        msg.error_text.assign(reinterpret_cast<const char*>(text), len);
    }

    const std::uint32_t expected = crc32_ieee(raw.data(), raw.size());
    std::uint8_t crc_raw[4];
    read_exact(crc_raw, 4);
    std::uint32_t got;
    std::memcpy(&got, crc_raw, 4);
    if (got != expected) throw ProtocolError("frame CRC mismatch");
    return msg;
}

}  // namespace evloc::split
