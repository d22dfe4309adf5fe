#pragma once

#include <bit>
#include <cstdint>
#include <vector>

namespace avar {

// Little-endian packing, independent of host byte order.

inline void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

inline uint32_t get_u32le(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline void put_u64le(std::vector<uint8_t>& out, uint64_t v) {
    put_u32le(out, static_cast<uint32_t>(v & 0xffffffffull));
    put_u32le(out, static_cast<uint32_t>(v >> 32));
}

inline uint64_t get_u64le(const uint8_t* p) {
    return static_cast<uint64_t>(get_u32le(p)) |
           (static_cast<uint64_t>(get_u32le(p + 4)) << 32);
}

inline void put_f32le(std::vector<uint8_t>& out, float v) {
    put_u32le(out, std::bit_cast<uint32_t>(v));
}

inline float get_f32le(const uint8_t* p) { return std::bit_cast<float>(get_u32le(p)); }

inline void put_f64le(std::vector<uint8_t>& out, double v) {
    put_u64le(out, std::bit_cast<uint64_t>(v));
}

inline double get_f64le(const uint8_t* p) { return std::bit_cast<double>(get_u64le(p)); }

}  // namespace avar
