#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "rgbp/errors.hpp"

namespace rgbp::io {

// Little-endian primitives shared by the RGBPT/RGBPW containers. Reads
// throw FormatError carrying the stream byte offset of the failure.

inline void write_u8(std::ostream& out, std::uint8_t v) {
    out.put(static_cast<char>(v));
}

inline void write_u16(std::ostream& out, std::uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    out.write(b, 2);
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

inline void read_bytes(std::istream& in, char* dst, std::size_t count, const std::string& what) {
    const auto at = in.tellg();
    in.read(dst, static_cast<std::streamsize>(count));
    if (!in)
        throw FormatError(what + ": truncated at byte offset " +
                          std::to_string(static_cast<long long>(at)));
}

inline std::uint8_t read_u8(std::istream& in, const std::string& what) {
    char b;
    read_bytes(in, &b, 1, what);
    return static_cast<std::uint8_t>(b);
}

inline std::uint16_t read_u16(std::istream& in, const std::string& what) {
    unsigned char b[2];
    read_bytes(in, reinterpret_cast<char*>(b), 2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t read_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    read_bytes(in, reinterpret_cast<char*>(b), 4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline std::uint64_t read_u64(std::istream& in, const std::string& what) {
    unsigned char b[8];
    read_bytes(in, reinterpret_cast<char*>(b), 8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

template <typename T>
constexpr std::uint8_t dtype_code() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                  "only f32/f64 payloads are supported");
    return std::is_same_v<T, float> ? 1 : 2;
}

template <typename T>
void write_scalar(std::ostream& out, T v) {
    if constexpr (std::is_same_v<T, float>) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        write_u32(out, bits);
    } else {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        write_u64(out, bits);
    }
}

template <typename T>
T read_scalar(std::istream& in, const std::string& what) {
    T v;
    if constexpr (std::is_same_v<T, float>) {
        std::uint32_t bits = read_u32(in, what);
        std::memcpy(&v, &bits, 4);
    } else {
        std::uint64_t bits = read_u64(in, what);
        std::memcpy(&v, &bits, 8);
    }
    return v;
}

} // namespace rgbp::io
