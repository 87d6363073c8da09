#pragma once

#include <cstring>
#include <fstream>
#include <string>

#include "rgbp/io/binary.hpp"
#include "rgbp/tensor.hpp"

namespace rgbp::io {

// RGBPT tensor container: magic "RGBPT", version u16, dtype u8, rank u8,
// dims u32 x rank, payload little-endian row-major. Always rank 4 here.

inline constexpr std::uint16_t kTensorVersion = 1;

template <typename T>
void save_tensor(std::ostream& out, const Tensor<T>& t) {
    out.write("RGBPT", 5);
    write_u16(out, kTensorVersion);
    write_u8(out, dtype_code<T>());
    write_u8(out, 4);
    write_u32(out, static_cast<std::uint32_t>(t.n()));
    write_u32(out, static_cast<std::uint32_t>(t.c()));
    write_u32(out, static_cast<std::uint32_t>(t.h()));
    write_u32(out, static_cast<std::uint32_t>(t.w()));
    for (std::size_t i = 0; i < t.size(); ++i) write_scalar(out, t[i]);
    if (!out) throw FormatError("tensor: write failed");
}

template <typename T>
void save_tensor(const std::string& path, const Tensor<T>& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("tensor: cannot open " + path + " for writing");
    save_tensor(out, t);
}

template <typename T>
Tensor<T> load_tensor(std::istream& in, const std::string& what = "tensor") {
    char magic[5];
    read_bytes(in, magic, 5, what);
    if (std::memcmp(magic, "RGBPT", 5) != 0)
        throw FormatError(what + ": bad magic at byte offset 0");
    if (read_u16(in, what) != kTensorVersion)
        throw FormatError(what + ": unsupported version at byte offset 5");
    if (read_u8(in, what) != dtype_code<T>())
        throw FormatError(what + ": dtype mismatch at byte offset 7");
    const std::uint8_t rank = read_u8(in, what);
    if (rank != 4)
        throw FormatError(what + ": unsupported rank " + std::to_string(rank) +
                          " at byte offset 8");
    std::uint64_t dims[4];
    std::uint64_t total = 1;
    for (int i = 0; i < 4; ++i) {
        dims[i] = read_u32(in, what);
        if (dims[i] == 0) throw FormatError(what + ": zero dimension");
        total *= dims[i];
        if (total > (1ull << 31))
            throw FormatError(what + ": dims product overflows the container limit");
    }
    Tensor<T> t(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                static_cast<int>(dims[2]), static_cast<int>(dims[3]));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = read_scalar<T>(in, what);
    return t;
}

template <typename T>
Tensor<T> load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("tensor: cannot open " + path);
    return load_tensor<T>(in, path);
}

} // namespace rgbp::io
