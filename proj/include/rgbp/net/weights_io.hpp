#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rgbp/io/binary.hpp"
#include "rgbp/net/model.hpp"

namespace rgbp::net {

// RGBPW weight container. Header: magic "RGBPW", version u16, entry
// count u32. Each entry: name (u16 length + bytes), dtype u8, rank u8,
// dims u32 x rank, payload little-endian. Tensors have rank 4, flat
// vectors rank 1. Round trips are bit-exact.

inline constexpr std::uint16_t kWeightsVersion = 1;

template <typename T>
void save_weights(std::ostream& out, const NetWeights<T>& w) {
    std::uint32_t count = 0;
    visit_net(const_cast<NetWeights<T>&>(w),
              [&](const std::string&, auto&, bool) { ++count; });
    out.write("RGBPW", 5);
    io::write_u16(out, kWeightsVersion);
    io::write_u32(out, count);
    visit_net(const_cast<NetWeights<T>&>(w), [&](const std::string& name, auto& p, bool) {
        using P = std::decay_t<decltype(p)>;
        io::write_u16(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        io::write_u8(out, io::dtype_code<T>());
        if constexpr (std::is_same_v<P, Tensor<T>>) {
            io::write_u8(out, 4);
            io::write_u32(out, static_cast<std::uint32_t>(p.n()));
            io::write_u32(out, static_cast<std::uint32_t>(p.c()));
            io::write_u32(out, static_cast<std::uint32_t>(p.h()));
            io::write_u32(out, static_cast<std::uint32_t>(p.w()));
            for (std::size_t i = 0; i < p.size(); ++i) io::write_scalar(out, p[i]);
        } else {
            io::write_u8(out, 1);
            io::write_u32(out, static_cast<std::uint32_t>(p.size()));
            for (auto x : p) io::write_scalar(out, x);
        }
    });
    if (!out) throw FormatError("weights: write failed");
}

template <typename T>
void save_weights(const std::string& path, const NetWeights<T>& w) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("weights: cannot open " + path + " for writing");
    save_weights(out, w);
}

// Loads into a weight set freshly built from `cfg`; entry names must
// match the visit order set exactly.
template <typename T>
NetWeights<T> load_weights(std::istream& in, const NetworkConfig& cfg) {
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, "RGBPW", 5) != 0)
        throw FormatError("weights: bad magic");
    if (io::read_u16(in, "weights") != kWeightsVersion)
        throw FormatError("weights: unsupported version");
    const std::uint32_t count = io::read_u32(in, "weights");

    struct Entry {
        std::vector<std::uint32_t> dims;
        std::vector<T> payload;
    };
    std::map<std::string, Entry> entries;
    for (std::uint32_t e = 0; e < count; ++e) {
        const std::uint16_t len = io::read_u16(in, "weights");
        std::string name(len, '\0');
        in.read(name.data(), len);
        if (!in) throw FormatError("weights: truncated entry name");
        const std::uint8_t dtype = io::read_u8(in, name);
        if (dtype != io::dtype_code<T>())
            throw FormatError("weights: dtype mismatch in entry '" + name + "'");
        const std::uint8_t rank = io::read_u8(in, name);
        if (rank != 1 && rank != 4)
            throw FormatError("weights: bad rank in entry '" + name + "'");
        Entry ent;
        std::uint64_t total = 1;
        for (int d = 0; d < rank; ++d) {
            ent.dims.push_back(io::read_u32(in, name));
            total *= ent.dims.back();
            if (total > (1ull << 32))
                throw FormatError("weights: dims overflow in entry '" + name + "'");
        }
        ent.payload.resize(total);
        for (auto& x : ent.payload) x = io::read_scalar<T>(in, name);
        if (!entries.emplace(std::move(name), std::move(ent)).second)
            throw FormatError("weights: duplicate entry");
    }

    auto w = make_net_weights<T>(cfg);
    std::set<std::string> used;
    visit_net(w, [&](const std::string& name, auto& p, bool) {
        auto it = entries.find(name);
        if (it == entries.end())
            throw FormatError("weights: missing entry '" + name + "'");
        used.insert(name);
        const auto& ent = it->second;
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, Tensor<T>>) {
            if (ent.dims.size() != 4 || static_cast<int>(ent.dims[0]) != p.n() ||
                static_cast<int>(ent.dims[1]) != p.c() ||
                static_cast<int>(ent.dims[2]) != p.h() ||
                static_cast<int>(ent.dims[3]) != p.w())
                throw FormatError("weights: shape mismatch in entry '" + name + "'");
            for (std::size_t i = 0; i < p.size(); ++i) p[i] = ent.payload[i];
        } else {
            if (ent.dims.size() != 1 || ent.dims[0] != p.size())
                throw FormatError("weights: size mismatch in entry '" + name + "'");
            for (std::size_t i = 0; i < p.size(); ++i) p[i] = ent.payload[i];
        }
    });
    for (const auto& [name, ent] : entries)
        if (!used.count(name))
            throw FormatError("weights: unexpected entry '" + name + "'");
    return w;
}

template <typename T>
NetWeights<T> load_weights(const std::string& path, const NetworkConfig& cfg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("weights: cannot open " + path);
    return load_weights<T>(in, cfg);
}

} // namespace rgbp::net
