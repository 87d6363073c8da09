#pragma once

#include <array>
#include <optional>
#include <sstream>
#include <string>

#include "rgbp/polar.hpp"
#include "rgbp/tensor.hpp"

namespace rgbp {

// Division-of-focal-plane sensor geometry. The polarizer grid repeats at
// pixel level (period 2); the optional Bayer grid repeats at superpixel
// level (period 4 in pixels). The commercial default is angles
// [[90,45],[135,0]] with Bayer RGGB; both are configurable because no
// single layout is universal.

struct MosaicPattern {
    // angles[r][c] in degrees, a permutation of {0,45,90,135}.
    std::array<std::array<int, 2>, 2> angles{{{90, 45}, {135, 0}}};
    // colors[r][c] in {'R','G','B'}; absent for monochrome sensors.
    std::optional<std::array<std::array<char, 2>, 2>> colors;

    void validate() const {
        int seen[4] = {0, 0, 0, 0};
        for (const auto& row : angles)
            for (int a : row) {
                const int idx = angle_index_or_throw(a);
                ++seen[idx];
            }
        for (int s : seen)
            if (s != 1)
                throw PatternError("angle layout must contain each of 0/45/90/135 once");
        if (colors) {
            int r = 0, g = 0, b = 0;
            for (const auto& row : *colors)
                for (char c : row) {
                    if (c == 'R') ++r;
                    else if (c == 'G') ++g;
                    else if (c == 'B') ++b;
                    else throw PatternError(std::string("bad color cell '") + c + "'");
                }
            if (r != 1 || g != 2 || b != 1)
                throw PatternError("color layout must be a Bayer arrangement (1R 2G 1B)");
            const auto& m = *colors;
            if (!((m[0][0] == 'G' && m[1][1] == 'G') || (m[0][1] == 'G' && m[1][0] == 'G')))
                throw PatternError("the two G cells must be diagonal");
        }
    }

    static int angle_index_or_throw(int deg) {
        switch (deg) {
            case 0: return 0;
            case 45: return 1;
            case 90: return 2;
            case 135: return 3;
        }
        throw PatternError("polarizer angle must be one of 0/45/90/135, got " +
                           std::to_string(deg));
    }

    // (row, col) offset of the given angle inside the 2x2 cell.
    std::pair<int, int> angle_offset(int deg) const {
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c)
                if (angles[r][c] == deg) return {r, c};
        throw PatternError("angle not present in layout");
    }

    // Parses "90,45;135,0".
    static std::array<std::array<int, 2>, 2> parse_angles(const std::string& s) {
        std::array<std::array<int, 2>, 2> out{};
        std::istringstream is(s);
        std::string row;
        int r = 0;
        while (std::getline(is, row, ';')) {
            if (r >= 2) throw PatternError("angle layout needs exactly 2 rows: " + s);
            std::istringstream rs(row);
            std::string cell;
            int c = 0;
            while (std::getline(rs, cell, ',')) {
                if (c >= 2) throw PatternError("angle layout needs exactly 2 columns: " + s);
                out[r][c] = std::stoi(cell);
                ++c;
            }
            if (c != 2) throw PatternError("angle layout needs exactly 2 columns: " + s);
            ++r;
        }
        if (r != 2) throw PatternError("angle layout needs exactly 2 rows: " + s);
        return out;
    }

    // Parses "RG;GB".
    static std::array<std::array<char, 2>, 2> parse_colors(const std::string& s) {
        if (s.size() != 5 || s[2] != ';')
            throw PatternError("color layout must look like \"RG;GB\": " + s);
        return {{{s[0], s[1]}, {s[3], s[4]}}};
    }
};

// A raw single-plane sensor readout plus its pattern.
template <typename T>
struct MosaicFrame {
    Tensor<T> data; // (1, 1, H, W)
    MosaicPattern pattern;
};

// Superpixel extraction: each 2x2 cell yields one pixel per angle plane.
// No interpolation, so merge_quad is an exact inverse.
template <typename T>
QuadIntensities<T> split_quad(const MosaicFrame<T>& frame) {
    frame.pattern.validate();
    if (frame.pattern.colors)
        throw PatternError("split_quad expects a monochrome pattern; use demosaic_color");
    const int H = frame.data.h(), W = frame.data.w();
    if (H % 2 != 0 || W % 2 != 0)
        throw ShapeError("split_quad: dims must be divisible by 2, got " +
                         frame.data.shape_str());
    QuadIntensities<T> q;
    Tensor<T>* planes[4] = {&q.i0, &q.i45, &q.i90, &q.i135};
    const int degs[4] = {0, 45, 90, 135};
    for (int a = 0; a < 4; ++a) {
        auto [ro, co] = frame.pattern.angle_offset(degs[a]);
        Tensor<T> plane(1, 1, H / 2, W / 2);
        for (int y = 0; y < H / 2; ++y)
            for (int x = 0; x < W / 2; ++x)
                plane(0, 0, y, x) = frame.data(0, 0, 2 * y + ro, 2 * x + co);
        *planes[a] = std::move(plane);
    }
    return q;
}

template <typename T>
MosaicFrame<T> merge_quad(const QuadIntensities<T>& quad, const MosaicPattern& pattern) {
    pattern.validate();
    quad.validate();
    if (quad.i0.c() != 1)
        throw PatternError("merge_quad expects a monochrome quad");
    const int h = quad.i0.h(), w = quad.i0.w();
    MosaicFrame<T> frame;
    frame.pattern = pattern;
    frame.data = Tensor<T>(1, 1, 2 * h, 2 * w);
    const Tensor<T>* planes[4] = {&quad.i0, &quad.i45, &quad.i90, &quad.i135};
    const int degs[4] = {0, 45, 90, 135};
    for (int a = 0; a < 4; ++a) {
        auto [ro, co] = pattern.angle_offset(degs[a]);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                frame.data(0, 0, 2 * y + ro, 2 * x + co) = (*planes[a])(0, 0, y, x);
    }
    return frame;
}

// Color superpixel extraction over 4x4 macro-pixels: per angle, R and B
// come from their single Bayer cell, G is the mean of the two G cells.
// Output planes are trichromatic (R,G,B) at H/4 x W/4.
template <typename T>
QuadIntensities<T> demosaic_color(const MosaicFrame<T>& frame) {
    frame.pattern.validate();
    if (!frame.pattern.colors)
        throw PatternError("demosaic_color expects a color pattern");
    const int H = frame.data.h(), W = frame.data.w();
    if (H % 4 != 0 || W % 4 != 0)
        throw ShapeError("demosaic_color: dims must be divisible by 4, got " +
                         frame.data.shape_str());
    const auto& colors = *frame.pattern.colors;
    QuadIntensities<T> q;
    Tensor<T>* planes[4] = {&q.i0, &q.i45, &q.i90, &q.i135};
    const int degs[4] = {0, 45, 90, 135};
    for (int a = 0; a < 4; ++a) {
        auto [ro, co] = frame.pattern.angle_offset(degs[a]);
        Tensor<T> plane(1, 3, H / 4, W / 4);
        for (int y = 0; y < H / 4; ++y) {
            for (int x = 0; x < W / 4; ++x) {
                double sum[3] = {0, 0, 0};
                int cnt[3] = {0, 0, 0};
                for (int br = 0; br < 2; ++br) {
                    for (int bc = 0; bc < 2; ++bc) {
                        const int ch = colors[br][bc] == 'R' ? 0
                                     : colors[br][bc] == 'G' ? 1 : 2;
                        sum[ch] += frame.data(0, 0, 4 * y + 2 * br + ro,
                                              4 * x + 2 * bc + co);
                        ++cnt[ch];
                    }
                }
                for (int ch = 0; ch < 3; ++ch)
                    plane(0, ch, y, x) = static_cast<T>(sum[ch] / cnt[ch]);
            }
        }
        *planes[a] = std::move(plane);
    }
    return q;
}

} // namespace rgbp
