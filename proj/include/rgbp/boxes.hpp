#pragma once

#include <algorithm>
#include <vector>

#include "rgbp/errors.hpp"

namespace rgbp {

// Axis-aligned box, top-left origin, pixel units.
struct Box {
    double x = 0, y = 0, w = 0, h = 0;
};

struct Detection {
    Box box;
    double score = 0;
    int image_id = 0;
};

struct GroundTruthBox {
    Box box;
    int image_id = 0;
};

inline double iou(const Box& a, const Box& b) {
    const double ix = std::max(a.x, b.x);
    const double iy = std::max(a.y, b.y);
    const double ix2 = std::min(a.x + a.w, b.x + b.w);
    const double iy2 = std::min(a.y + a.h, b.y + b.h);
    const double iw = ix2 - ix, ih = iy2 - iy;
    if (iw <= 0 || ih <= 0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.w * a.h + b.w * b.h - inter;
    return uni > 0 ? inter / uni : 0.0;
}

// Greedy suppression. Sort is stable, so equal scores keep input order;
// a candidate survives only if its IoU with every kept box is below the
// threshold. Output order is keep order.
inline std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh) {
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    std::vector<Detection> kept;
    for (const auto& d : dets) {
        bool ok = true;
        for (const auto& k : kept)
            if (k.image_id == d.image_id && iou(k.box, d.box) >= iou_thresh) {
                ok = false;
                break;
            }
        if (ok) kept.push_back(d);
    }
    return kept;
}

} // namespace rgbp
