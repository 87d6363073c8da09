#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "rgbp/boxes.hpp"

namespace rgbp::eval {

struct EvalResult {
    double ap = 0;   // mean over IoU thresholds 0.50:0.05:0.95
    double ap50 = 0;
    double ap75 = 0;
    std::vector<double> per_threshold; // ten entries, 0.50 first
};

inline const std::vector<double>& coco_thresholds() {
    static const std::vector<double> t = {0.50, 0.55, 0.60, 0.65, 0.70,
                                          0.75, 0.80, 0.85, 0.90, 0.95};
    return t;
}

// TP/FP flags per detection, in the given (score-sorted) order. A
// detection claims the unmatched ground truth with the highest IoU when
// that IoU reaches the threshold; IoU ties go to the lower GT index.
inline std::vector<bool> greedy_match(const std::vector<Detection>& dets,
                                      const std::vector<GroundTruthBox>& gts,
                                      double thresh) {
    std::vector<bool> tp(dets.size(), false);
    std::vector<bool> taken(gts.size(), false);
    for (std::size_t d = 0; d < dets.size(); ++d) {
        double best = 0;
        int best_g = -1;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (taken[g] || gts[g].image_id != dets[d].image_id) continue;
            const double v = iou(dets[d].box, gts[g].box);
            if (v > best) {
                best = v;
                best_g = static_cast<int>(g);
            }
        }
        if (best_g >= 0 && best >= thresh) {
            tp[d] = true;
            taken[best_g] = true;
        }
    }
    return tp;
}

// 101-point interpolated AP from an ordered TP/FP sequence. With no
// ground truth, recall is undefined; the result is pinned to 0 whether
// or not detections exist.
inline double average_precision(const std::vector<bool>& tp, std::size_t num_gt) {
    if (num_gt == 0) return 0.0;
    std::vector<double> precision, recall;
    std::size_t cum_tp = 0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
        if (tp[i]) ++cum_tp;
        precision.push_back(static_cast<double>(cum_tp) / (i + 1));
        recall.push_back(static_cast<double>(cum_tp) / num_gt);
    }
    double sum = 0;
    for (int r = 0; r <= 100; ++r) {
        const double target = r / 100.0;
        double best = 0;
        for (std::size_t i = 0; i < precision.size(); ++i)
            if (recall[i] >= target) best = std::max(best, precision[i]);
        sum += best;
    }
    return sum / 101.0;
}

// Stable score-descending order; equal scores keep input order.
inline std::vector<Detection> sort_by_score(std::vector<Detection> dets) {
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    return dets;
}

inline EvalResult coco_ap(const std::vector<Detection>& dets_in,
                          const std::vector<GroundTruthBox>& gts,
                          const std::set<int>& known_images) {
    for (const auto& d : dets_in)
        if (!known_images.count(d.image_id))
            throw ValidationError("eval: detection references unknown image_id " +
                                  std::to_string(d.image_id));
    auto dets = sort_by_score(dets_in);
    EvalResult res;
    for (double t : coco_thresholds()) {
        const double ap = average_precision(greedy_match(dets, gts, t), gts.size());
        res.per_threshold.push_back(ap);
        res.ap += ap;
        if (t == 0.50) res.ap50 = ap;
        if (t == 0.75) res.ap75 = ap;
    }
    res.ap /= static_cast<double>(coco_thresholds().size());
    return res;
}

// Convenience overload: every image referenced by the ground truth is known.
inline EvalResult coco_ap(const std::vector<Detection>& dets,
                          const std::vector<GroundTruthBox>& gts) {
    std::set<int> ids;
    for (const auto& g : gts) ids.insert(g.image_id);
    for (const auto& d : dets) ids.insert(d.image_id);
    return coco_ap(dets, gts, ids);
}

} // namespace rgbp::eval
