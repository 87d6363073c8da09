#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgbp/boxes.hpp"
#include "rgbp/io/tensor_io.hpp"
#include "rgbp/polar.hpp"
#include "rgbp/rng.hpp"

namespace rgbp::io {

// -------- triplets --------

template <typename T>
struct TripletSample {
    Tensor<T> rgb;  // [0,1]
    Tensor<T> aolp; // radians, [0,pi)
    Tensor<T> dolp; // [0,1]
    int image_id = 0;

    void validate() const {
        if (!rgb.same_shape(aolp) || !rgb.same_shape(dolp))
            throw ShapeError("triplet: misaligned planes " + rgb.shape_str() + " / " +
                             aolp.shape_str() + " / " + dolp.shape_str());
        for (std::size_t i = 0; i < rgb.size(); ++i)
            if (rgb[i] < 0 || rgb[i] > 1)
                throw ValidationError("triplet: rgb value out of [0,1]");
        for (std::size_t i = 0; i < aolp.size(); ++i)
            if (aolp[i] < 0 || aolp[i] >= kPi)
                throw ValidationError("triplet: aolp value out of [0,pi)");
        for (std::size_t i = 0; i < dolp.size(); ++i)
            if (dolp[i] < 0 || dolp[i] > 1)
                throw ValidationError("triplet: dolp value out of [0,1]");
    }
};

// Directory layout: rgb/<id>.rgbpt, aolp/<id>.rgbpt, dolp/<id>.rgbpt.
// AoLP is stored normalized to [0,1] on disk and rescaled by pi on load.
template <typename T>
TripletSample<T> load_triplet(const std::string& dir, int image_id) {
    const std::string stem = std::to_string(image_id) + ".rgbpt";
    TripletSample<T> s;
    s.image_id = image_id;
    s.rgb = load_tensor<T>(dir + "/rgb/" + stem);
    s.aolp = load_tensor<T>(dir + "/aolp/" + stem);
    s.dolp = load_tensor<T>(dir + "/dolp/" + stem);
    if (!s.rgb.same_shape(s.aolp) || !s.rgb.same_shape(s.dolp))
        throw ShapeError("triplet " + std::to_string(image_id) + ": misaligned planes " +
                         s.rgb.shape_str() + " / " + s.aolp.shape_str() + " / " +
                         s.dolp.shape_str());
    for (std::size_t i = 0; i < s.aolp.size(); ++i) {
        if (s.aolp[i] < 0 || s.aolp[i] > 1)
            throw ValidationError("triplet " + std::to_string(image_id) +
                                  ": stored aolp out of [0,1]");
        s.aolp[i] = static_cast<T>(std::min(static_cast<double>(s.aolp[i]) * kPi,
                                            std::nextafter(kPi, 0.0)));
    }
    s.validate();
    return s;
}

template <typename T>
void save_triplet(const std::string& dir, const TripletSample<T>& s) {
    s.validate();
    const std::string stem = std::to_string(s.image_id) + ".rgbpt";
    save_tensor(dir + "/rgb/" + stem, s.rgb);
    Tensor<T> norm = s.aolp;
    for (std::size_t i = 0; i < norm.size(); ++i)
        norm[i] = static_cast<T>(norm[i] / kPi);
    save_tensor(dir + "/aolp/" + stem, norm);
    save_tensor(dir + "/dolp/" + stem, s.dolp);
}

// -------- annotations --------

struct AnnotationSet {
    struct Image {
        int id = 0;
        int width = 0;
        int height = 0;
        std::string file;
    };
    struct Entry {
        int image_id = 0;
        Box box;
        bool has_score = false;
        double score = 0;
    };
    std::vector<Image> images;
    std::vector<Entry> entries;

    void validate() const {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const auto& e = entries[i];
            if (e.box.w <= 0 || e.box.h <= 0)
                throw ValidationError("/annotations/" + std::to_string(i) +
                                      "/bbox: non-positive extent");
            bool found = false;
            for (const auto& img : images) found |= (img.id == e.image_id);
            if (!found)
                throw ValidationError("/annotations/" + std::to_string(i) +
                                      "/image_id: unknown image " + std::to_string(e.image_id));
        }
    }

    std::vector<GroundTruthBox> ground_truth() const {
        std::vector<GroundTruthBox> out;
        for (const auto& e : entries)
            if (!e.has_score) out.push_back({e.box, e.image_id});
        return out;
    }

    std::vector<Detection> detections() const {
        std::vector<Detection> out;
        for (const auto& e : entries)
            if (e.has_score) out.push_back({e.box, e.score, e.image_id});
        return out;
    }
};

inline AnnotationSet parse_annotations(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("annotations: malformed JSON: ") + e.what());
    }
    AnnotationSet set;
    if (!j.contains("images") || !j["images"].is_array())
        throw ValidationError("/images: missing or not an array");
    if (!j.contains("annotations") || !j["annotations"].is_array())
        throw ValidationError("/annotations: missing or not an array");
    for (std::size_t i = 0; i < j["images"].size(); ++i) {
        const auto& im = j["images"][i];
        const std::string path = "/images/" + std::to_string(i);
        for (const char* key : {"id", "width", "height", "file"})
            if (!im.contains(key)) throw ValidationError(path + ": missing key '" + key + "'");
        if (!im["id"].is_number_integer() || !im["width"].is_number_integer() ||
            !im["height"].is_number_integer() || !im["file"].is_string())
            throw ValidationError(path + ": wrong field type");
        set.images.push_back({im["id"].get<int>(), im["width"].get<int>(),
                              im["height"].get<int>(), im["file"].get<std::string>()});
        if (set.images.back().width <= 0 || set.images.back().height <= 0)
            throw ValidationError(path + ": non-positive image size");
    }
    for (std::size_t i = 0; i < j["annotations"].size(); ++i) {
        const auto& an = j["annotations"][i];
        const std::string path = "/annotations/" + std::to_string(i);
        if (!an.contains("image_id") || !an["image_id"].is_number_integer())
            throw ValidationError(path + "/image_id: missing or not an integer");
        if (!an.contains("bbox") || !an["bbox"].is_array() || an["bbox"].size() != 4)
            throw ValidationError(path + "/bbox: expected [x, y, w, h]");
        AnnotationSet::Entry e;
        e.image_id = an["image_id"].get<int>();
        for (int d = 0; d < 4; ++d)
            if (!an["bbox"][d].is_number())
                throw ValidationError(path + "/bbox/" + std::to_string(d) + ": not a number");
        e.box = {an["bbox"][0].get<double>(), an["bbox"][1].get<double>(),
                 an["bbox"][2].get<double>(), an["bbox"][3].get<double>()};
        if (an.contains("score")) {
            if (!an["score"].is_number())
                throw ValidationError(path + "/score: not a number");
            e.has_score = true;
            e.score = an["score"].get<double>();
            if (e.score < 0 || e.score > 1)
                throw ValidationError(path + "/score: out of [0,1]");
        }
        set.entries.push_back(e);
    }
    set.validate();
    return set;
}

inline AnnotationSet load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("annotations: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_annotations(buf.str());
}

// Canonical form: fixed key order (images: id/width/height/file;
// annotations: image_id/bbox/score), 6-decimal floats, two-space indent.
inline std::string serialize_annotations(const AnnotationSet& set) {
    auto num = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        return std::string(buf);
    };
    std::ostringstream out;
    out << "{\n  \"images\": [";
    for (std::size_t i = 0; i < set.images.size(); ++i) {
        const auto& im = set.images[i];
        out << (i ? "," : "") << "\n    {\"id\": " << im.id << ", \"width\": " << im.width
            << ", \"height\": " << im.height << ", \"file\": \"" << im.file << "\"}";
    }
    out << (set.images.empty() ? "" : "\n  ") << "],\n  \"annotations\": [";
    for (std::size_t i = 0; i < set.entries.size(); ++i) {
        const auto& e = set.entries[i];
        out << (i ? "," : "") << "\n    {\"image_id\": " << e.image_id << ", \"bbox\": ["
            << num(e.box.x) << ", " << num(e.box.y) << ", " << num(e.box.w) << ", "
            << num(e.box.h) << "]";
        if (e.has_score) out << ", \"score\": " << num(e.score);
        out << "}";
    }
    out << (set.entries.empty() ? "" : "\n  ") << "]\n}\n";
    return out.str();
}

inline void save_annotations(const std::string& path, const AnnotationSet& set) {
    set.validate();
    std::ofstream out(path);
    if (!out) throw FormatError("annotations: cannot open " + path + " for writing");
    out << serialize_annotations(set);
}

// -------- synthetic scenes --------

struct SynthParams {
    int width = 64;
    int height = 64;
    int min_boxes = 1;
    int max_boxes = 3;
    int box_min = 10; // box side, pixels
    int box_max = 24;
    double bg_dolp_max = 0.05;  // background rho ~ U[0, bg_dolp_max]
    double obj_dolp_min = 0.5;  // object rho ~ U[obj_dolp_min, obj_dolp_max]
    double obj_dolp_max = 0.9;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (width < 8 || height < 8) throw ValidationError("synth: image too small");
        if (min_boxes < 0 || max_boxes < min_boxes)
            throw ValidationError("synth: bad box count range");
        if (box_min < 2 || box_max < box_min || box_max > std::min(width, height))
            throw ValidationError("synth: bad box size range");
        if (bg_dolp_max < 0 || bg_dolp_max > 1 || obj_dolp_min < 0 ||
            obj_dolp_max > 1 || obj_dolp_max < obj_dolp_min)
            throw ValidationError("synth: dolp ranges out of [0,1]");
        if (noise_sigma < 0) throw ValidationError("synth: negative noise sigma");
    }
};

struct SynthScene {
    QuadIntensities<double> quad;  // noisy sensor planes, (1,3,H,W)
    TripletSample<double> truth;   // noiseless ground-truth maps
    AnnotationSet annotations;
};

// Paints high-DoLP rectangles over a low-DoLP background, then renders
// the four analyzer intensities through the Malus inverse. Everything is
// a pure function of the seed.
inline SynthScene synth_scene(const SynthParams& p, int image_id = 0) {
    p.validate();
    Rng rng(p.seed);
    const int H = p.height, W = p.width, C = 3;

    // background field
    Tensor<double> s0(1, C, H, W), aolp(1, C, H, W), dolp(1, C, H, W);
    for (int c = 0; c < C; ++c)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                s0(0, c, h, w) = rng.uniform(0.3, 0.9);
                aolp(0, c, h, w) = rng.uniform(0.0, kPi);
                dolp(0, c, h, w) = rng.uniform(0.0, p.bg_dolp_max);
            }

    // non-overlapping boxes, bounded retries
    const int want = p.min_boxes +
                     static_cast<int>(rng.below(static_cast<std::uint64_t>(
                         p.max_boxes - p.min_boxes + 1)));
    std::vector<Box> placed;
    for (int b = 0; b < want; ++b) {
        bool ok = false;
        for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
            const int bw = p.box_min + static_cast<int>(rng.below(p.box_max - p.box_min + 1));
            const int bh = p.box_min + static_cast<int>(rng.below(p.box_max - p.box_min + 1));
            const int bx = static_cast<int>(rng.below(W - bw + 1));
            const int by = static_cast<int>(rng.below(H - bh + 1));
            Box cand{static_cast<double>(bx), static_cast<double>(by),
                     static_cast<double>(bw), static_cast<double>(bh)};
            ok = true;
            for (const auto& q : placed)
                if (iou(cand, q) > 0 || (cand.x < q.x + q.w && q.x < cand.x + cand.w &&
                                         cand.y < q.y + q.h && q.y < cand.y + cand.h))
                    ok = false;
            if (!ok) continue;
            placed.push_back(cand);
            const double rho = rng.uniform(p.obj_dolp_min, p.obj_dolp_max);
            const double phi = rng.uniform(0.0, kPi);
            for (int c = 0; c < C; ++c)
                for (int h = by; h < by + bh; ++h)
                    for (int w = bx; w < bx + bw; ++w) {
                        dolp(0, c, h, w) = rho;
                        aolp(0, c, h, w) = phi;
                    }
        }
        if (!ok)
            throw PlacementError("synth: could not place box " + std::to_string(b + 1) +
                                 " of " + std::to_string(want) + " without overlap");
    }

    // Stokes from the maps, then the sensor view
    StokesImage<double> st;
    st.s0 = s0;
    st.s1 = s0.zeros_like();
    st.s2 = s0.zeros_like();
    for (std::size_t i = 0; i < s0.size(); ++i) {
        st.s1[i] = s0[i] * dolp[i] * std::cos(2.0 * aolp[i]);
        st.s2[i] = s0[i] * dolp[i] * std::sin(2.0 * aolp[i]);
    }

    SynthScene scene;
    scene.quad = synthesize_intensities(st);
    if (p.noise_sigma > 0)
        for (Tensor<double>* t :
             {&scene.quad.i0, &scene.quad.i45, &scene.quad.i90, &scene.quad.i135})
            for (std::size_t i = 0; i < t->size(); ++i)
                (*t)[i] += p.noise_sigma * rng.gauss();

    scene.truth.rgb = s0.zeros_like();
    for (std::size_t i = 0; i < s0.size(); ++i)
        scene.truth.rgb[i] = std::min(1.0, std::max(0.0, s0[i]));
    scene.truth.aolp = aolp;
    scene.truth.dolp = dolp;
    scene.truth.image_id = image_id;

    scene.annotations.images.push_back(
        {image_id, W, H, std::to_string(image_id)});
    for (const auto& b : placed) scene.annotations.entries.push_back({image_id, b, false, 0});
    return scene;
}

} // namespace rgbp::io
