// rgbp: command-line front end for the polarimetric toolkit.
//
// Subcommands: stokes, demosaic, synth, forward, eval, gradcheck.
// Exit codes: 0 success, 1 validation/input error, 2 internal error,
// 64 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rgbp/eval.hpp"
#include "rgbp/gradcheck_suite.hpp"
#include "rgbp/io/dataset.hpp"
#include "rgbp/mosaic.hpp"
#include "rgbp/net/weights_io.hpp"

namespace fs = std::filesystem;
using namespace rgbp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitInternal = 2;
constexpr int kExitUsage = 64;

// Numeric image ids from <id>.rgbpt files in a directory, ascending.
std::vector<int> scan_ids(const fs::path& dir) {
    std::vector<int> ids;
    if (!fs::is_directory(dir))
        throw NotFoundError("missing directory " + dir.string());
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (entry.path().extension() != ".rgbpt") continue;
        try {
            ids.push_back(std::stoi(entry.path().stem().string()));
        } catch (const std::exception&) {
            throw ValidationError("non-numeric tensor file name: " + name);
        }
    }
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw NotFoundError("no .rgbpt files in " + dir.string());
    return ids;
}

// Quad planes travel as one (4,C,H,W) tensor, angle-major 0/45/90/135.
Tensor<double> pack_quad(const QuadIntensities<double>& q) {
    const int C = q.i0.c(), H = q.i0.h(), W = q.i0.w();
    Tensor<double> t(4, C, H, W);
    const Tensor<double>* planes[4] = {&q.i0, &q.i45, &q.i90, &q.i135};
    for (int a = 0; a < 4; ++a)
        for (int c = 0; c < C; ++c)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) t(a, c, h, w) = (*planes[a])(0, c, h, w);
    return t;
}

QuadIntensities<double> unpack_quad(const Tensor<double>& t) {
    if (t.n() != 4)
        throw ShapeError("quad tensor must have 4 angle planes, got " + t.shape_str());
    QuadIntensities<double> q;
    Tensor<double>* planes[4] = {&q.i0, &q.i45, &q.i90, &q.i135};
    for (int a = 0; a < 4; ++a) {
        Tensor<double> p(1, t.c(), t.h(), t.w());
        for (int c = 0; c < t.c(); ++c)
            for (int h = 0; h < t.h(); ++h)
                for (int w = 0; w < t.w(); ++w) p(0, c, h, w) = t(a, c, h, w);
        *planes[a] = std::move(p);
    }
    return q;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// 8-bit binary PGM of channel 0, values mapped from [0, scale] to [0,255].
void write_pgm(const fs::path& path, const Tensor<double>& t, double scale) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    out << "P5\n" << t.w() << " " << t.h() << "\n255\n";
    for (int h = 0; h < t.h(); ++h)
        for (int w = 0; w < t.w(); ++w) {
            const double v = t(0, 0, h, w) / scale * 256.0;
            const int b = std::clamp(static_cast<int>(v), 0, 255);
            out.put(static_cast<char>(b));
        }
}

MosaicPattern make_pattern(const std::string& angles, const std::string& bayer) {
    MosaicPattern p;
    if (!angles.empty()) p.angles = MosaicPattern::parse_angles(angles);
    if (!bayer.empty()) p.colors = MosaicPattern::parse_colors(bayer);
    p.validate();
    return p;
}

net::NetworkConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    auto cfg = net::parse_network_config(read_text(path));
    cfg.validate();
    return cfg;
}

// -------- subcommand bodies --------

struct SynthArgs {
    std::string out;
    std::uint64_t seed = 0;
    int count = 1;
    int boxes = -1; // fixed box count; -1 keeps the default 1..3 range
    int width = 64, height = 64;
    double noise = 0.0;
};

int run_synth(const SynthArgs& a) {
    io::SynthParams p;
    p.width = a.width;
    p.height = a.height;
    p.noise_sigma = a.noise;
    if (a.boxes >= 0) p.min_boxes = p.max_boxes = a.boxes;
    p.validate();
    if (a.count < 1) throw ValidationError("synth: --count must be positive");

    fs::create_directories(fs::path(a.out) / "quad");
    io::AnnotationSet all;
    for (int id = 0; id < a.count; ++id) {
        io::SynthParams pi = p;
        pi.seed = a.seed + static_cast<std::uint64_t>(id);
        auto scene = io::synth_scene(pi, id);
        io::save_tensor((fs::path(a.out) / "quad" / (std::to_string(id) + ".rgbpt")).string(),
                        pack_quad(scene.quad));
        all.images.insert(all.images.end(), scene.annotations.images.begin(),
                          scene.annotations.images.end());
        all.entries.insert(all.entries.end(), scene.annotations.entries.begin(),
                           scene.annotations.entries.end());
    }
    io::save_annotations((fs::path(a.out) / "annotations.json").string(), all);
    return kExitOk;
}

struct StokesArgs {
    std::string in, out;
    std::string angles, bayer; // mosaic pattern, used for in/mosaic inputs
    bool viz = false;
};

int run_stokes(const StokesArgs& a) {
    const fs::path in(a.in), out(a.out);
    const bool have_quad = fs::is_directory(in / "quad");
    const bool have_mosaic = fs::is_directory(in / "mosaic");
    if (!have_quad && !have_mosaic)
        throw NotFoundError("stokes: expected " + (in / "quad").string() + " or " +
                            (in / "mosaic").string());

    for (const char* sub : {"rgb", "aolp", "dolp", "s0", "s1", "s2"})
        fs::create_directories(out / sub);
    if (a.viz) fs::create_directories(out / "viz");

    const auto ids = scan_ids(in / (have_quad ? "quad" : "mosaic"));
    for (int id : ids) {
        const std::string stem = std::to_string(id) + ".rgbpt";
        QuadIntensities<double> quad;
        if (have_quad) {
            quad = unpack_quad(io::load_tensor<double>((in / "quad" / stem).string()));
        } else {
            MosaicFrame<double> frame;
            frame.data = io::load_tensor<double>((in / "mosaic" / stem).string());
            frame.pattern = make_pattern(a.angles, a.bayer);
            quad = frame.pattern.colors ? demosaic_color(frame) : split_quad(frame);
        }
        auto stokes = compute_stokes(quad);
        auto maps = compute_polar_maps(stokes);

        io::save_tensor((out / "s0" / stem).string(), stokes.s0);
        io::save_tensor((out / "s1" / stem).string(), stokes.s1);
        io::save_tensor((out / "s2" / stem).string(), stokes.s2);

        io::TripletSample<double> trip;
        trip.image_id = id;
        trip.rgb = stokes.s0;
        for (std::size_t i = 0; i < trip.rgb.size(); ++i)
            trip.rgb[i] = std::clamp(trip.rgb[i], 0.0, 1.0);
        trip.aolp = maps.aolp;
        trip.dolp = maps.dolp;
        io::save_triplet(out.string(), trip);

        if (a.viz) {
            write_pgm(out / "viz" / ("aolp_" + std::to_string(id) + ".pgm"), maps.aolp, kPi);
            write_pgm(out / "viz" / ("dolp_" + std::to_string(id) + ".pgm"), maps.dolp, 1.0);
        }
    }
    if (fs::exists(in / "annotations.json"))
        fs::copy_file(in / "annotations.json", out / "annotations.json",
                      fs::copy_options::overwrite_existing);
    return kExitOk;
}

struct DemosaicArgs {
    std::string in, out;
    std::string angles, bayer;
};

int run_demosaic(const DemosaicArgs& a) {
    const auto pattern = make_pattern(a.angles, a.bayer);
    auto convert = [&](const std::string& src, const std::string& dst) {
        MosaicFrame<double> frame;
        frame.data = io::load_tensor<double>(src);
        frame.pattern = pattern;
        auto quad = pattern.colors ? demosaic_color(frame) : split_quad(frame);
        io::save_tensor(dst, pack_quad(quad));
    };
    if (fs::is_directory(a.in)) {
        fs::create_directories(fs::path(a.out) / "quad");
        for (int id : scan_ids(fs::path(a.in) / "mosaic")) {
            const std::string stem = std::to_string(id) + ".rgbpt";
            convert((fs::path(a.in) / "mosaic" / stem).string(),
                    (fs::path(a.out) / "quad" / stem).string());
        }
    } else {
        if (const auto parent = fs::path(a.out).parent_path(); !parent.empty())
            fs::create_directories(parent);
        convert(a.in, a.out);
    }
    return kExitOk;
}

struct ForwardArgs {
    std::string in, out;
    std::string config, weights;
    std::optional<std::uint64_t> seed;
};

int run_forward(const ForwardArgs& a) {
    auto cfg = load_config(a.config);
    if (a.seed) cfg.seed = *a.seed;
    net::NetWeights<double> w = a.weights.empty()
                                    ? net::init_weights<double>(cfg)
                                    : net::load_weights<double>(a.weights, cfg);

    io::AnnotationSet dets;
    for (int id : scan_ids(fs::path(a.in) / "rgb")) {
        auto trip = io::load_triplet<double>(a.in, id);
        Tensor<double> aolp_norm = trip.aolp;
        for (std::size_t i = 0; i < aolp_norm.size(); ++i) aolp_norm[i] /= kPi;
        auto found = net::detect(trip.rgb, aolp_norm, trip.dolp, cfg, w, id);
        dets.images.push_back({id, trip.rgb.w(), trip.rgb.h(), std::to_string(id)});
        for (const auto& d : found) dets.entries.push_back({id, d.box, true, d.score});
    }
    if (const auto parent = fs::path(a.out).parent_path(); !parent.empty())
        fs::create_directories(parent);
    io::save_annotations(a.out, dets);
    return kExitOk;
}

struct EvalArgs {
    std::string dets, gt;
};

// Out-of-bounds ground truth is clipped to the image (with a warning)
// rather than rejected; real annotation data commonly has edge boxes.
int run_eval(const EvalArgs& a) {
    auto gt_set = io::load_annotations(a.gt);
    auto det_set = io::load_annotations(a.dets);

    std::map<int, std::pair<int, int>> bounds; // id -> (W, H)
    std::set<int> known;
    for (const auto& im : gt_set.images) {
        bounds[im.id] = {im.width, im.height};
        known.insert(im.id);
    }
    auto gts = gt_set.ground_truth();
    for (auto& g : gts) {
        const auto [W, H] = bounds.at(g.image_id);
        const double x2 = std::min(g.box.x + g.box.w, static_cast<double>(W));
        const double y2 = std::min(g.box.y + g.box.h, static_cast<double>(H));
        Box clipped{std::max(g.box.x, 0.0), std::max(g.box.y, 0.0), 0, 0};
        clipped.w = x2 - clipped.x;
        clipped.h = y2 - clipped.y;
        if (clipped.w <= 0 || clipped.h <= 0)
            throw ValidationError("eval: ground-truth box fully outside image " +
                                  std::to_string(g.image_id));
        if (clipped.x != g.box.x || clipped.y != g.box.y || clipped.w != g.box.w ||
            clipped.h != g.box.h) {
            std::cerr << "warning: clipping out-of-bounds ground-truth box in image "
                      << g.image_id << "\n";
            g.box = clipped;
        }
    }
    // every entry in the detections file is a detection; a missing
    // score means full confidence
    std::vector<Detection> dets;
    for (const auto& e : det_set.entries)
        dets.push_back({e.box, e.has_score ? e.score : 1.0, e.image_id});
    auto res = eval::coco_ap(dets, gts, known);
    std::printf("%.4f %.4f %.4f\n", res.ap, res.ap50, res.ap75);
    return kExitOk;
}

struct GradcheckArgs {
    std::string module = "all";
    std::uint64_t seed = 42;
};

int run_gradcheck(const GradcheckArgs& a) {
    std::vector<ops::GradCheckReport> reps;
    const std::string& m = a.module;
    const std::uint64_t s = a.seed;
    if (m == "all") {
        reps = suite::run_all(s);
    } else if (m == "conv") {
        reps.push_back(suite::check_conv(s, false));
        reps.push_back(suite::check_conv(s + 1, true));
    } else if (m == "batch_norm") {
        reps.push_back(suite::check_batch_norm(s));
    } else if (m == "fully_connected") {
        reps.push_back(suite::check_fully_connected(s));
    } else if (m == "activations") {
        reps = suite::check_activations(s);
    } else if (m == "pool") {
        reps = suite::check_pools(s);
    } else if (m == "scharr") {
        reps.push_back(suite::check_scharr(s));
    } else if (m == "pi") {
        reps.push_back(suite::check_pi(s));
    } else if (m == "msp") {
        reps.push_back(suite::check_mp(net::MpVariant::kSpatial, s));
    } else if (m == "mcp") {
        reps.push_back(suite::check_mp(net::MpVariant::kChannel, s));
    } else if (m == "sdmd") {
        reps.push_back(suite::check_sdmd(s));
    } else if (m == "cwda") {
        reps.push_back(suite::check_cwda(s));
    } else if (m == "cddq") {
        reps.push_back(suite::check_sdmd(s));
        reps.push_back(suite::check_cwda(s + 1));
    } else if (m == "model") {
        reps.push_back(suite::check_model(s));
    } else {
        throw ValidationError(
            "gradcheck: unknown module '" + m +
            "' (expected one of: all conv batch_norm fully_connected activations "
            "pool scharr pi msp mcp sdmd cwda cddq model)");
    }
    bool ok = true;
    for (const auto& r : reps) {
        std::printf("%s %s %.3e\n", r.name.c_str(), r.pass ? "pass" : "fail",
                    r.max_rel_err);
        ok &= r.pass;
    }
    return ok ? kExitOk : kExitValidation;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rgbp: polarimetric imaging and detection toolkit"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* sc_synth = app.add_subcommand("synth", "Generate seeded synthetic polarized scenes");
    sc_synth->add_option("--out", synth.out, "Output directory")->required();
    sc_synth->add_option("--seed", synth.seed, "Base seed (frame i uses seed + i)");
    sc_synth->add_option("--count", synth.count, "Number of frames");
    sc_synth->add_option("--boxes", synth.boxes, "Fixed box count per frame");
    sc_synth->add_option("--width", synth.width, "Frame width");
    sc_synth->add_option("--height", synth.height, "Frame height");
    sc_synth->add_option("--noise", synth.noise, "Gaussian noise sigma on intensities");

    StokesArgs stokes;
    auto* sc_stokes =
        app.add_subcommand("stokes", "Quad or mosaic input to Stokes, AoLP and DoLP planes");
    sc_stokes->add_option("--in", stokes.in, "Input directory (quad/ or mosaic/)")->required();
    sc_stokes->add_option("--out", stokes.out, "Output directory")->required();
    sc_stokes->add_option("--angles", stokes.angles, "Polarizer layout, e.g. \"90,45;135,0\"");
    sc_stokes->add_option("--bayer", stokes.bayer, "Bayer layout, e.g. \"RG;GB\"");
    sc_stokes->add_flag("--viz", stokes.viz, "Also write 8-bit PGM previews");

    DemosaicArgs demosaic;
    auto* sc_demosaic = app.add_subcommand("demosaic", "Mosaic frames to quad tensors");
    sc_demosaic->add_option("--in", demosaic.in, "Mosaic file, or directory with mosaic/")
        ->required();
    sc_demosaic->add_option("--out", demosaic.out, "Output file or directory")->required();
    sc_demosaic->add_option("--angles", demosaic.angles, "Polarizer layout");
    sc_demosaic->add_option("--bayer", demosaic.bayer, "Bayer layout (color sensors)");

    ForwardArgs forward;
    auto* sc_forward = app.add_subcommand("forward", "Run detection over a triplet directory");
    sc_forward->add_option("--in", forward.in, "Triplet directory (rgb/ aolp/ dolp/)")
        ->required();
    sc_forward->add_option("--out", forward.out, "Detections JSON path")->required();
    sc_forward->add_option("--config", forward.config, "Network config file");
    sc_forward->add_option("--weights", forward.weights, "Weights file (RGBPW)");
    std::uint64_t fwd_seed = 0;
    auto* seed_opt =
        sc_forward->add_option("--seed", fwd_seed, "Init seed when no weights file is given");

    EvalArgs eval_args;
    auto* sc_eval = app.add_subcommand("eval", "Score detections against ground truth");
    sc_eval->add_option("--dets", eval_args.dets, "Detections JSON")->required();
    sc_eval->add_option("--gt", eval_args.gt, "Ground-truth JSON")->required();

    GradcheckArgs gc;
    auto* sc_gc =
        app.add_subcommand("gradcheck", "Finite-difference verification of backward passes");
    sc_gc->add_option("--module", gc.module, "Module name or 'all'");
    sc_gc->add_option("--seed", gc.seed, "Seed for inputs and probes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    auto validation = [](const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    };
    try {
        if (*sc_synth) return run_synth(synth);
        if (*sc_stokes) return run_stokes(stokes);
        if (*sc_demosaic) return run_demosaic(demosaic);
        if (*sc_forward) {
            if (seed_opt->count()) forward.seed = fwd_seed;
            return run_forward(forward);
        }
        if (*sc_eval) return run_eval(eval_args);
        if (*sc_gc) return run_gradcheck(gc);
    } catch (const ShapeError& e) {
        return validation(e);
    } catch (const ValidationError& e) {
        return validation(e);
    } catch (const FormatError& e) {
        return validation(e);
    } catch (const PatternError& e) {
        return validation(e);
    } catch (const PlacementError& e) {
        return validation(e);
    } catch (const NotFoundError& e) {
        return validation(e);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal; // unreachable: a subcommand is required
}
