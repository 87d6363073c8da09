#pragma once

#include <cctype>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rgbp/errors.hpp"
#include "rgbp/net/mp.hpp"

namespace rgbp::net {

// Toy network configuration. Three encoder stages stand in for the full
// five-stage backbone; widths are kept small so finite-difference checks
// on the whole network stay cheap.
struct NetworkConfig {
    int c_pi = 16;
    std::vector<int> widths{16, 32, 64};
    std::vector<MpVariant> mp_assignment{MpVariant::kSpatial, MpVariant::kSpatial,
                                         MpVariant::kChannel};
    std::vector<bool> fusion{true, true, true};
    std::vector<std::pair<double, double>> anchors{{8, 8}, {16, 16}, {32, 32}};
    double nms_iou = 0.45;
    double score_thresh = 0.25;
    int mcp_reduction = 4;
    std::uint64_t seed = 0;

    // ablation switches
    bool use_mp = true;
    bool use_sdmd = true;
    bool use_cwda = true;

    int stages() const { return static_cast<int>(widths.size()); }
    int min_divisor() const { return 1 << (stages() + 2); }

    void validate() const {
        if (c_pi < 2 || c_pi % 2 != 0)
            throw ValidationError("config: c_pi must be even and >= 2");
        if (widths.empty()) throw ValidationError("config: no stage widths");
        for (int w : widths)
            if (w <= 0 || w % 2 != 0)
                throw ValidationError("config: stage widths must be positive and even");
        if (mp_assignment.size() != widths.size())
            throw ValidationError("config: mp_assignment length != stage count");
        if (fusion.size() != widths.size())
            throw ValidationError("config: fusion flag count != stage count");
        if (anchors.empty()) throw ValidationError("config: no anchors");
        for (auto [aw, ah] : anchors)
            if (aw <= 0 || ah <= 0) throw ValidationError("config: anchor sizes must be positive");
        if (nms_iou <= 0 || nms_iou > 1) throw ValidationError("config: nms_iou out of (0,1]");
        if (score_thresh < 0 || score_thresh > 1)
            throw ValidationError("config: score_thresh out of [0,1]");
        if (mcp_reduction < 1) throw ValidationError("config: mcp_reduction must be >= 1");
    }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

} // namespace detail

// Flat key-value text config: one `key = value` per line, `#` comments.
// Lists are comma-separated; anchors are WxH pairs; mp_assignment uses
// S/C letters. Unknown keys are rejected.
inline NetworkConfig parse_network_config(const std::string& text) {
    NetworkConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = true;
            for (char c : line)
                if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
            if (blank) continue;
            throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "c_pi") {
                cfg.c_pi = std::stoi(val);
            } else if (key == "widths") {
                cfg.widths.clear();
                for (auto& t : detail::split_list(val, ',')) cfg.widths.push_back(std::stoi(t));
            } else if (key == "mp_assignment") {
                cfg.mp_assignment.clear();
                for (auto& t : detail::split_list(val, ',')) {
                    if (t == "S" || t == "s")
                        cfg.mp_assignment.push_back(MpVariant::kSpatial);
                    else if (t == "C" || t == "c")
                        cfg.mp_assignment.push_back(MpVariant::kChannel);
                    else
                        throw ValidationError("config: mp_assignment entries must be S or C");
                }
            } else if (key == "fusion_stages") {
                // explicit list of stage indices that fuse
                std::vector<int> idx;
                for (auto& t : detail::split_list(val, ',')) idx.push_back(std::stoi(t));
                cfg.fusion.assign(cfg.widths.size(), false);
                for (int i : idx) {
                    if (i < 0 || i >= static_cast<int>(cfg.fusion.size()))
                        throw ValidationError("config: fusion stage index out of range");
                    cfg.fusion[i] = true;
                }
            } else if (key == "anchors") {
                cfg.anchors.clear();
                for (auto& t : detail::split_list(val, ',')) {
                    auto x = t.find('x');
                    if (x == std::string::npos)
                        throw ValidationError("config: anchors must be WxH pairs");
                    cfg.anchors.emplace_back(std::stod(t.substr(0, x)), std::stod(t.substr(x + 1)));
                }
            } else if (key == "nms_iou") {
                cfg.nms_iou = std::stod(val);
            } else if (key == "score_thresh") {
                cfg.score_thresh = std::stod(val);
            } else if (key == "mcp_reduction") {
                cfg.mcp_reduction = std::stoi(val);
            } else if (key == "seed") {
                cfg.seed = std::stoull(val);
            } else if (key == "use_mp") {
                cfg.use_mp = val == "1" || val == "true";
            } else if (key == "use_sdmd") {
                cfg.use_sdmd = val == "1" || val == "true";
            } else if (key == "use_cwda") {
                cfg.use_cwda = val == "1" || val == "true";
            } else {
                throw ValidationError("config line " + std::to_string(lineno) + ": unknown key '" +
                                      key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw ValidationError("config line " + std::to_string(lineno) + ": bad value for '" +
                                  key + "'");
        }
    }
    if (cfg.fusion.size() != cfg.widths.size()) cfg.fusion.assign(cfg.widths.size(), true);
    if (cfg.mp_assignment.size() != cfg.widths.size() && cfg.widths.size() != 3)
        throw ValidationError("config: mp_assignment must be given when widths are non-default");
    cfg.validate();
    return cfg;
}

inline std::string serialize_network_config(const NetworkConfig& cfg) {
    std::ostringstream out;
    out << "c_pi = " << cfg.c_pi << "\n";
    out << "widths = ";
    for (std::size_t i = 0; i < cfg.widths.size(); ++i)
        out << (i ? "," : "") << cfg.widths[i];
    out << "\nmp_assignment = ";
    for (std::size_t i = 0; i < cfg.mp_assignment.size(); ++i)
        out << (i ? "," : "") << (cfg.mp_assignment[i] == MpVariant::kSpatial ? "S" : "C");
    out << "\nfusion_stages = ";
    bool first = true;
    for (std::size_t i = 0; i < cfg.fusion.size(); ++i)
        if (cfg.fusion[i]) {
            out << (first ? "" : ",") << i;
            first = false;
        }
    out << "\nanchors = ";
    for (std::size_t i = 0; i < cfg.anchors.size(); ++i)
        out << (i ? "," : "") << cfg.anchors[i].first << "x" << cfg.anchors[i].second;
    out << "\nnms_iou = " << cfg.nms_iou << "\n";
    out << "score_thresh = " << cfg.score_thresh << "\n";
    out << "mcp_reduction = " << cfg.mcp_reduction << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "use_mp = " << (cfg.use_mp ? 1 : 0) << "\n";
    out << "use_sdmd = " << (cfg.use_sdmd ? 1 : 0) << "\n";
    out << "use_cwda = " << (cfg.use_cwda ? 1 : 0) << "\n";
    return out.str();
}

} // namespace rgbp::net
