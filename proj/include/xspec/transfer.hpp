#pragma once

// Projection of a thermal-frame dataset into the registered visible frame.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "xspec/dataset.hpp"
#include "xspec/geometry.hpp"
#include "xspec/geometry_io.hpp"

namespace xspec {

struct ImagePair {
    std::string pair_id;
    std::string source_image;  // file_name in the thermal dataset
    std::string target_image;  // file_name of the synchronized visible image
    std::int64_t target_width = 0;
    std::int64_t target_height = 0;

    friend bool operator==(const ImagePair&, const ImagePair&) = default;
};

/// Pairing file: [ { "pair_id", "source_image", "target_image",
///                   "target_width", "target_height" } ]
/// Parsed without a dataset; see pair_catalog for the resolved form.
inline std::vector<ImagePair> parse_pairs(std::string_view text, const std::string& origin = {}) {
    const Json j = parse_json(text, origin);
    if (!j.is_array()) throw Error(ErrorCode::MalformedField, "pairing file must be a JSON list", origin);
    std::vector<ImagePair> pairs;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string where = indexed("pairs", i);
        ImagePair p{json_field::string(j[i], "pair_id", where),
                    json_field::string(j[i], "source_image", where),
                    json_field::string(j[i], "target_image", where),
                    json_field::positive_integer(j[i], "target_width", where),
                    json_field::positive_integer(j[i], "target_height", where)};
        if (p.pair_id.empty()) throw Error(ErrorCode::MalformedField, "empty pair_id", where);
        if (!ids.insert(p.pair_id).second) {
            throw Error(ErrorCode::DuplicatePairId, "pair_id \"" + p.pair_id + "\" appears twice", where);
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

inline std::string write_pairs(const std::vector<ImagePair>& pairs) {
    Json j = Json::array();
    for (const auto& p : pairs) {
        j.push_back(Json{{"pair_id", p.pair_id},
                         {"source_image", p.source_image},
                         {"target_image", p.target_image},
                         {"target_width", p.target_width},
                         {"target_height", p.target_height}});
    }
    return dump_json(j);
}

inline const ImageRecord* find_image_by_name(const Dataset& d, std::string_view file_name) {
    for (const auto& im : d.images) {
        if (im.file_name == file_name) return &im;
    }
    return nullptr;
}

inline std::vector<ImagePair> pair_catalog(const Dataset& source, std::string_view pairing_text,
                                           const std::string& origin = {}) {
    auto pairs = parse_pairs(pairing_text, origin);
    for (const auto& p : pairs) {
        if (!find_image_by_name(source, p.source_image)) {
            throw Error(ErrorCode::UnresolvedSourceImage,
                        "source image \"" + p.source_image + "\" is not in the dataset", p.pair_id);
        }
    }
    return pairs;
}

struct TransferPolicy {
    bool clip_to_frame = true;
    double min_visible_fraction = 0.25;
    double min_pixel_area = 4.0;
};

inline void validate(const TransferPolicy& p) {
    if (!(p.min_visible_fraction >= 0.0 && p.min_visible_fraction <= 1.0)) {
        throw Error(ErrorCode::MalformedField, "min_visible_fraction must lie in [0, 1]");
    }
    if (!(p.min_pixel_area >= 0.0) || !std::isfinite(p.min_pixel_area)) {
        throw Error(ErrorCode::MalformedField, "min_pixel_area must be a nonnegative number");
    }
}

enum class DropReason { OutOfFrame, LowVisibility, TooSmall, PointAtInfinity };

inline std::string_view to_string(DropReason r) {
    switch (r) {
        case DropReason::OutOfFrame: return "out_of_frame";
        case DropReason::LowVisibility: return "low_visibility";
        case DropReason::TooSmall: return "too_small";
        case DropReason::PointAtInfinity: return "point_at_infinity";
    }
    return "unknown";
}

struct BoxOutcome {
    std::optional<BBox> box;  // empty when dropped
    std::optional<DropReason> drop;
    bool clipped = false;
    double visible_fraction = 0.0;
};

inline BBox clip_to(const BBox& b, double width, double height) {
    const double x0 = std::max(b.x, 0.0), y0 = std::max(b.y, 0.0);
    const double x1 = std::min(b.right(), width), y1 = std::min(b.bottom(), height);
    BBox out{x0, y0, x1 - x0, y1 - y0};
    // x + w must not round past the frame edge
    while (out.right() > width) out.w = std::nextafter(out.w, 0.0);
    while (out.bottom() > height) out.h = std::nextafter(out.h, 0.0);
    return out;
}

/// Envelope projection followed by the frame policy for a single box.
inline BoxOutcome transfer_box(const Homography& h, const BBox& box, double width, double height,
                               const TransferPolicy& policy) {
    BoxOutcome out;
    BBox env;
    try {
        env = project_bbox(h, box);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::PointAtInfinity) throw;
        out.drop = DropReason::PointAtInfinity;
        return out;
    }
    if (!env.is_valid() || !intersects_frame(env, width, height)) {
        out.drop = env.is_finite() ? DropReason::OutOfFrame : DropReason::PointAtInfinity;
        return out;
    }
    const BBox inside = clip_to(env, width, height);
    out.visible_fraction = std::min(1.0, inside.area() / env.area());
    if (out.visible_fraction < policy.min_visible_fraction) {
        out.drop = DropReason::LowVisibility;
        return out;
    }
    BBox kept = env;
    if (policy.clip_to_frame && !(inside == env)) {
        kept = inside;
        out.clipped = true;
    }
    if (kept.area() < policy.min_pixel_area) {
        out.drop = DropReason::TooSmall;
        out.clipped = false;
        return out;
    }
    out.box = kept;
    return out;
}

struct DropRecord {
    RecordId source_annotation_id = 0;
    DropReason reason = DropReason::OutOfFrame;
};

struct PairTransferReport {
    std::string pair_id;
    std::size_t projected = 0;
    std::size_t clipped = 0;
    std::size_t unclipped = 0;
    std::size_t dropped = 0;
    std::vector<DropRecord> drops;
    std::optional<FitDiagnostics> fit;

    std::size_t kept() const { return clipped + unclipped; }
};

struct TransferReport {
    std::vector<PairTransferReport> pairs;
    TransferPolicy policy;

    std::size_t total(std::size_t PairTransferReport::*field) const {
        std::size_t n = 0;
        for (const auto& p : pairs) n += p.*field;
        return n;
    }
};

inline Json to_json(const TransferReport& r) {
    Json pairs = Json::array();
    for (const auto& p : r.pairs) {
        Json drops = Json::array();
        for (const auto& d : p.drops) {
            drops.push_back(Json{{"source_annotation_id", d.source_annotation_id},
                                 {"reason", std::string(to_string(d.reason))}});
        }
        Json j{{"pair_id", p.pair_id}, {"projected", p.projected}, {"clipped", p.clipped},
               {"unclipped", p.unclipped}, {"dropped", p.dropped},   {"drops", drops}};
        if (p.fit) j["fit"] = to_json(*p.fit);
        pairs.push_back(std::move(j));
    }
    return Json{{"policy",
                 {{"clip_to_frame", r.policy.clip_to_frame},
                  {"min_visible_fraction", r.policy.min_visible_fraction},
                  {"min_pixel_area", r.policy.min_pixel_area}}},
                {"pairs", pairs},
                {"totals",
                 {{"projected", r.total(&PairTransferReport::projected)},
                  {"clipped", r.total(&PairTransferReport::clipped)},
                  {"unclipped", r.total(&PairTransferReport::unclipped)},
                  {"dropped", r.total(&PairTransferReport::dropped)}}}};
}

struct TransferResult {
    Dataset dataset;
    TransferReport report;
};

/// One output image per pair (id = pair index + 1). Kept annotations are
/// numbered consecutively in (pair order, source annotation id) order.
inline TransferResult transfer_dataset(
    const Dataset& source, const std::vector<ImagePair>& pairs,
    const std::map<std::string, Homography>& homographies, const TransferPolicy& policy,
    const std::map<std::string, FitDiagnostics>& diagnostics = {}) {
    validate(policy);
    for (const auto& p : pairs) {
        if (!homographies.contains(p.pair_id)) {
            throw Error(ErrorCode::MissingHomography, "no homography for pair", p.pair_id);
        }
        if (!find_image_by_name(source, p.source_image)) {
            throw Error(ErrorCode::MissingPairImage,
                        "source image \"" + p.source_image + "\" is not in the dataset", p.pair_id);
        }
        if (p.target_width <= 0 || p.target_height <= 0) {
            throw Error(ErrorCode::MalformedField, "target dimensions must be positive", p.pair_id);
        }
    }

    std::map<RecordId, std::vector<const AnnotationRecord*>> by_image;
    for (const auto& a : source.annotations) by_image[a.image_id].push_back(&a);
    for (auto& [id, anns] : by_image) {
        std::sort(anns.begin(), anns.end(), [](auto* a, auto* b) { return a->id < b->id; });
    }

    TransferResult out;
    out.report.policy = policy;
    out.dataset.categories = source.categories;
    out.dataset.extra = source.extra;
    RecordId next_ann = 1;

    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const ImagePair& p = pairs[i];
        const Homography& h = homographies.at(p.pair_id);
        const ImageRecord* src_img = find_image_by_name(source, p.source_image);
        const RecordId image_id = static_cast<RecordId>(i + 1);
        out.dataset.images.push_back({image_id, p.target_image, p.target_width, p.target_height,
                                      Json{{"pair_id", p.pair_id}}});

        PairTransferReport rep;
        rep.pair_id = p.pair_id;
        if (auto it = diagnostics.find(p.pair_id); it != diagnostics.end()) rep.fit = it->second;
        const double w = static_cast<double>(p.target_width);
        const double hgt = static_cast<double>(p.target_height);

        for (const AnnotationRecord* a : by_image[src_img->id]) {
            ++rep.projected;
            const BoxOutcome o = transfer_box(h, a->bbox, w, hgt, policy);
            if (!o.box) {
                ++rep.dropped;
                rep.drops.push_back({a->id, *o.drop});
                continue;
            }
            (o.clipped ? rep.clipped : rep.unclipped) += 1;
            AnnotationRecord t = *a;
            t.id = next_ann++;
            t.image_id = image_id;
            t.bbox = *o.box;
            t.extra.erase("segmentation");
            out.dataset.annotations.push_back(std::move(t));
        }
        out.report.pairs.push_back(std::move(rep));
    }
    return out;
}

}  // namespace xspec
