#pragma once

// Detection matching, per-class average precision and the train/test tables.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "xspec/dataset.hpp"

namespace xspec {

struct Detection {
    RecordId image_id = 0;
    RecordId category_id = 0;
    BBox bbox;
    double score = 0.0;
};

struct DetectionSet {
    std::vector<Detection> detections;
    std::string source_tag;  // training-set label, e.g. "IDD+FLIR_THM"
};

/// COCO results format: [ { "image_id", "category_id", "bbox", "score" } ].
inline DetectionSet parse_detections(std::string_view text, std::string source_tag,
                                     const std::string& origin = {}) {
    const Json j = parse_json(text, origin);
    if (!j.is_array()) {
        throw Error(ErrorCode::MalformedField, "detection file must be a JSON list", origin);
    }
    DetectionSet set;
    set.source_tag = std::move(source_tag);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string where = indexed("detections", i);
        Detection d;
        d.image_id = json_field::integer(j[i], "image_id", where);
        d.category_id = json_field::integer(j[i], "category_id", where);
        d.bbox = detail::bbox_from_json(j[i], where);
        d.score = json_field::number(j[i], "score", where);
        set.detections.push_back(d);
    }
    return set;
}

inline std::string write_detections(const DetectionSet& set) {
    Json j = Json::array();
    for (const auto& d : set.detections) {
        j.push_back(Json{{"image_id", d.image_id},
                         {"category_id", d.category_id},
                         {"bbox", detail::bbox_to_json(d.bbox)},
                         {"score", d.score}});
    }
    return dump_json(j);
}

/// References resolve against `gt`, boxes are valid, scores lie in [0, 1].
inline void validate_detections(const Dataset& gt, const DetectionSet& dets) {
    for (std::size_t i = 0; i < dets.detections.size(); ++i) {
        const auto& d = dets.detections[i];
        const std::string where = dets.source_tag + ": " + indexed("detections", i);
        if (!gt.find_image(d.image_id)) {
            throw Error(ErrorCode::BrokenReference,
                        "detection references missing image_id " + std::to_string(d.image_id), where);
        }
        if (!gt.find_category(d.category_id)) {
            throw Error(ErrorCode::BrokenReference,
                        "detection references missing category_id " + std::to_string(d.category_id),
                        where);
        }
        if (!d.bbox.is_finite() || !std::isfinite(d.score)) {
            throw Error(ErrorCode::NonFinite, "detection has non-finite values", where);
        }
        if (!d.bbox.is_valid()) {
            throw Error(ErrorCode::MalformedField, "detection bbox must have positive extent", where);
        }
        if (d.score < 0.0 || d.score > 1.0) {
            throw Error(ErrorCode::MalformedField, "detection score must lie in [0, 1]", where);
        }
    }
}

inline double iou(const BBox& a, const BBox& b) {
    const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    // areas from the same edge arithmetic as the overlap, so iou(a, a) == 1 exactly
    const double inter = iw * ih;
    const double uni = (a.right() - a.x) * (a.bottom() - a.y) + (b.right() - b.x) * (b.bottom() - b.y) - inter;
    return uni > 0.0 ? std::min(1.0, inter / uni) : 0.0;
}

struct MatchedDetection {
    std::size_t index = 0;  // position in DetectionSet::detections
    double score = 0.0;
    bool true_positive = false;
    std::optional<RecordId> matched_gt;  // annotation id when true_positive
};

struct MatchResult {
    std::vector<MatchedDetection> ranked;  // descending score
    std::size_t gt_count = 0;
};

inline RecordId category_id_of(const Dataset& gt, std::string_view label) {
    const std::string key = fold_label(label);
    for (const auto& c : gt.categories) {
        if (fold_label(c.name) == key) return c.id;
    }
    throw Error(ErrorCode::UnknownClass, "class \"" + std::string(label) + "\" is not a ground-truth category");
}

/// Greedy matching in score order. Each detection claims the unmatched
/// same-image ground-truth box of highest IoU (ties: lowest annotation id)
/// when that IoU reaches the threshold.
inline MatchResult match_detections(const Dataset& gt, const DetectionSet& dets,
                                    std::string_view label, double iou_threshold) {
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
        throw Error(ErrorCode::MalformedField, "iou_threshold must lie in (0, 1)");
    }
    const RecordId cat = category_id_of(gt, label);

    std::map<RecordId, std::vector<const AnnotationRecord*>> gt_by_image;
    MatchResult out;
    for (const auto& a : gt.annotations) {
        if (a.category_id != cat) continue;
        gt_by_image[a.image_id].push_back(&a);
        ++out.gt_count;
    }
    for (auto& [id, v] : gt_by_image) {
        std::sort(v.begin(), v.end(), [](auto* x, auto* y) { return x->id < y->id; });
    }

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < dets.detections.size(); ++i) {
        if (dets.detections[i].category_id == cat) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dets.detections[a].score > dets.detections[b].score;
    });

    std::map<RecordId, bool> taken;
    for (std::size_t idx : order) {
        const Detection& d = dets.detections[idx];
        MatchedDetection m{idx, d.score, false, std::nullopt};
        const AnnotationRecord* best = nullptr;
        double best_iou = -1.0;
        if (auto it = gt_by_image.find(d.image_id); it != gt_by_image.end()) {
            for (const AnnotationRecord* g : it->second) {
                if (taken[g->id]) continue;
                const double v = iou(d.bbox, g->bbox);
                if (v > best_iou) {
                    best_iou = v;
                    best = g;
                }
            }
        }
        if (best && best_iou >= iou_threshold) {
            taken[best->id] = true;
            m.true_positive = true;
            m.matched_gt = best->id;
        }
        out.ranked.push_back(m);
    }
    return out;
}

struct PRPoint {
    double recall = 0.0;
    double precision = 0.0;
    double score_threshold = 0.0;
};

struct PRCurve {
    std::string label;
    std::vector<PRPoint> points;
};

/// Cumulative precision/recall after each ranked detection.
inline PRCurve pr_curve(const MatchResult& m, std::string label = {}) {
    PRCurve c{std::move(label), {}};
    std::size_t tp = 0;
    for (std::size_t i = 0; i < m.ranked.size(); ++i) {
        if (m.ranked[i].true_positive) ++tp;
        const double recall = m.gt_count ? static_cast<double>(tp) / static_cast<double>(m.gt_count) : 0.0;
        const double precision = static_cast<double>(tp) / static_cast<double>(i + 1);
        c.points.push_back({recall, precision, m.ranked[i].score});
    }
    return c;
}

enum class Outcome : unsigned char { FalsePositive, TruePositive };

inline std::vector<Outcome> outcomes(const MatchResult& m) {
    std::vector<Outcome> out;
    out.reserve(m.ranked.size());
    for (const auto& r : m.ranked) {
        out.push_back(r.true_positive ? Outcome::TruePositive : Outcome::FalsePositive);
    }
    return out;
}

/// Area under the all-point interpolated precision/recall curve over
/// detections in descending score order.
inline double average_precision(std::span<const Outcome> ranked, std::size_t gt_count) {
    if (gt_count == 0) throw Error(ErrorCode::NoGroundTruth, "class has no ground-truth boxes");
    const std::size_t n = ranked.size();
    std::vector<double> recall(n), precision(n);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (ranked[i] == Outcome::TruePositive) ++tp;
        recall[i] = static_cast<double>(tp) / static_cast<double>(gt_count);
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    }
    // running maximum from the right gives the interpolated precision
    for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    return std::clamp(ap, 0.0, 1.0);
}

inline double average_precision(const MatchResult& m) {
    const auto flags = outcomes(m);
    return average_precision(flags, m.gt_count);
}

/// Absent classes (no ground truth, "-" in the tables) are nullopt.
using ClassAps = std::map<std::string, std::optional<double>>;

inline double aggregate_map(const ClassAps& per_class) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [label, ap] : per_class) {
        if (!ap) continue;
        sum += *ap;
        ++n;
    }
    if (n == 0) throw Error(ErrorCode::AllAbsent, "every class is absent; mAP is undefined");
    return sum / static_cast<double>(n);
}

struct EvalReport {
    std::string train_tag;
    std::string test_tag;
    double iou_threshold = 0.5;
    ClassAps per_class_ap;
    double map_value = 0.0;
};

inline constexpr double kDefaultIouThreshold = 0.5;

inline EvalReport evaluate(const Dataset& gt, const DetectionSet& dets,
                           double iou_threshold = kDefaultIouThreshold, std::string test_tag = {}) {
    validate_detections(gt, dets);
    EvalReport r;
    r.train_tag = dets.source_tag;
    r.test_tag = std::move(test_tag);
    r.iou_threshold = iou_threshold;
    for (const auto& c : gt.categories) {
        const MatchResult m = match_detections(gt, dets, c.name, iou_threshold);
        r.per_class_ap[c.name] = m.gt_count == 0 ? std::nullopt : std::optional(average_precision(m));
    }
    r.map_value = aggregate_map(r.per_class_ap);
    return r;
}

/// Half-away-from-zero rounding to three decimals. Values within 1e-9 of a
/// rounding midpoint count as the midpoint, so 0.9345 renders as 0.935 even
/// though its binary value sits just below.
inline std::string format_ap(double v) {
    const double scaled = std::abs(v) * 1000.0;
    const double rounded = std::floor(scaled + 0.5 + 1e-9) / 1000.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", std::copysign(rounded, v));
    return buf;
}

enum class TableFormat { Markdown, Csv };

/// One row per report in input order; class columns are the sorted union of
/// labels, then mAP.
inline std::string render_table(const std::vector<EvalReport>& reports, TableFormat format) {
    if (reports.empty()) throw Error(ErrorCode::EmptyInput, "no reports to render");
    std::set<std::string> labels;
    for (const auto& r : reports) {
        for (const auto& [label, ap] : r.per_class_ap) labels.insert(label);
    }
    std::vector<std::string> header{"Train Dataset", "Test Dataset"};
    header.insert(header.end(), labels.begin(), labels.end());
    header.emplace_back("mAP");

    std::vector<std::vector<std::string>> rows;
    for (const auto& r : reports) {
        std::vector<std::string> row{r.train_tag, r.test_tag};
        for (const auto& label : labels) {
            auto it = r.per_class_ap.find(label);
            row.push_back(it != r.per_class_ap.end() && it->second ? format_ap(*it->second) : "-");
        }
        row.push_back(format_ap(r.map_value));
        rows.push_back(std::move(row));
    }

    auto join = [](const std::vector<std::string>& cells, std::string_view sep) {
        std::string line;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) line += sep;
            line += cells[i];
        }
        return line;
    };

    std::string out;
    if (format == TableFormat::Csv) {
        out += join(header, ", ") + "\n";
        for (const auto& row : rows) out += join(row, ", ") + "\n";
    } else {
        out += "| " + join(header, " | ") + " |\n";
        out += "|";
        for (std::size_t i = 0; i < header.size(); ++i) out += i < 2 ? "---|" : "---:|";
        out += "\n";
        for (const auto& row : rows) out += "| " + join(row, " | ") + " |\n";
    }
    return out;
}

inline Json to_json(const EvalReport& r) {
    Json aps = Json::object();
    for (const auto& [label, ap] : r.per_class_ap) aps[label] = ap ? Json(*ap) : Json(nullptr);
    return Json{{"train_tag", r.train_tag},
                {"test_tag", r.test_tag},
                {"iou_threshold", r.iou_threshold},
                {"per_class_ap", aps},
                {"mAP", r.map_value}};
}

}  // namespace xspec
