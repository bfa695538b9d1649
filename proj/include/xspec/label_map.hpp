#pragma once

// Label translation between driving-dataset ontologies (IDD, KITTI -> FLIR).

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xspec/dataset.hpp"

namespace xspec {

struct MapEntry {
    std::string source;
    std::optional<std::string> target;  // nullopt drops the annotation

    friend bool operator==(const MapEntry&, const MapEntry&) = default;
};

struct CategoryMap {
    std::string name;
    std::vector<MapEntry> entries;
    /// Target ontology with its ids. When empty, ids are taken from same-named
    /// categories of the dataset being remapped, or allocated past its max id.
    std::vector<CategoryDef> target_categories;

    const MapEntry* find(std::string_view label) const {
        const std::string key = fold_label(label);
        for (const auto& e : entries) {
            if (fold_label(e.source) == key) return &e;
        }
        return nullptr;
    }
};

/// Category ids of the FLIR ADAS annotation files (COCO numbering).
inline std::vector<CategoryDef> flir_ontology() {
    return {{1, "Person", Json::object()},
            {2, "Bicycle", Json::object()},
            {3, "Car", Json::object()},
            {18, "Dog", Json::object()}};
}

inline std::vector<CategoryMap> builtin_maps() {
    CategoryMap idd{"idd_to_flir",
                    {{"Person", "Person"},
                     {"Rider", "Person"},
                     {"Car", "Car"},
                     {"Caravan", "Car"},
                     {"Autorickshaw", "Car"},
                     {"Bicycle", "Bicycle"},
                     {"Motorcycle", "Bicycle"},
                     {"Animal", "Dog"},
                     {"Bus", std::nullopt},
                     {"Trailer", std::nullopt},
                     {"Truck", std::nullopt},
                     {"Vehicle fallback", std::nullopt}},
                    flir_ontology()};
    CategoryMap kitti{"kitti_to_flir",
                      {{"Pedestrian", "Person"},
                       {"Cyclist", "Person"},
                       {"Car", "Car"},
                       {"Truck", std::nullopt}},
                      flir_ontology()};
    return {std::move(idd), std::move(kitti)};
}

inline std::optional<CategoryMap> find_builtin_map(std::string_view name) {
    for (auto& m : builtin_maps()) {
        if (m.name == name) return m;
    }
    return std::nullopt;
}

/// Each source label once; every target present in the target ontology.
inline void validate(const CategoryMap& m) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        const auto& e = m.entries[i];
        const std::string where = m.name + ": " + indexed("entries", i);
        const std::string key = fold_label(e.source);
        if (key.empty()) throw Error(ErrorCode::MalformedField, "empty source label", where);
        if (!seen.insert(key).second) {
            throw Error(ErrorCode::DuplicateId, "source label \"" + e.source + "\" listed twice",
                        where);
        }
        if (e.target && fold_label(*e.target).empty()) {
            throw Error(ErrorCode::MalformedField, "empty target label", where);
        }
        if (e.target && !m.target_categories.empty()) {
            const bool known = std::any_of(
                m.target_categories.begin(), m.target_categories.end(),
                [&](const CategoryDef& c) { return fold_label(c.name) == fold_label(*e.target); });
            if (!known) {
                throw Error(ErrorCode::InvariantViolation,
                            "target \"" + *e.target + "\" is not in the target ontology", where);
            }
        }
    }
}

/// { "name", "entries": [ { "source", "target": string|null } ],
///   "target_categories"?: [ { "id", "name" } ] }
inline CategoryMap parse_category_map(std::string_view text, const std::string& origin = {}) {
    const Json j = parse_json(text, origin);
    CategoryMap m;
    m.name = json_field::string(j, "name", origin);
    const Json& entries = json_field::array(j, "entries", origin);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const std::string where = indexed("entries", i);
        MapEntry e;
        e.source = json_field::string(entries[i], "source", where);
        const Json& t = json_field::require(entries[i], "target", where);
        if (t.is_string()) {
            e.target = t.get<std::string>();
        } else if (!t.is_null()) {
            throw Error(ErrorCode::MalformedField, "target must be a string or null", where);
        }
        m.entries.push_back(std::move(e));
    }
    if (auto it = j.find("target_categories"); it != j.end()) {
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string where = indexed("target_categories", i);
            m.target_categories.push_back({json_field::positive_integer((*it)[i], "id", where),
                                           json_field::string((*it)[i], "name", where),
                                           Json::object()});
        }
    }
    validate(m);
    return m;
}

inline std::string write_category_map(const CategoryMap& m) {
    Json entries = Json::array();
    for (const auto& e : m.entries) {
        entries.push_back(Json{{"source", e.source},
                               {"target", e.target ? Json(*e.target) : Json(nullptr)}});
    }
    Json j{{"name", m.name}, {"entries", entries}};
    if (!m.target_categories.empty()) {
        Json cats = Json::array();
        for (const auto& c : m.target_categories) cats.push_back(Json{{"id", c.id}, {"name", c.name}});
        j["target_categories"] = cats;
    }
    return dump_json(j);
}

struct LabelCounts {
    std::size_t kept = 0;
    std::size_t dropped = 0;
};

struct RemapReport {
    std::string map_name;
    std::map<std::string, LabelCounts> per_label;  // keyed by source category name
    std::vector<std::string> unmapped;             // labels dropped for lack of an entry
    std::size_t kept = 0;
    std::size_t dropped = 0;
    bool empty_result = false;  // set when every annotation was dropped
};

inline Json to_json(const RemapReport& r) {
    Json per = Json::object();
    for (const auto& [label, c] : r.per_label) per[label] = Json{{"kept", c.kept}, {"dropped", c.dropped}};
    return Json{{"map", r.map_name},   {"per_label", per},      {"unmapped", r.unmapped},
                {"kept", r.kept},      {"dropped", r.dropped},  {"empty_result", r.empty_result}};
}

struct RemapOptions {
    bool strict = true;
};

struct RemapResult {
    Dataset dataset;
    RemapReport report;
};

namespace detail {

inline std::vector<CategoryDef> resolve_target_ontology(const Dataset& d, const CategoryMap& m) {
    if (!m.target_categories.empty()) return m.target_categories;
    std::vector<CategoryDef> out;
    RecordId next_id = 1;
    for (const auto& c : d.categories) next_id = std::max(next_id, c.id + 1);
    for (const auto& e : m.entries) {
        if (!e.target) continue;
        const std::string key = fold_label(*e.target);
        const bool listed = std::any_of(out.begin(), out.end(), [&](const CategoryDef& c) {
            return fold_label(c.name) == key;
        });
        if (listed) continue;
        auto same = std::find_if(d.categories.begin(), d.categories.end(),
                                 [&](const CategoryDef& c) { return fold_label(c.name) == key; });
        if (same != d.categories.end()) {
            out.push_back(*same);
        } else {
            out.push_back({next_id++, *e.target, Json::object()});
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return out;
}

}  // namespace detail

/// Rewrites annotations into the map's target ontology. Images are kept even
/// when all of their annotations are dropped.
inline RemapResult remap_labels(const Dataset& d, const CategoryMap& m, RemapOptions opts = {}) {
    validate(m);

    std::vector<std::string> unmapped;
    for (const auto& c : d.categories) {
        if (!m.find(c.name)) unmapped.push_back(c.name);
    }
    if (opts.strict && !unmapped.empty()) {
        std::string names;
        for (const auto& n : unmapped) names += (names.empty() ? "\"" : ", \"") + n + "\"";
        throw Error(ErrorCode::UnmappedLabel, "no map entry for label(s) " + names, m.name);
    }

    RemapResult out;
    out.report.map_name = m.name;
    out.report.unmapped = unmapped;
    out.dataset.images = d.images;
    out.dataset.extra = d.extra;
    out.dataset.categories = detail::resolve_target_ontology(d, m);

    std::map<RecordId, std::optional<RecordId>> id_map;  // source category -> target id
    for (const auto& c : d.categories) {
        std::optional<RecordId> target;
        if (const MapEntry* e = m.find(c.name); e && e->target) {
            const std::string key = fold_label(*e->target);
            for (const auto& t : out.dataset.categories) {
                if (fold_label(t.name) == key) target = t.id;
            }
        }
        id_map[c.id] = target;
        out.report.per_label[c.name];
    }

    for (const auto& a : d.annotations) {
        const std::string& label = d.find_category(a.category_id)->name;
        auto& counts = out.report.per_label[label];
        const auto& target = id_map.at(a.category_id);
        if (target) {
            AnnotationRecord copy = a;
            copy.category_id = *target;
            out.dataset.annotations.push_back(std::move(copy));
            ++counts.kept;
            ++out.report.kept;
        } else {
            ++counts.dropped;
            ++out.report.dropped;
        }
    }
    out.report.empty_result = !d.annotations.empty() && out.report.kept == 0;
    return out;
}

}  // namespace xspec
