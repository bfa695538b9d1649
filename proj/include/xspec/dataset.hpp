#pragma once

// COCO-style annotation datasets: images, annotations and categories.
//
// Fields the toolkit does not interpret (segmentation, iscrowd, licenses,
// info, supercategory, ...) are carried in `extra` and written back verbatim.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "xspec/geometry.hpp"
#include "xspec/json_io.hpp"

namespace xspec {

using RecordId = std::int64_t;

struct CategoryDef {
    RecordId id = 0;
    std::string name;
    Json extra = Json::object();

    friend bool operator==(const CategoryDef&, const CategoryDef&) = default;
};

struct ImageRecord {
    RecordId id = 0;
    std::string file_name;
    std::int64_t width = 0;
    std::int64_t height = 0;
    Json extra = Json::object();

    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct AnnotationRecord {
    RecordId id = 0;
    RecordId image_id = 0;
    RecordId category_id = 0;
    BBox bbox;
    Json extra = Json::object();

    /// Always derived from the box; any stored area is regenerated on write.
    double area() const { return bbox.area(); }

    friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

struct Dataset {
    std::vector<ImageRecord> images;
    std::vector<AnnotationRecord> annotations;
    std::vector<CategoryDef> categories;
    Json extra = Json::object();

    const CategoryDef* find_category(RecordId id) const {
        for (const auto& c : categories) {
            if (c.id == id) return &c;
        }
        return nullptr;
    }
    const ImageRecord* find_image(RecordId id) const {
        for (const auto& im : images) {
            if (im.id == id) return &im;
        }
        return nullptr;
    }
};

/// Positive-area overlap between a box and the frame [0, width] x [0, height].
inline bool intersects_frame(const BBox& b, double width, double height) {
    const double ix = std::min(b.right(), width) - std::max(b.x, 0.0);
    const double iy = std::min(b.bottom(), height) - std::max(b.y, 0.0);
    return ix > 0.0 && iy > 0.0;
}

/// Checks referential integrity, id uniqueness and record invariants.
/// Throws with a locator naming the first offending record.
inline void validate(const Dataset& d) {
    std::unordered_set<RecordId> cat_ids;
    std::unordered_set<std::string> cat_names;
    for (std::size_t i = 0; i < d.categories.size(); ++i) {
        const auto& c = d.categories[i];
        const std::string where = indexed("categories", i);
        if (c.id <= 0) throw Error(ErrorCode::MalformedField, "category id must be positive", where);
        if (!cat_ids.insert(c.id).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate category id " + std::to_string(c.id),
                        where);
        }
        if (!cat_names.insert(c.name).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate category name \"" + c.name + "\"", where);
        }
    }

    std::unordered_map<RecordId, const ImageRecord*> images;
    for (std::size_t i = 0; i < d.images.size(); ++i) {
        const auto& im = d.images[i];
        const std::string where = indexed("images", i);
        if (im.id <= 0) throw Error(ErrorCode::MalformedField, "image id must be positive", where);
        if (im.width <= 0 || im.height <= 0) {
            throw Error(ErrorCode::MalformedField, "image dimensions must be positive", where);
        }
        if (!images.emplace(im.id, &im).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate image id " + std::to_string(im.id), where);
        }
    }

    std::unordered_set<RecordId> ann_ids;
    for (std::size_t i = 0; i < d.annotations.size(); ++i) {
        const auto& a = d.annotations[i];
        const std::string where = indexed("annotations", i);
        if (a.id <= 0) {
            throw Error(ErrorCode::MalformedField, "annotation id must be positive", where);
        }
        if (!ann_ids.insert(a.id).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate annotation id " + std::to_string(a.id),
                        where);
        }
        auto im = images.find(a.image_id);
        if (im == images.end()) {
            throw Error(ErrorCode::BrokenReference,
                        "annotation references missing image_id " + std::to_string(a.image_id),
                        where);
        }
        if (!cat_ids.contains(a.category_id)) {
            throw Error(ErrorCode::BrokenReference,
                        "annotation references missing category_id " +
                            std::to_string(a.category_id),
                        where);
        }
        if (!a.bbox.is_finite()) {
            throw Error(ErrorCode::NonFinite, "bbox has non-finite values", where);
        }
        if (!(a.bbox.w > 0.0 && a.bbox.h > 0.0)) {
            throw Error(ErrorCode::MalformedField, "bbox must have positive width and height",
                        where);
        }
        if (!intersects_frame(a.bbox, static_cast<double>(im->second->width),
                              static_cast<double>(im->second->height))) {
            throw Error(ErrorCode::InvariantViolation, "bbox lies outside its image", where);
        }
    }
}

namespace detail {

inline Json extras_of(const Json& obj, std::initializer_list<std::string_view> known) {
    Json extra = Json::object();
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            extra[it.key()] = it.value();
        }
    }
    return extra;
}

inline BBox bbox_from_json(const Json& obj, const std::string& where) {
    const Json& b = json_field::require(obj, "bbox", where);
    if (!b.is_array() || b.size() != 4) {
        throw Error(ErrorCode::MalformedField, "bbox must be [x, y, w, h]", where);
    }
    std::array<double, 4> v{};
    for (std::size_t k = 0; k < 4; ++k) {
        if (!b[k].is_number()) {
            throw Error(ErrorCode::MalformedField, "bbox entries must be numbers", where);
        }
        v[k] = b[k].get<double>();
    }
    return {v[0], v[1], v[2], v[3]};
}

inline Json bbox_to_json(const BBox& b) { return Json{b.x, b.y, b.w, b.h}; }

}  // namespace detail

inline Dataset parse_dataset(std::string_view text, const std::string& origin = {}) {
    const Json doc = parse_json(text, origin);
    if (!doc.is_object()) {
        throw Error(ErrorCode::MalformedField, "annotation document must be a JSON object", origin);
    }
    Dataset d;
    d.extra = detail::extras_of(doc, {"images", "annotations", "categories"});

    const Json& cats = json_field::array(doc, "categories", origin);
    for (std::size_t i = 0; i < cats.size(); ++i) {
        const std::string where = indexed("categories", i);
        d.categories.push_back({json_field::positive_integer(cats[i], "id", where),
                                json_field::string(cats[i], "name", where),
                                detail::extras_of(cats[i], {"id", "name"})});
    }

    const Json& imgs = json_field::array(doc, "images", origin);
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        const std::string where = indexed("images", i);
        d.images.push_back({json_field::positive_integer(imgs[i], "id", where),
                            json_field::string(imgs[i], "file_name", where),
                            json_field::positive_integer(imgs[i], "width", where),
                            json_field::positive_integer(imgs[i], "height", where),
                            detail::extras_of(imgs[i], {"id", "file_name", "width", "height"})});
    }

    const Json& anns = json_field::array(doc, "annotations", origin);
    for (std::size_t i = 0; i < anns.size(); ++i) {
        const std::string where = indexed("annotations", i);
        AnnotationRecord a;
        a.id = json_field::positive_integer(anns[i], "id", where);
        a.image_id = json_field::integer(anns[i], "image_id", where);
        a.category_id = json_field::integer(anns[i], "category_id", where);
        a.bbox = detail::bbox_from_json(anns[i], where);
        a.extra = detail::extras_of(anns[i], {"id", "image_id", "category_id", "bbox", "area"});
        d.annotations.push_back(std::move(a));
    }

    validate(d);
    return d;
}

/// Deterministic serialization: records ordered by id, keys sorted, area
/// recomputed from the box.
inline std::string write_dataset(const Dataset& d) {
    try {
        validate(d);
    } catch (const Error& e) {
        throw Error(ErrorCode::InvariantViolation, e.message(), e.locator());
    }

    auto by_id = [](const auto* a, const auto* b) { return a->id < b->id; };
    auto sorted_ptrs = [&](const auto& records) {
        std::vector<const typename std::decay_t<decltype(records)>::value_type*> out;
        for (const auto& r : records) out.push_back(&r);
        std::sort(out.begin(), out.end(), by_id);
        return out;
    };

    Json doc = d.extra.is_object() ? d.extra : Json::object();

    Json cats = Json::array();
    for (const auto* c : sorted_ptrs(d.categories)) {
        Json j = c->extra;
        j["id"] = c->id;
        j["name"] = c->name;
        cats.push_back(std::move(j));
    }
    Json imgs = Json::array();
    for (const auto* im : sorted_ptrs(d.images)) {
        Json j = im->extra;
        j["id"] = im->id;
        j["file_name"] = im->file_name;
        j["width"] = im->width;
        j["height"] = im->height;
        imgs.push_back(std::move(j));
    }
    Json anns = Json::array();
    for (const auto* a : sorted_ptrs(d.annotations)) {
        Json j = a->extra;
        j["id"] = a->id;
        j["image_id"] = a->image_id;
        j["category_id"] = a->category_id;
        j["bbox"] = detail::bbox_to_json(a->bbox);
        j["area"] = a->area();
        anns.push_back(std::move(j));
    }
    doc["categories"] = std::move(cats);
    doc["images"] = std::move(imgs);
    doc["annotations"] = std::move(anns);
    return dump_json(doc);
}

/// Order-insensitive equality: records are compared after sorting by id.
inline bool equivalent(const Dataset& a, const Dataset& b) {
    auto sorted = [](auto v) {
        std::sort(v.begin(), v.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
        return v;
    };
    return a.extra == b.extra && sorted(a.images) == sorted(b.images) &&
           sorted(a.annotations) == sorted(b.annotations) &&
           sorted(a.categories) == sorted(b.categories);
}

/// Lower-cased, whitespace-trimmed label used for all label comparisons.
inline std::string fold_label(std::string_view label) {
    const auto first = label.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = label.find_last_not_of(" \t\r\n");
    std::string out(label.substr(first, last - first + 1));
    for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

}  // namespace xspec
