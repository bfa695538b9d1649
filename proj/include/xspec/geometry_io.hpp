#pragma once

// Correspondence and homography files.
//
//   correspondences: { "pair_id", "source_image", "target_image",
//                      "points": [ { "sx", "sy", "tx", "ty" } ] }
//   homography:      { "pair_id", "matrix": [[...], [...], [...]] }

#include <string>
#include <vector>

#include "xspec/geometry.hpp"
#include "xspec/json_io.hpp"

namespace xspec {

struct CorrespondenceSet {
    std::string pair_id;
    std::string source_image;
    std::string target_image;
    std::vector<Correspondence> points;
};

inline Correspondence correspondence_from_json(const Json& j, const std::string& where) {
    return {{json_field::number(j, "sx", where), json_field::number(j, "sy", where)},
            {json_field::number(j, "tx", where), json_field::number(j, "ty", where)}};
}

inline Json to_json(const Correspondence& c) {
    return Json{{"sx", c.source.x}, {"sy", c.source.y}, {"tx", c.target.x}, {"ty", c.target.y}};
}

inline CorrespondenceSet parse_correspondence_set(const std::string& text,
                                                  const std::string& origin = {}) {
    const Json j = parse_json(text, origin);
    CorrespondenceSet set;
    set.pair_id = json_field::string(j, "pair_id", origin);
    set.source_image = json_field::string(j, "source_image", origin);
    set.target_image = json_field::string(j, "target_image", origin);
    const Json& pts = json_field::array(j, "points", origin);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        set.points.push_back(correspondence_from_json(pts[i], indexed("points", i)));
    }
    return set;
}

inline std::string write_correspondence_set(const CorrespondenceSet& set) {
    Json points = Json::array();
    for (const auto& c : set.points) points.push_back(to_json(c));
    return dump_json(Json{{"pair_id", set.pair_id},
                          {"source_image", set.source_image},
                          {"target_image", set.target_image},
                          {"points", points}});
}

inline Json matrix_to_json(const Homography& h) {
    Json rows = Json::array();
    for (const auto& r : h.rows()) rows.push_back(Json{r[0], r[1], r[2]});
    return rows;
}

inline Homography matrix_from_json(const Json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) {
        throw Error(ErrorCode::MalformedField, "matrix must be 3 rows", where);
    }
    std::array<std::array<double, 3>, 3> rows{};
    for (std::size_t r = 0; r < 3; ++r) {
        if (!j[r].is_array() || j[r].size() != 3) {
            throw Error(ErrorCode::MalformedField, "matrix row must hold 3 numbers", where);
        }
        for (std::size_t c = 0; c < 3; ++c) {
            if (!j[r][c].is_number()) {
                throw Error(ErrorCode::MalformedField, "matrix entries must be numbers", where);
            }
            rows[r][c] = j[r][c].get<double>();
        }
    }
    return Homography::from_rows(rows);
}

struct HomographyRecord {
    std::string pair_id;
    Homography homography;
};

inline HomographyRecord parse_homography_file(const std::string& text,
                                              const std::string& origin = {}) {
    const Json j = parse_json(text, origin);
    return {json_field::string(j, "pair_id", origin),
            matrix_from_json(json_field::require(j, "matrix", origin), origin)};
}

inline std::string write_homography_file(const std::string& pair_id, const Homography& h) {
    return dump_json(Json{{"pair_id", pair_id}, {"matrix", matrix_to_json(h)}});
}

inline Json to_json(const FitDiagnostics& d) {
    return Json{{"rmse", d.rmse}, {"max_error", d.max_error}, {"per_point", d.per_point}};
}

}  // namespace xspec
