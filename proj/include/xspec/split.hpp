#pragma once

// Day/night partitioning driven by an explicit manifest.

#include <charconv>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "xspec/dataset.hpp"

namespace xspec {

enum class Phase { Day, Night };

inline std::string_view to_string(Phase p) { return p == Phase::Day ? "day" : "night"; }

struct ManifestEntry {
    std::string image;  // file_name, or a numeric image id
    Phase phase = Phase::Day;
};

struct SplitManifest {
    std::vector<ManifestEntry> entries;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

}  // namespace detail

/// CSV with header "image,phase"; phase is "day" or "night".
inline SplitManifest parse_split_manifest(std::string_view text, const std::string& origin = {}) {
    SplitManifest m;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = origin + (origin.empty() ? "" : ":") + "line " + std::to_string(line_no);
        if (detail::trim(line).empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw Error(ErrorCode::MalformedField, "expected \"image,phase\"", where);
        }
        const std::string image = detail::trim(std::string_view(line).substr(0, comma));
        const std::string phase = fold_label(std::string_view(line).substr(comma + 1));
        if (!header_seen) {
            if (fold_label(image) != "image" || phase != "phase") {
                throw Error(ErrorCode::MissingField, "manifest header must be \"image,phase\"", where);
            }
            header_seen = true;
            continue;
        }
        if (image.empty()) throw Error(ErrorCode::MalformedField, "empty image column", where);
        if (phase == "day") {
            m.entries.push_back({image, Phase::Day});
        } else if (phase == "night") {
            m.entries.push_back({image, Phase::Night});
        } else {
            throw Error(ErrorCode::MalformedField, "phase must be day or night, got \"" + phase + "\"",
                        where);
        }
    }
    if (!header_seen) throw Error(ErrorCode::MissingField, "manifest is empty", origin);
    return m;
}

inline std::string write_split_manifest(const SplitManifest& m) {
    std::string out = "image,phase\n";
    for (const auto& e : m.entries) {
        out += e.image;
        out += ',';
        out += to_string(e.phase);
        out += '\n';
    }
    return out;
}

/// Tags images whose file_name contains `needle` as night, the rest as day.
inline SplitManifest manifest_from_substring(const Dataset& d, std::string_view needle) {
    SplitManifest m;
    for (const auto& im : d.images) {
        const bool night = im.file_name.find(needle) != std::string::npos;
        m.entries.push_back({im.file_name, night ? Phase::Night : Phase::Day});
    }
    return m;
}

struct SplitResult {
    Dataset night;
    Dataset day;
};

inline SplitResult split_by_manifest(const Dataset& d, const SplitManifest& s) {
    std::map<std::string, RecordId> by_name;
    for (const auto& im : d.images) by_name.emplace(im.file_name, im.id);

    std::map<RecordId, Phase> phase_of;
    for (std::size_t i = 0; i < s.entries.size(); ++i) {
        const auto& e = s.entries[i];
        const std::string where = "manifest " + indexed("entries", i);
        std::optional<RecordId> id;
        if (auto it = by_name.find(e.image); it != by_name.end()) {
            id = it->second;
        } else {
            RecordId parsed = 0;
            const auto* end = e.image.data() + e.image.size();
            const auto res = std::from_chars(e.image.data(), end, parsed);
            if (res.ec == std::errc{} && res.ptr == end && d.find_image(parsed)) id = parsed;
        }
        if (!id) throw Error(ErrorCode::UnknownImage, "manifest names unknown image \"" + e.image + "\"", where);
        if (!phase_of.emplace(*id, e.phase).second) {
            throw Error(ErrorCode::DuplicateId, "image \"" + e.image + "\" tagged more than once", where);
        }
    }

    SplitResult out;
    for (Dataset* part : {&out.night, &out.day}) {
        part->categories = d.categories;
        part->extra = d.extra;
    }
    for (const auto& im : d.images) {
        auto it = phase_of.find(im.id);
        if (it == phase_of.end()) {
            throw Error(ErrorCode::UncoveredImage, "image \"" + im.file_name + "\" has no phase tag",
                        "image id " + std::to_string(im.id));
        }
        (it->second == Phase::Night ? out.night : out.day).images.push_back(im);
    }
    for (const auto& a : d.annotations) {
        (phase_of.at(a.image_id) == Phase::Night ? out.night : out.day).annotations.push_back(a);
    }
    return out;
}

}  // namespace xspec
