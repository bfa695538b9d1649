#pragma once

// File and JSON plumbing shared by every on-disk format.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "xspec/error.hpp"

namespace xspec {

using Json = nlohmann::json;

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open file for reading", path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open file for writing", path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed", path.string());
}

inline Json parse_json(std::string_view text, const std::string& locator = {}) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::MalformedJson, e.what(), locator);
    }
}

/// Canonical serialization: two-space indent, sorted keys, trailing newline.
inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

namespace json_field {

inline const Json& require(const Json& obj, std::string_view key, const std::string& where) {
    if (!obj.is_object()) {
        throw Error(ErrorCode::MalformedField, "expected a JSON object", where);
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw Error(ErrorCode::MissingField, "missing field \"" + std::string(key) + "\"", where);
    }
    return *it;
}

inline double number(const Json& obj, std::string_view key, const std::string& where) {
    const Json& v = require(obj, key, where);
    if (!v.is_number()) {
        throw Error(ErrorCode::MalformedField, "field \"" + std::string(key) + "\" must be a number",
                    where);
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
        throw Error(ErrorCode::NonFinite, "field \"" + std::string(key) + "\" is not finite", where);
    }
    return d;
}

inline std::int64_t integer(const Json& obj, std::string_view key, const std::string& where) {
    const Json& v = require(obj, key, where);
    if (v.is_number_integer()) return v.get<std::int64_t>();
    // integral-valued floats such as 3.0 are accepted
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9.0e15) {
            return static_cast<std::int64_t>(d);
        }
    }
    throw Error(ErrorCode::MalformedField, "field \"" + std::string(key) + "\" must be an integer",
                where);
}

inline std::int64_t positive_integer(const Json& obj, std::string_view key,
                                     const std::string& where) {
    const std::int64_t v = integer(obj, key, where);
    if (v <= 0) {
        throw Error(ErrorCode::MalformedField, "field \"" + std::string(key) + "\" must be positive",
                    where);
    }
    return v;
}

inline std::string string(const Json& obj, std::string_view key, const std::string& where) {
    const Json& v = require(obj, key, where);
    if (!v.is_string()) {
        throw Error(ErrorCode::MalformedField, "field \"" + std::string(key) + "\" must be a string",
                    where);
    }
    return v.get<std::string>();
}

inline const Json& array(const Json& obj, std::string_view key, const std::string& where) {
    const Json& v = require(obj, key, where);
    if (!v.is_array()) {
        throw Error(ErrorCode::MalformedField, "field \"" + std::string(key) + "\" must be an array",
                    where);
    }
    return v;
}

}  // namespace json_field

inline std::string indexed(std::string_view list, std::size_t i) {
    return std::string(list) + "[" + std::to_string(i) + "]";
}

}  // namespace xspec
