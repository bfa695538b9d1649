#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "xspec/error.hpp"
#include "xspec/json_io.hpp"

namespace support {

namespace fs = std::filesystem;

inline fs::path fixture(const std::string& name) { return fs::path(XSPEC_FIXTURE_DIR) / name; }

inline std::string fixture_text(const std::string& name) { return xspec::read_text_file(fixture(name)); }

/// Runs `fn`, expecting an xspec::Error with `code`; returns it for further checks.
template <typename Fn>
xspec::Error expect_error(xspec::ErrorCode code, Fn&& fn) {
    try {
        fn();
    } catch (const xspec::Error& e) {
        EXPECT_EQ(e.code(), code) << e.what();
        return e;
    }
    ADD_FAILURE() << "expected " << xspec::to_string(code) << ", nothing thrown";
    return xspec::Error(code, "not thrown");
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("xspec-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

}  // namespace support
