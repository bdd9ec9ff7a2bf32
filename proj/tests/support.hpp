// SPDX-License-Identifier: Apache-2.0
// Shared helpers for the unit tests.
#pragma once

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace testing {

inline std::filesystem::path fixture(const std::string& rel) { return std::filesystem::path(FIXTURE_DIR) / rel; }

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("missing fixture " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline nlohmann::json read_json(const std::string& rel) { return nlohmann::json::parse(read_file(fixture(rel))); }

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("rightpath-" + tag + "-" + std::to_string(rd()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Golden comparison. With RIGHTPATH_UPDATE_GOLDEN=1 the file is rewritten
/// instead, for reviewing in a diff.
inline bool matches_golden(const std::string& rel, const std::string& actual) {
    auto p = fixture(rel);
    if (const char* u = std::getenv("RIGHTPATH_UPDATE_GOLDEN"); u && std::string(u) == "1") {
        std::filesystem::create_directories(p.parent_path());
        std::ofstream(p, std::ios::binary) << actual;
        return true;
    }
    return read_file(p) == actual;
}

} // namespace testing
