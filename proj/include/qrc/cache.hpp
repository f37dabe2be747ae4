// Copyright 2026 The qrc-rydberg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Content-addressed store for simulation artifacts. Keys are FNV-1a hashes
// of a canonical JSON description of everything upstream of the artifact.
//
// Matrix files: "QRCMAT01", u64 rows, u64 cols, rows * cols f64, all
// little-endian, row-major.

#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qrc/core_model.hpp"
#include "qrc/shot_table.hpp"

namespace qrc {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = kFnvOffset) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = kFnvOffset) { return fnv1a(s.data(), s.size(), h); }

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Hash of a matrix's shape and exact bit pattern (row-major).
inline std::uint64_t matrix_hash(const Matrix& m) {
    std::uint64_t h = kFnvOffset;
    const std::uint64_t shape[2] = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    h = fnv1a(shape, sizeof shape, h);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            h = fnv1a(&v, sizeof v, h);
        }
    }
    return h;
}

inline std::string content_key(const nlohmann::json& description) { return hex64(fnv1a(description.dump())); }

inline void write_matrix_binary(std::ostream& out, const Matrix& m) {
    out.write("QRCMAT01", 8);
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    std::vector<char> row(static_cast<std::size_t>(m.cols()) * 8);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            std::uint64_t bits;
            const double v = m(r, c);
            std::memcpy(&bits, &v, 8);
            for (int b = 0; b < 8; ++b) row[static_cast<std::size_t>(c) * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
        }
        out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw DataError("failed writing matrix");
}

inline Matrix read_matrix_binary(std::istream& in) {
    char magic[8];
    if (!in.read(magic, 8) || std::string_view(magic, 8) != "QRCMAT01") {
        throw DataError("not a QRCMAT01 matrix file");
    }
    const auto rows = detail::get_le<std::uint64_t>(in, "matrix rows");
    const auto cols = detail::get_le<std::uint64_t>(in, "matrix cols");
    if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw DataError("matrix header is implausible");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::vector<unsigned char> row(static_cast<std::size_t>(cols) * 8);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()))) {
            throw DataError("matrix file truncated at row " + std::to_string(r));
        }
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b) bits |= std::uint64_t{row[static_cast<std::size_t>(c) * 8 + b]} << (8 * b);
            std::memcpy(&m(r, c), &bits, 8);
        }
    }
    return m;
}

/// Cache root: explicit path, else $QRC_CACHE_DIR, else disabled.
class ArtifactCache {
  public:
    ArtifactCache() = default;
    explicit ArtifactCache(std::filesystem::path root) : root_(std::move(root)) {}

    static ArtifactCache from_env(const std::string& configured = {}) {
        if (!configured.empty()) return ArtifactCache(configured);
        if (const char* env = std::getenv("QRC_CACHE_DIR"); env && *env) return ArtifactCache(env);
        return {};
    }

    [[nodiscard]] bool enabled() const noexcept { return !root_.empty(); }
    [[nodiscard]] const std::filesystem::path& root() const noexcept { return root_; }

    [[nodiscard]] std::filesystem::path path(const std::string& key, const std::string& ext) const {
        return root_ / key.substr(0, 2) / (key + ext);
    }

    [[nodiscard]] std::optional<Matrix> load_matrix(const std::string& key) const {
        if (!enabled()) return std::nullopt;
        std::ifstream in(path(key, ".mat"), std::ios::binary);
        if (!in) return std::nullopt;
        try {
            return read_matrix_binary(in);
        } catch (const DataError&) {
            return std::nullopt;  // torn or foreign file: recompute
        }
    }

    void store_matrix(const std::string& key, const Matrix& m, const nlohmann::json& manifest = {}) const {
        if (!enabled()) return;
        const auto target = path(key, ".mat");
        std::filesystem::create_directories(target.parent_path());
        const auto tmp = target.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out) throw DataError("cannot write cache file " + tmp);
            write_matrix_binary(out, m);
        }
        std::filesystem::rename(tmp, target);
        if (!manifest.is_null()) {
            std::ofstream(path(key, ".json")) << manifest.dump(2) << '\n';
        }
    }

  private:
    std::filesystem::path root_;
};

}  // namespace qrc
