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

// Readers for IDX (MNIST), single-column time series CSV, PGM (P2/P5) and
// CSV image manifests ("path,label" per line, paths relative to the manifest).

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "qrc/core_model.hpp"
#include "qrc/preprocess.hpp"

namespace qrc {

struct IdxArray {
    std::vector<std::size_t> dims;
    std::vector<std::uint8_t> data;

    [[nodiscard]] std::size_t count() const noexcept { return dims.empty() ? 0 : dims[0]; }
    [[nodiscard]] std::size_t item_size() const noexcept {
        std::size_t s = 1;
        for (std::size_t i = 1; i < dims.size(); ++i) s *= dims[i];
        return s;
    }
};

inline std::string hex_bytes(const unsigned char* b, std::size_t n) {
    static const char* digits = "0123456789abcdef";
    std::string s = "0x";
    for (std::size_t i = 0; i < n; ++i) {
        s += digits[b[i] >> 4];
        s += digits[b[i] & 15];
    }
    return s;
}

/// Unsigned-byte IDX file (type code 0x08).
inline IdxArray read_idx(std::istream& in, const std::string& name = "IDX") {
    unsigned char magic[4];
    if (!in.read(reinterpret_cast<char*>(magic), 4)) {
        throw DataError(name + ": truncated magic number at offset 0");
    }
    if (magic[0] != 0 || magic[1] != 0) {
        throw DataError(name + ": bad magic " + hex_bytes(magic, 4) + " at offset 0 (expected 0x0000 prefix)");
    }
    if (magic[2] != 0x08) {
        throw DataError(name + ": unsupported element type " + hex_bytes(magic + 2, 1) +
                        " at offset 2 (expected 0x08, unsigned byte)");
    }
    const std::size_t nd = magic[3];
    if (nd == 0) throw DataError(name + ": zero dimensions at offset 3");
    IdxArray a;
    std::size_t total = 1;
    for (std::size_t d = 0; d < nd; ++d) {
        unsigned char b[4];
        if (!in.read(reinterpret_cast<char*>(b), 4)) {
            throw DataError(name + ": truncated dimension " + std::to_string(d) + " at offset " +
                            std::to_string(4 + 4 * d));
        }
        const std::size_t v = (std::size_t{b[0]} << 24) | (std::size_t{b[1]} << 16) | (std::size_t{b[2]} << 8) | b[3];
        a.dims.push_back(v);
        total *= v;
    }
    a.data.resize(total);
    const std::size_t header = 4 + 4 * nd;
    if (total && !in.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(total))) {
        throw DataError(name + ": payload truncated at offset " + std::to_string(header + static_cast<std::size_t>(in.gcount())) +
                        " (expected " + std::to_string(total) + " bytes after offset " + std::to_string(header) + ")");
    }
    return a;
}

inline IdxArray read_idx_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return read_idx(in, path.filename().string());
}

struct LabeledImages {
    Matrix pixels;  // one flattened image per row, intensities in [0, 1]
    Vector labels;
    std::size_t width = 0;
    std::size_t height = 0;
};

/// IDX image/label pair; optional digit filter keeps file order.
inline LabeledImages load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels,
                                const std::vector<int>& digits = {}) {
    const auto img = read_idx_file(images);
    const auto lab = read_idx_file(labels);
    if (img.dims.size() != 3) throw DataError(images.string() + ": expected a 3-dimensional image array");
    if (lab.dims.size() != 1) throw DataError(labels.string() + ": expected a 1-dimensional label array");
    if (img.count() != lab.count()) {
        throw DataError("image count " + std::to_string(img.count()) + " does not match label count " +
                        std::to_string(lab.count()));
    }
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < lab.count(); ++i) {
        if (digits.empty() || std::find(digits.begin(), digits.end(), lab.data[i]) != digits.end()) keep.push_back(i);
    }
    LabeledImages out;
    out.height = img.dims[1];
    out.width = img.dims[2];
    const std::size_t d = img.item_size();
    out.pixels.resize(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(d));
    out.labels.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t r = 0; r < keep.size(); ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            out.pixels(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = img.data[keep[r] * d + c] / 255.0;
        }
        out.labels(static_cast<Eigen::Index>(r)) = lab.data[keep[r]];
    }
    return out;
}

/**
 * Numeric column `column` of a CSV; blank lines and a non-numeric first
 * line (header) are skipped.
 */
inline std::vector<double> read_timeseries_csv(std::istream& in, std::size_t column = 0) {
    std::vector<double> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t c = 0; c <= column; ++c) {
            if (!std::getline(ss, cell, ',')) {
                throw DataError("time series line " + std::to_string(lineno) + " has no column " + std::to_string(column));
            }
        }
        try {
            std::size_t used = 0;
            const double v = std::stod(cell, &used);
            while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
            if (used != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
            out.push_back(v);
        } catch (const std::exception&) {
            if (out.empty() && lineno == 1) continue;
            throw DataError("time series line " + std::to_string(lineno) + ": bad number '" + cell + "'");
        }
    }
    if (out.empty()) throw DataError("time series is empty");
    return out;
}

inline std::vector<double> read_timeseries_file(const std::filesystem::path& path, std::size_t column = 0) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return read_timeseries_csv(in, column);
}

namespace detail {

inline std::string pgm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok += static_cast<char>(c);
    }
    return tok;
}

inline std::size_t pgm_number(std::istream& in, const char* what) {
    const auto tok = pgm_token(in);
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos || tok.size() > 9) {
        throw DataError(std::string("malformed PGM header: bad ") + what + " '" + tok + "'");
    }
    return std::stoul(tok);
}

}  // namespace detail

/// P2 or P5 graymap with intensities divided by maxval.
inline GrayImage read_pgm(std::istream& in) {
    const auto magic = detail::pgm_token(in);
    if (magic != "P2" && magic != "P5") throw DataError("malformed PGM header: magic '" + magic + "'");
    GrayImage img;
    img.width = detail::pgm_number(in, "width");
    img.height = detail::pgm_number(in, "height");
    const std::size_t maxval = detail::pgm_number(in, "maxval");
    if (img.width == 0 || img.height == 0) throw DataError("malformed PGM header: empty image");
    if (maxval == 0 || maxval > 65535) throw DataError("malformed PGM header: maxval out of range");
    const std::size_t n = img.width * img.height;
    img.pixels.resize(n);
    if (magic == "P2") {
        for (std::size_t i = 0; i < n; ++i) {
            const auto tok = detail::pgm_token(in);
            if (tok.empty()) throw DataError("PGM raster truncated at pixel " + std::to_string(i));
            if (tok.find_first_not_of("0123456789") != std::string::npos || tok.size() > 9) {
                throw DataError("PGM pixel " + std::to_string(i) + " is not a number");
            }
            const auto v = std::stoul(tok);
            if (v > maxval) throw DataError("PGM pixel " + std::to_string(i) + " exceeds maxval");
            img.pixels[i] = static_cast<double>(v) / static_cast<double>(maxval);
        }
    } else {
        const std::size_t bytes = maxval < 256 ? 1 : 2;
        std::vector<unsigned char> raw(n * bytes);
        if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
            throw DataError("PGM raster truncated at byte " + std::to_string(in.gcount()));
        }
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t v = bytes == 1 ? raw[i] : (std::size_t{raw[2 * i]} << 8) | raw[2 * i + 1];
            if (v > maxval) throw DataError("PGM pixel " + std::to_string(i) + " exceeds maxval");
            img.pixels[i] = static_cast<double>(v) / static_cast<double>(maxval);
        }
    }
    return img;
}

inline GrayImage read_pgm_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return read_pgm(in);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

/// Images listed in a "path,label" manifest, downscaled to ry x rx and flattened.
inline LabeledImages load_images(const std::filesystem::path& manifest, std::size_t rx, std::size_t ry,
                                 bool normalize = true) {
    std::ifstream in(manifest);
    if (!in) throw DataError("cannot open " + manifest.string());
    const auto base = manifest.parent_path();
    std::vector<Matrix> imgs;
    std::vector<double> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw DataError(manifest.string() + ":" + std::to_string(lineno) + ": expected 'path,label'");
        }
        const std::string file = line.substr(0, comma);
        const std::string lab = line.substr(comma + 1);
        double label;
        try {
            std::size_t used = 0;
            label = std::stod(lab, &used);
            if (used != lab.size()) throw std::invalid_argument(lab);
        } catch (const std::exception&) {
            if (imgs.empty() && labels.empty() && lineno == 1) continue;  // header
            throw DataError(manifest.string() + ":" + std::to_string(lineno) + ": bad label '" + lab + "'");
        }
        imgs.push_back(downscale_image(read_pgm_file(base / file), rx, ry, normalize));
        labels.push_back(label);
    }
    if (imgs.empty()) throw DataError(manifest.string() + ": no images listed");
    LabeledImages out;
    out.width = rx;
    out.height = ry;
    out.pixels.resize(static_cast<Eigen::Index>(imgs.size()), static_cast<Eigen::Index>(rx * ry));
    out.labels.resize(static_cast<Eigen::Index>(imgs.size()));
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        const Matrix& m = imgs[i];
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                out.pixels(static_cast<Eigen::Index>(i), r * m.cols() + c) = m(r, c);
            }
        }
        out.labels(static_cast<Eigen::Index>(i)) = labels[i];
    }
    return out;
}

}  // namespace qrc
