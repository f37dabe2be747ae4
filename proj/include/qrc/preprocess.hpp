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

#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qrc/core_model.hpp"

namespace qrc {

/// Features (one row per sample), targets, and a train/test split.
struct Dataset {
    Matrix features;
    Vector targets;  // class ids for classification, values for regression
    bool classification = true;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(features.rows()); }
    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(features.cols()); }

    void validate() const {
        if (features.rows() != targets.size()) {
            throw DataError("feature rows and targets disagree in length");
        }
        std::set<std::size_t> seen;
        for (const auto* part : {&train, &test}) {
            for (auto i : *part) {
                if (i >= size()) {
                    throw DataError("split index " + std::to_string(i) + " out of range");
                }
                if (!seen.insert(i).second) {
                    throw DataError("split index " + std::to_string(i) + " appears twice");
                }
            }
        }
    }
};

inline Matrix select_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(idx[r]));
    }
    return out;
}

inline Vector select_entries(const Vector& v, const std::vector<std::size_t>& idx) {
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
        out(static_cast<Eigen::Index>(r)) = v(static_cast<Eigen::Index>(idx[r]));
    }
    return out;
}

/// Projection onto the leading principal axes of the training data, then
/// per-component min/max rescale to [0, 1].
struct PcaModel {
    Vector mean;
    Matrix components;  // d_in x d_out, orthonormal columns
    Vector eigenvalues;
    Vector lo;
    Vector hi;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t input_dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
    [[nodiscard]] std::size_t output_dim() const noexcept { return static_cast<std::size_t>(components.cols()); }

    /// Raw scores, before rescaling.
    [[nodiscard]] Matrix project(const Matrix& x) const {
        if (static_cast<std::size_t>(x.cols()) != input_dim()) {
            throw DataError("PCA input has " + std::to_string(x.cols()) + " columns, model expects " +
                            std::to_string(input_dim()));
        }
        return (x.rowwise() - mean.transpose()) * components;
    }

    /// Scores rescaled by the training range and clamped to [0, 1].
    [[nodiscard]] Matrix apply(const Matrix& x) const {
        Matrix s = project(x);
        for (Eigen::Index c = 0; c < s.cols(); ++c) {
            const double span = hi(c) - lo(c);
            for (Eigen::Index r = 0; r < s.rows(); ++r) {
                const double v = span > 0.0 ? (s(r, c) - lo(c)) / span : 0.0;
                s(r, c) = std::clamp(v, 0.0, 1.0);
            }
        }
        return s;
    }
};

inline PcaModel pca_fit(const Matrix& train, std::size_t d_out) {
    const auto n = static_cast<std::size_t>(train.rows());
    const auto d_in = static_cast<std::size_t>(train.cols());
    if (d_out == 0 || d_out > std::min(n, d_in)) {
        throw ConfigError("PCA output dimension must lie in [1, min(n_train, d_in)]");
    }
    PcaModel m;
    m.mean = train.colwise().mean().transpose();
    const Matrix centered = train.rowwise() - m.mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(n > 1 ? n - 1 : 1);
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    if (es.info() != Eigen::Success) {
        throw NumericalError("PCA eigendecomposition failed");
    }
    const Vector& ev = es.eigenvalues();  // ascending
    const double top = std::max(ev(ev.size() - 1), 0.0);
    std::size_t kept = 0;
    for (std::size_t k = 0; k < d_out; ++k) {
        if (ev(static_cast<Eigen::Index>(d_in - 1 - k)) > 1e-12 * top && top > 0.0) ++kept;
    }
    if (kept == 0) {
        throw DataError("PCA: training data has zero variance");
    }
    if (kept < d_out) {
        m.warnings.push_back("covariance rank deficient: kept " + std::to_string(kept) + " of " +
                             std::to_string(d_out) + " components");
    }
    m.components.resize(static_cast<Eigen::Index>(d_in), static_cast<Eigen::Index>(kept));
    m.eigenvalues.resize(static_cast<Eigen::Index>(kept));
    for (std::size_t k = 0; k < kept; ++k) {
        const auto src = static_cast<Eigen::Index>(d_in - 1 - k);
        Vector v = es.eigenvectors().col(src);
        // Deterministic sign: largest-magnitude entry positive.
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        m.components.col(static_cast<Eigen::Index>(k)) = v;
        m.eigenvalues(static_cast<Eigen::Index>(k)) = ev(src);
    }
    const Matrix scores = m.project(train);
    m.lo = scores.colwise().minCoeff().transpose();
    m.hi = scores.colwise().maxCoeff().transpose();
    return m;
}

inline Matrix pca_apply(const PcaModel& model, const Matrix& features) { return model.apply(features); }

/// Min-max rescale of a whole series to [0, 1].
inline std::vector<double> normalize_series(const std::vector<double>& s) {
    if (s.empty()) {
        throw DataError("empty series");
    }
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    const double span = *hi - *lo;
    std::vector<double> out(s.size(), 0.0);
    if (span > 0.0) {
        for (std::size_t i = 0; i < s.size(); ++i) out[i] = (s[i] - *lo) / span;
    }
    return out;
}

/// Sample k: features s[k .. k+width-1], target s[k+width+horizon-1].
inline Dataset sliding_windows(const std::vector<double>& series, std::size_t width, std::size_t horizon = 1) {
    if (width == 0 || horizon == 0) {
        throw ConfigError("window width and horizon must be positive");
    }
    if (series.size() < width + horizon) {
        throw DataError("series of length " + std::to_string(series.size()) + " is too short for width " +
                        std::to_string(width));
    }
    const std::size_t n = series.size() - width - horizon + 1;
    Dataset d;
    d.classification = false;
    d.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
    d.targets.resize(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < width; ++j) {
            d.features(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = series[k + j];
        }
        d.targets(static_cast<Eigen::Index>(k)) = series[k + width + horizon - 1];
    }
    return d;
}

/// Index of the series point a window predicts.
inline std::size_t window_target_index(std::size_t window, std::size_t width, std::size_t horizon = 1) {
    return window + width + horizon - 1;
}

/// Windows whose index (by_target = false) or target index (by_target = true)
/// lies in [first, last].
inline std::vector<std::size_t> window_range(const Dataset& d, std::size_t first, std::size_t last, bool by_target,
                                             std::size_t horizon = 1) {
    if (last < first) {
        throw ConfigError("window range is empty");
    }
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < d.size(); ++k) {
        const std::size_t key = by_target ? window_target_index(k, d.dim(), horizon) : k;
        if (key >= first && key <= last) out.push_back(k);
    }
    return out;
}

/// Grayscale image, row-major, values as read (not rescaled).
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels;

    [[nodiscard]] double at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

/**
 * Area-weighted box average to ry rows x rx columns. Output pixel (r, c)
 * averages the source area it covers, with fractional weights on shared
 * source pixels. With normalize, the result is rescaled to [0, 1] (a
 * constant image maps to zeros).
 */
inline Matrix downscale_image(const GrayImage& img, std::size_t rx, std::size_t ry, bool normalize = true) {
    if (rx == 0 || ry == 0 || img.width == 0 || img.height == 0) {
        throw ConfigError("image sizes must be positive");
    }
    if (rx > img.width || ry > img.height) {
        throw ConfigError("cannot downscale " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                          " to a larger " + std::to_string(rx) + "x" + std::to_string(ry));
    }
    if (img.pixels.size() != img.width * img.height) {
        throw DataError("image pixel count does not match its dimensions");
    }
    auto weights = [](std::size_t src, std::size_t dst) {
        // w[o][i]: overlap of source cell i with output cell o, in source units.
        std::vector<std::vector<std::pair<std::size_t, double>>> w(dst);
        const double scale = static_cast<double>(src) / static_cast<double>(dst);
        for (std::size_t o = 0; o < dst; ++o) {
            const double a = static_cast<double>(o) * scale;
            const double b = static_cast<double>(o + 1) * scale;
            for (auto i = static_cast<std::size_t>(std::floor(a)); i < src && static_cast<double>(i) < b; ++i) {
                const double ov = std::min(b, static_cast<double>(i + 1)) - std::max(a, static_cast<double>(i));
                if (ov > 1e-12) w[o].emplace_back(i, ov);
            }
        }
        return w;
    };
    const auto wx = weights(img.width, rx);
    const auto wy = weights(img.height, ry);
    Matrix out(static_cast<Eigen::Index>(ry), static_cast<Eigen::Index>(rx));
    for (std::size_t r = 0; r < ry; ++r) {
        for (std::size_t c = 0; c < rx; ++c) {
            double acc = 0.0;
            double area = 0.0;
            for (auto [y, fy] : wy[r]) {
                for (auto [x, fx] : wx[c]) {
                    acc += fy * fx * img.at(y, x);
                    area += fy * fx;
                }
            }
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = acc / area;
        }
    }
    if (normalize) {
        const double lo = out.minCoeff();
        const double hi = out.maxCoeff();
        if (hi > lo) {
            out = (out.array() - lo) / (hi - lo);
        } else {
            out.setZero();
        }
    }
    return out;
}

}  // namespace qrc
