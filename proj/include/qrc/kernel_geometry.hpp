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

// Kernel geometry between a quantum kernel K_q and a classical kernel K_c:
//
//   g^2[delta] = sqrt(K_q) sqrt(K_c) (K_c + delta I)^-2 sqrt(K_c) sqrt(K_q)
//   y'         = sign(sqrt(K_q) v - median(sqrt(K_q) v)),  v = top eigenvector of g^2

#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "qrc/core_model.hpp"
#include "qrc/rng.hpp"
#include "qrc/shot_table.hpp"

namespace qrc {

struct KernelMatrix {
    Matrix values;
    std::string source;  // qrc | crc | gaussian | features
    bool normalized = false;

    [[nodiscard]] Eigen::Index size() const noexcept { return values.rows(); }

    void validate() const {
        if (values.rows() != values.cols()) throw ConfigError("kernel matrix must be square");
        const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
        if ((values - values.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
            throw ConfigError("kernel matrix is not symmetric");
        }
        if (values.rows() == 0) return;
        Eigen::SelfAdjointEigenSolver<Matrix> es(values, Eigen::EigenvaluesOnly);
        const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
        if (es.eigenvalues().minCoeff() < -1e-8 * std::max(top, 1e-300)) {
            throw ConfigError("kernel matrix is not positive semidefinite");
        }
    }
};

/// Rows scaled to unit norm.
inline Matrix normalize_rows(const Matrix& x) {
    Matrix out = x;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double n = x.row(r).norm();
        if (!(n > 0.0) || !std::isfinite(n)) {
            throw DataError("row " + std::to_string(r) + " has zero or non-finite norm");
        }
        out.row(r) /= n;
    }
    return out;
}

/// K_nm = <u_n/|u_n|, u_m/|u_m|>.
inline KernelMatrix kernel_from_embeddings(const Matrix& embeddings, std::string source = "qrc") {
    const Matrix u = normalize_rows(embeddings);
    KernelMatrix k{u * u.transpose(), std::move(source), true};
    k.values = 0.5 * (k.values + k.values.transpose());
    k.values.diagonal().setOnes();
    return k;
}

/// Gaussian kernel on row-normalized features.
inline KernelMatrix gaussian_kernel(const Matrix& features, double gamma) {
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    const Matrix x = normalize_rows(features);
    const Vector n = x.rowwise().squaredNorm();
    Matrix d = (-2.0 * x * x.transpose()).colwise() + n;
    d.rowwise() += n.transpose();
    KernelMatrix k{(-gamma * d.cwiseMax(0.0)).array().exp().matrix(), "gaussian", true};
    k.values = 0.5 * (k.values + k.values.transpose());
    k.values.diagonal().setOnes();
    return k;
}

namespace detail {

inline void require_symmetric(const Matrix& k) {
    if (k.rows() != k.cols()) throw ConfigError("matrix must be square");
    const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
    if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw ConfigError("matrix is not symmetric");
    }
}

/// Eigenvalues with everything below 1e-12 * lambda_max set to zero.
inline Vector clipped(const Vector& lambda) {
    const double top = lambda.size() ? std::max(lambda.maxCoeff(), 0.0) : 0.0;
    return lambda.unaryExpr([&](double l) { return l < 1e-12 * top ? 0.0 : l; });
}

}  // namespace detail

inline Matrix psd_sqrt(const Matrix& k) {
    detail::require_symmetric(k);
    Eigen::SelfAdjointEigenSolver<Matrix> es(k);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    const Vector s = detail::clipped(es.eigenvalues()).cwiseSqrt();
    Matrix r = es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (r + r.transpose());
}

/// Decompositions shared by every delta of a sweep.
class GeometryPrep {
  public:
    GeometryPrep(const Matrix& kq, const Matrix& kc) {
        if (kq.rows() != kc.rows() || kq.cols() != kc.cols()) {
            throw ConfigError("quantum and classical kernels differ in size");
        }
        sqrt_kq_ = psd_sqrt(kq);
        detail::require_symmetric(kc);
        Eigen::SelfAdjointEigenSolver<Matrix> es(kc);
        if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
        uc_ = es.eigenvectors();
        lc_ = detail::clipped(es.eigenvalues());
    }

    [[nodiscard]] const Matrix& sqrt_kq() const noexcept { return sqrt_kq_; }

    [[nodiscard]] Matrix g2(double delta) const {
        if (!(delta >= 0.0) || !std::isfinite(delta)) throw ConfigError("delta must be finite and nonnegative");
        Vector w(lc_.size());
        for (Eigen::Index i = 0; i < lc_.size(); ++i) {
            const double d = lc_(i) + delta;
            if (!(d > 0.0)) throw NumericalError("K_c + delta I is singular");
            w(i) = lc_(i) / (d * d);
        }
        const Matrix b = sqrt_kq_ * uc_;
        Matrix g = b * w.asDiagonal() * b.transpose();
        return 0.5 * (g + g.transpose());
    }

  private:
    Matrix sqrt_kq_;
    Matrix uc_;
    Vector lc_;
};

inline Matrix geometry_matrix(const Matrix& kq, const Matrix& kc, double delta) {
    return GeometryPrep(kq, kc).g2(delta);
}

/**
 * Balanced labels from scores: above the median +1, below -1; values equal
 * to the median go, in ascending index order, to whichever side currently
 * has fewer members (-1 on a tie).
 */
inline std::vector<int> median_split(const Vector& scores) {
    const auto n = static_cast<std::size_t>(scores.size());
    if (n == 0) throw DataError("no scores to split");
    if (scores.maxCoeff() == scores.minCoeff()) throw DataError("all synthetic-label scores are identical");
    std::vector<double> sorted(scores.data(), scores.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    std::vector<int> labels(n, 0);
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = scores(static_cast<Eigen::Index>(i));
        if (s > median) {
            labels[i] = 1;
            ++pos;
        } else if (s < median) {
            labels[i] = -1;
            ++neg;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != 0) continue;
        if (pos < neg) {
            labels[i] = 1;
            ++pos;
        } else {
            labels[i] = -1;
            ++neg;
        }
    }
    return labels;
}

inline std::vector<int> synthetic_labels(const Matrix& sqrt_kq, const Vector& v) {
    if (sqrt_kq.cols() != v.size()) throw ConfigError("eigenvector length does not match the kernel");
    return median_split(sqrt_kq * v);
}

struct GeometryResult {
    double delta = 0.0;
    double eigenvalue = 0.0;
    Vector v;
    std::vector<int> labels;
    std::vector<double> spectrum_head;  // leading eigenvalues, descending
};

/// Leading eigenpair of a symmetric matrix; the largest-magnitude entry of v is positive.
inline std::pair<double, Vector> leading_eigenpair(const Matrix& g2, std::vector<double>* head = nullptr,
                                                   std::size_t head_size = 8) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(g2);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    const Eigen::Index top = g2.rows() - 1;
    Vector v = es.eigenvectors().col(top).normalized();
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    if (head) {
        head->clear();
        for (Eigen::Index i = top; i >= 0 && head->size() < head_size; --i) head->push_back(es.eigenvalues()(i));
    }
    return {es.eigenvalues()(top), v};
}

inline GeometryResult geometry_result(const GeometryPrep& prep, double delta) {
    GeometryResult r;
    r.delta = delta;
    auto [lambda, v] = leading_eigenpair(prep.g2(delta), &r.spectrum_head);
    r.eigenvalue = lambda;
    r.v = std::move(v);
    r.labels = synthetic_labels(prep.sqrt_kq(), r.v);
    return r;
}

/// 25 values 10^-8, 10^-7.75, ..., 10^-2.
inline std::vector<double> delta_grid(double lo_exp = -8.0, double hi_exp = -2.0, double step = 0.25) {
    std::vector<double> out;
    const auto n = static_cast<int>(std::llround((hi_exp - lo_exp) / step));
    for (int k = 0; k <= n; ++k) out.push_back(std::pow(10.0, lo_exp + step * k));
    return out;
}

inline std::vector<GeometryResult> delta_sweep(const Matrix& kq, const Matrix& kc,
                                               const std::vector<double>& deltas = delta_grid()) {
    const GeometryPrep prep(kq, kc);
    std::vector<GeometryResult> out;
    out.reserve(deltas.size());
    for (double d : deltas) out.push_back(geometry_result(prep, d));
    return out;
}

inline nlohmann::json to_json(const GeometryResult& r) {
    return {{"delta", r.delta},
            {"eigenvalue", r.eigenvalue},
            {"spectrum_head", r.spectrum_head},
            {"v", std::vector<double>(r.v.data(), r.v.data() + r.v.size())},
            {"labels", r.labels}};
}

inline GeometryResult geometry_result_from_json(const nlohmann::json& j) {
    try {
        GeometryResult r;
        r.delta = j.at("delta").get<double>();
        r.eigenvalue = j.at("eigenvalue").get<double>();
        r.spectrum_head = j.at("spectrum_head").get<std::vector<double>>();
        const auto v = j.at("v").get<std::vector<double>>();
        r.v = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
        r.labels = j.at("labels").get<std::vector<int>>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed geometry result: ") + e.what());
    }
}

/// Disjoint halves of each probe's shots, by a seeded shuffle; the first half takes the odd shot.
struct ShotSplit {
    ShotTable first;
    ShotTable second;
    std::uint64_t seed = 0;
};

inline ShotSplit split_shot_protocol(const ShotTable& table, std::uint64_t seed) {
    const std::size_t n = table.n_shots();
    if (n < 2) throw ConfigError("splitting shots needs at least two shots per probe");
    const std::size_t n1 = (n + 1) / 2;
    ShotSplit out{ShotTable(table.n_qubits(), table.n_probes(), n1, table.seed()),
                  ShotTable(table.n_qubits(), table.n_probes(), n - n1, table.seed()), seed};
    const CounterRng root = CounterRng(seed).derive(0x73706c6974);
    std::vector<std::size_t> idx(n);
    for (std::size_t d = 0; d < table.n_datapoints(); ++d) {
        std::vector<std::uint64_t> a, b;
        a.reserve(n1 * table.n_probes());
        b.reserve((n - n1) * table.n_probes());
        for (std::size_t k = 0; k < table.n_probes(); ++k) {
            const auto s = table.shots(d, k);
            for (std::size_t i = 0; i < n; ++i) idx[i] = i;
            SequentialRng rng(root.derive(table.ids()[d]).derive(k));
            for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
            for (std::size_t i = 0; i < n; ++i) (i < n1 ? a : b).push_back(s[idx[i]]);
        }
        out.first.add(table.ids()[d], std::move(a));
        out.second.add(table.ids()[d], std::move(b));
    }
    return out;
}

inline void write_kernel_csv(std::ostream& os, const Matrix& k) {
    std::ostringstream line;
    line.precision(17);
    for (Eigen::Index r = 0; r < k.rows(); ++r) {
        line.str("");
        for (Eigen::Index c = 0; c < k.cols(); ++c) {
            if (c) line << ',';
            line << k(r, c);
        }
        os << line.str() << '\n';
    }
}

inline Matrix read_kernel_csv(std::istream& is) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw DataError("kernel CSV row " + std::to_string(rows.size() + 1) + ": bad number '" + cell + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    Matrix k(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.size()) throw DataError("kernel CSV is not square");
        for (std::size_t c = 0; c < rows.size(); ++c) {
            k(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return k;
}

}  // namespace qrc
