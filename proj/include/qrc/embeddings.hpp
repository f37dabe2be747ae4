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

// Embedding vectors: <Z_i> and <Z_i Z_j> per probe, probe-major.
//
// CSV form:
//
//   datapoint,backend,Z_0@0.5,...,ZZ_0_1@0.5,...
//
// with a JSON sidecar recording the layout and provenance.

#pragma once

#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qrc/core_model.hpp"
#include "qrc/observables.hpp"
#include "qrc/rng.hpp"
#include "qrc/shot_table.hpp"

namespace qrc {

struct Provenance {
    std::string backend = "qrc";  // qrc | crc | features
    bool exact = true;
    std::size_t n_shots = 0;
    std::uint64_t seed = 0;
    double resample_fraction = 1.0;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct EmbeddingSet {
    Matrix values;  // n_samples x layout.dim()
    EmbeddingLayout layout;
    Provenance provenance;
    std::vector<std::uint64_t> ids;

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(values.rows()); }

    void validate() const {
        if (static_cast<std::size_t>(values.cols()) != layout.dim()) {
            throw DataError("embedding width does not match its layout");
        }
        if (!ids.empty() && ids.size() != size()) {
            throw DataError("embedding id count does not match the rows");
        }
        if (values.size() && (values.maxCoeff() > 1.0 + 1e-12 || values.minCoeff() < -1.0 - 1e-12)) {
            throw DataError("embedding entries must lie in [-1, 1]");
        }
    }
};

/// Integer tallies behind one probe's estimates: ones per single, disagreements per pair.
struct ObservableCounts {
    std::vector<std::uint64_t> ones;
    std::vector<std::uint64_t> differ;
    std::uint64_t shots = 0;
};

inline ObservableCounts count_observables(std::span<const std::uint64_t> shots, const ObservableSpec& spec) {
    ObservableCounts c;
    c.ones.assign(spec.singles.size(), 0);
    c.differ.assign(spec.pairs.size(), 0);
    c.shots = shots.size();
    for (auto b : shots) {
        for (std::size_t s = 0; s < spec.singles.size(); ++s) c.ones[s] += (b >> spec.singles[s]) & 1U;
        for (std::size_t p = 0; p < spec.pairs.size(); ++p) {
            const auto [i, j] = spec.pairs[p];
            c.differ[p] += ((b >> i) ^ (b >> j)) & 1U;
        }
    }
    return c;
}

/// <Z> = (2 ones - N) / N, <ZZ> = (N - 2 differ) / N.
inline void append_estimates(const ObservableCounts& c, std::vector<double>& out) {
    const auto n = static_cast<double>(c.shots);
    for (auto o : c.ones) out.push_back((2.0 * static_cast<double>(o) - n) / n);
    for (auto d : c.differ) out.push_back((n - 2.0 * static_cast<double>(d)) / n);
}

/// Embedding of one datapoint from its shots.
inline std::vector<double> estimate_observables(const ShotTable& table, std::size_t datapoint,
                                                const ObservableSpec& spec) {
    spec.validate();
    if (spec.n_qubits != table.n_qubits()) {
        throw ConfigError("observable spec and shot table disagree on qubit count");
    }
    std::vector<double> out;
    for (std::size_t k = 0; k < table.n_probes(); ++k) {
        const auto s = table.shots(datapoint, k);
        if (s.empty()) throw DataError("empty shot set");
        append_estimates(count_observables(s, spec), out);
    }
    return out;
}

/// floor(fraction * n) distinct indices of [0, n), by partial Fisher-Yates.
inline std::vector<std::size_t> choose_subset(std::size_t n, double fraction, const CounterRng& stream) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ConfigError("resample fraction must lie in (0, 1]");
    }
    const auto m = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
    if (m == 0) {
        throw ConfigError("resampled shot subset is empty");
    }
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (m == n) return idx;
    SequentialRng rng(stream);
    for (std::size_t i = 0; i < m; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(m);
    return idx;
}

/// Embedding from a random floor(fraction * N_s) subset of each probe's shots.
inline std::vector<double> resample_from_shots(std::span<const std::uint64_t> probe_major, std::size_t n_probes,
                                               const ObservableSpec& spec, double fraction,
                                               const CounterRng& stream) {
    const std::size_t n_shots = probe_major.size() / n_probes;
    std::vector<double> out;
    std::vector<std::uint64_t> subset;
    for (std::size_t k = 0; k < n_probes; ++k) {
        const auto all = probe_major.subspan(k * n_shots, n_shots);
        if (fraction == 1.0) {
            append_estimates(count_observables(all, spec), out);
            continue;
        }
        const auto idx = choose_subset(n_shots, fraction, stream.derive(k));
        subset.clear();
        for (auto i : idx) subset.push_back(all[i]);
        append_estimates(count_observables(subset, spec), out);
    }
    return out;
}

inline std::vector<double> resample_embeddings(const ShotTable& table, std::size_t datapoint,
                                               const ObservableSpec& spec, double fraction,
                                               const CounterRng& stream) {
    spec.validate();
    return resample_from_shots(table.datapoint_shots(datapoint), table.n_probes(), spec, fraction, stream);
}

/// Embedding rows straight from outcome distributions (exact backend).
inline std::vector<double> exact_embedding(const std::vector<std::vector<double>>& probs, const ObservableSpec& spec) {
    std::vector<double> out;
    for (const auto& p : probs) {
        const auto e = expectations_from_probabilities(p, spec);
        out.insert(out.end(), e.begin(), e.end());
    }
    return out;
}

inline std::optional<double> pearson(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
    if (a.size() == 0 || a.maxCoeff() == a.minCoeff() || b.maxCoeff() == b.minCoeff()) return std::nullopt;
    const double ma = a.mean();
    const double mb = b.mean();
    const Vector da = a.array() - ma;
    const Vector db = b.array() - mb;
    const double va = da.squaredNorm();
    const double vb = db.squaredNorm();
    if (!(va > 0.0) || !(vb > 0.0)) return std::nullopt;
    return da.dot(db) / std::sqrt(va * vb);
}

inline constexpr std::size_t kDefaultRhoBatch = 60;

/**
 * Pearson correlation of the flattened batch blocks of two embedding sets.
 * Batches are consecutive runs of `batch` samples; a shorter final batch is
 * kept. Entries are empty where either block has zero variance.
 */
inline std::vector<std::optional<double>> consistency_rho(const EmbeddingSet& reference, const EmbeddingSet& observed,
                                                          std::size_t batch = kDefaultRhoBatch) {
    if (!(reference.layout == observed.layout) || reference.size() != observed.size()) {
        throw ConfigError("consistency_rho needs embedding sets with the same layout and samples");
    }
    if (batch == 0) throw ConfigError("batch size must be positive");
    std::vector<std::optional<double>> out;
    const auto d = reference.values.cols();
    for (std::size_t start = 0; start < reference.size(); start += batch) {
        const auto rows = static_cast<Eigen::Index>(std::min(batch, reference.size() - start));
        const auto r0 = static_cast<Eigen::Index>(start);
        Matrix a = reference.values.block(r0, 0, rows, d);
        Matrix b = observed.values.block(r0, 0, rows, d);
        out.push_back(pearson(Eigen::Map<const Vector>(a.data(), a.size()), Eigen::Map<const Vector>(b.data(), b.size())));
    }
    return out;
}

/// Mean of the defined per-batch values.
inline std::optional<double> mean_rho(const std::vector<std::optional<double>>& rho) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& r : rho) {
        if (r) {
            s += *r;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return s / static_cast<double>(n);
}

inline nlohmann::json layout_to_json(const EmbeddingLayout& l) {
    nlohmann::json pairs = nlohmann::json::array();
    for (auto [i, j] : l.observables.pairs) pairs.push_back({i, j});
    return {{"n_qubits", l.observables.n_qubits},
            {"singles", l.observables.singles},
            {"pairs", pairs},
            {"pair_mode", l.observables.mode == PairMode::all_pairs ? "all_pairs" : "nearest_neighbor"},
            {"probe_times", l.probe_times}};
}

inline EmbeddingLayout layout_from_json(const nlohmann::json& j) {
    EmbeddingLayout l;
    l.observables.n_qubits = j.at("n_qubits").get<std::size_t>();
    l.observables.singles = j.at("singles").get<std::vector<std::size_t>>();
    for (const auto& p : j.at("pairs")) l.observables.pairs.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>());
    l.observables.mode = j.value("pair_mode", std::string("all_pairs")) == "all_pairs" ? PairMode::all_pairs
                                                                                        : PairMode::nearest_neighbor;
    l.probe_times = j.at("probe_times").get<std::vector<double>>();
    l.observables.validate();
    return l;
}

inline nlohmann::json sidecar_json(const EmbeddingSet& e) {
    return {{"layout", layout_to_json(e.layout)},
            {"provenance",
             {{"backend", e.provenance.backend},
              {"exact", e.provenance.exact},
              {"n_shots", e.provenance.n_shots},
              {"seed", e.provenance.seed},
              {"resample_fraction", e.provenance.resample_fraction}}},
            {"n_samples", e.size()}};
}

inline void write_embeddings_csv(const EmbeddingSet& e, std::ostream& out) {
    e.validate();
    out << "datapoint,backend";
    for (const auto& name : e.layout.column_names()) out << ',' << name;
    out << '\n';
    out.precision(17);
    for (std::size_t r = 0; r < e.size(); ++r) {
        out << (e.ids.empty() ? r : e.ids[r]) << ',' << e.provenance.backend;
        for (Eigen::Index c = 0; c < e.values.cols(); ++c) out << ',' << e.values(static_cast<Eigen::Index>(r), c);
        out << '\n';
    }
}

/// Reads values and ids; layout and provenance come from the sidecar.
inline EmbeddingSet read_embeddings_csv(std::istream& in, const nlohmann::json& sidecar) {
    EmbeddingSet e;
    try {
        e.layout = layout_from_json(sidecar.at("layout"));
        const auto& p = sidecar.at("provenance");
        e.provenance = {p.at("backend").get<std::string>(), p.at("exact").get<bool>(),
                        p.at("n_shots").get<std::size_t>(), p.at("seed").get<std::uint64_t>(),
                        p.at("resample_fraction").get<double>()};
    } catch (const nlohmann::json::exception& ex) {
        throw DataError(std::string("embedding sidecar: ") + ex.what());
    }
    std::string line;
    if (!std::getline(in, line)) throw DataError("embedding CSV is empty");
    const auto names = e.layout.column_names();
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> f;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (f.size() != names.size() + 2) {
            throw DataError("embedding CSV line " + std::to_string(lineno) + ": wrong column count");
        }
        try {
            e.ids.push_back(std::stoull(f[0]));
            std::vector<double> v;
            for (std::size_t c = 2; c < f.size(); ++c) v.push_back(std::stod(f[c]));
            rows.push_back(std::move(v));
        } catch (const std::logic_error&) {
            throw DataError("embedding CSV line " + std::to_string(lineno) + ": malformed number");
        }
    }
    e.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < names.size(); ++c) {
            e.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    e.validate();
    return e;
}

}  // namespace qrc
