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

#include <cstddef>
#include <cstdio>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qrc/core_model.hpp"

namespace qrc {

enum class PairMode { all_pairs, nearest_neighbor };

/// Which <Z_j> and <Z_j Z_k> make up one probe's slice of an embedding.
struct ObservableSpec {
    std::size_t n_qubits = 0;
    std::vector<std::size_t> singles;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    PairMode mode = PairMode::all_pairs;

    static ObservableSpec all_pairs(std::size_t n) {
        ObservableSpec s;
        s.n_qubits = n;
        for (std::size_t i = 0; i < n; ++i) {
            s.singles.push_back(i);
            for (std::size_t j = i + 1; j < n; ++j) {
                s.pairs.emplace_back(i, j);
            }
        }
        s.mode = PairMode::all_pairs;
        return s;
    }

    static ObservableSpec nearest_neighbor(const AtomArray& array) {
        ObservableSpec s;
        s.n_qubits = array.size();
        for (std::size_t i = 0; i < array.size(); ++i) {
            s.singles.push_back(i);
        }
        s.pairs = nearest_neighbor_pairs(array);
        s.mode = PairMode::nearest_neighbor;
        return s;
    }

    /// All pairs up to 16 atoms, nearest-neighbour pairs beyond.
    static ObservableSpec default_for(const AtomArray& array) {
        return array.size() <= 16 ? all_pairs(array.size()) : nearest_neighbor(array);
    }

    [[nodiscard]] std::size_t size() const noexcept { return singles.size() + pairs.size(); }

    void validate() const {
        std::set<std::size_t> seen;
        for (auto i : singles) {
            if (i >= n_qubits) {
                throw ConfigError("observable site " + std::to_string(i) + " out of range");
            }
            if (!seen.insert(i).second) {
                throw ConfigError("duplicate single-site observable " + std::to_string(i));
            }
        }
        std::set<std::pair<std::size_t, std::size_t>> seen_pairs;
        for (auto [i, j] : pairs) {
            if (i == j) {
                throw ConfigError("pair observable Z_i Z_i is identically 1");
            }
            if (!(i < j)) {
                throw ConfigError("pair observables must be ordered (i < j)");
            }
            if (j >= n_qubits) {
                throw ConfigError("pair observable site out of range");
            }
            if (!seen_pairs.insert({i, j}).second) {
                throw ConfigError("duplicate pair observable");
            }
        }
    }
};

inline std::string format_time(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", t);
    return buf;
}

/// Column layout of an embedding: observables x probe times, probe-major.
struct EmbeddingLayout {
    ObservableSpec observables;
    std::vector<double> probe_times;

    [[nodiscard]] std::size_t dim() const noexcept { return observables.size() * probe_times.size(); }

    [[nodiscard]] std::vector<std::string> column_names() const {
        std::vector<std::string> names;
        names.reserve(dim());
        for (double t : probe_times) {
            const auto ts = format_time(t);
            for (auto i : observables.singles) {
                names.push_back("Z_" + std::to_string(i) + "@" + ts);
            }
            for (auto [i, j] : observables.pairs) {
                names.push_back("ZZ_" + std::to_string(i) + "_" + std::to_string(j) + "@" + ts);
            }
        }
        return names;
    }

    friend bool operator==(const EmbeddingLayout& a, const EmbeddingLayout& b) {
        return a.observables.singles == b.observables.singles &&
               a.observables.pairs == b.observables.pairs && a.probe_times == b.probe_times;
    }
};

}  // namespace qrc
