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

// Measurement shots for a set of datapoints.
//
// CSV form, one row per shot:
//
//   datapoint,probe,bitstring
//   17,0,000100101
//
// where character k of the bitstring is atom k ('1' = Rydberg).
//
// Binary form (all integers little-endian):
//
//   char[8]  magic "QRCSHOT1"
//   u32      version (1)
//   u32      n_qubits
//   u32      n_probes
//   u32      reserved (0)
//   u64      n_shots per probe
//   u64      seed
//   u64      n_datapoints
//   then per datapoint:
//     u64    datapoint id
//     n_probes * n_shots records of ceil(n_qubits / 8) bytes, probe-major,
//     bit k of the record (byte k / 8, bit k % 8) = atom k

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "qrc/errors.hpp"
#include "qrc/quantum_sim.hpp"
#include "qrc/rng.hpp"

namespace qrc {

class ShotTable {
  public:
    ShotTable() = default;

    ShotTable(std::size_t n_qubits, std::size_t n_probes, std::size_t n_shots, std::uint64_t seed)
        : n_qubits_(n_qubits), n_probes_(n_probes), n_shots_(n_shots), seed_(seed) {
        if (n_qubits_ == 0 || n_qubits_ > 64) {
            throw ConfigError("shot table supports 1..64 qubits");
        }
        if (n_probes_ == 0 || n_shots_ == 0) {
            throw ConfigError("shot table needs at least one probe and one shot");
        }
    }

    [[nodiscard]] std::size_t n_qubits() const noexcept { return n_qubits_; }
    [[nodiscard]] std::size_t n_probes() const noexcept { return n_probes_; }
    [[nodiscard]] std::size_t n_shots() const noexcept { return n_shots_; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::size_t n_datapoints() const noexcept { return ids_.size(); }
    [[nodiscard]] const std::vector<std::uint64_t>& ids() const noexcept { return ids_; }

    /// Appends one datapoint; `shots` is probe-major, n_probes * n_shots long.
    void add(std::uint64_t id, std::vector<std::uint64_t> shots) {
        if (shots.size() != n_probes_ * n_shots_) {
            throw ConfigError("datapoint shot count does not match the table shape");
        }
        const std::uint64_t mask = n_qubits_ == 64 ? ~0ULL : ((1ULL << n_qubits_) - 1);
        for (auto b : shots) {
            if (b & ~mask) {
                throw ConfigError("bitstring has bits beyond n_qubits");
            }
        }
        ids_.push_back(id);
        bits_.insert(bits_.end(), shots.begin(), shots.end());
    }

    [[nodiscard]] std::span<const std::uint64_t> shots(std::size_t datapoint, std::size_t probe) const {
        const std::size_t off = (datapoint * n_probes_ + probe) * n_shots_;
        return {bits_.data() + off, n_shots_};
    }

    [[nodiscard]] std::span<const std::uint64_t> datapoint_shots(std::size_t datapoint) const {
        return {bits_.data() + datapoint * n_probes_ * n_shots_, n_probes_ * n_shots_};
    }

    friend bool operator==(const ShotTable&, const ShotTable&) = default;

  private:
    std::size_t n_qubits_ = 0;
    std::size_t n_probes_ = 0;
    std::size_t n_shots_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<std::uint64_t> ids_;
    std::vector<std::uint64_t> bits_;
};

/// Stream for one (datapoint, probe) pair under a master seed.
inline CounterRng shot_stream(std::uint64_t seed, std::uint64_t datapoint, std::uint64_t probe) {
    return CounterRng(seed).derive(datapoint).derive(probe);
}

/**
 * Shots [first_shot, first_shot + n_shots) for every probe of one datapoint,
 * probe-major. `probs[k]` is the outcome distribution at probe k.
 */
inline std::vector<std::uint64_t> sample_datapoint(const std::vector<std::vector<double>>& probs,
                                                   std::size_t n_shots, std::uint64_t seed,
                                                   std::uint64_t datapoint, std::uint64_t first_shot = 0) {
    std::vector<std::uint64_t> out;
    out.reserve(probs.size() * n_shots);
    for (std::size_t k = 0; k < probs.size(); ++k) {
        const auto s = sample_from_probabilities(probs[k], n_shots, shot_stream(seed, datapoint, k), first_shot);
        out.insert(out.end(), s.begin(), s.end());
    }
    return out;
}

/// Shot-wise concatenation of two tables over the same datapoints.
inline ShotTable concat_shots(const ShotTable& a, const ShotTable& b) {
    if (a.n_qubits() != b.n_qubits() || a.n_probes() != b.n_probes() || a.ids() != b.ids()) {
        throw ConfigError("shot tables disagree on shape or datapoints");
    }
    ShotTable out(a.n_qubits(), a.n_probes(), a.n_shots() + b.n_shots(), a.seed());
    for (std::size_t d = 0; d < a.n_datapoints(); ++d) {
        std::vector<std::uint64_t> s;
        for (std::size_t k = 0; k < a.n_probes(); ++k) {
            const auto x = a.shots(d, k);
            const auto y = b.shots(d, k);
            s.insert(s.end(), x.begin(), x.end());
            s.insert(s.end(), y.begin(), y.end());
        }
        out.add(a.ids()[d], std::move(s));
    }
    return out;
}

inline std::string bitstring_to_string(std::uint64_t bits, std::size_t n_qubits) {
    std::string s(n_qubits, '0');
    for (std::size_t k = 0; k < n_qubits; ++k) {
        if ((bits >> k) & 1U) s[k] = '1';
    }
    return s;
}

inline std::uint64_t bitstring_from_string(const std::string& s) {
    if (s.empty() || s.size() > 64) {
        throw DataError("bitstring length must be 1..64");
    }
    std::uint64_t b = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (s[k] == '1') {
            b |= 1ULL << k;
        } else if (s[k] != '0') {
            throw DataError("bitstring contains '" + std::string(1, s[k]) + "'");
        }
    }
    return b;
}

inline void write_shots_csv(const ShotTable& t, std::ostream& out) {
    out << "datapoint,probe,bitstring\n";
    for (std::size_t d = 0; d < t.n_datapoints(); ++d) {
        for (std::size_t k = 0; k < t.n_probes(); ++k) {
            for (auto b : t.shots(d, k)) {
                out << t.ids()[d] << ',' << k << ',' << bitstring_to_string(b, t.n_qubits()) << '\n';
            }
        }
    }
}

/// Rows must be grouped by datapoint, probe-major, equal shots per probe.
inline ShotTable read_shots_csv(std::istream& in, std::uint64_t seed = 0) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("datapoint,probe,bitstring", 0) != 0) {
        throw DataError("shot CSV: missing header 'datapoint,probe,bitstring'");
    }
    struct Row {
        std::uint64_t id;
        std::size_t probe;
        std::uint64_t bits;
    };
    std::vector<Row> rows;
    std::size_t n_qubits = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) {
            throw DataError("shot CSV line " + std::to_string(lineno) + ": expected 3 fields");
        }
        if (!c.empty() && c.back() == '\r') c.pop_back();
        if (n_qubits == 0) n_qubits = c.size();
        if (c.size() != n_qubits) {
            throw DataError("shot CSV line " + std::to_string(lineno) + ": bitstring length changes");
        }
        try {
            rows.push_back({std::stoull(a), static_cast<std::size_t>(std::stoull(b)), bitstring_from_string(c)});
        } catch (const std::logic_error&) {
            throw DataError("shot CSV line " + std::to_string(lineno) + ": malformed field");
        }
    }
    if (rows.empty()) {
        throw DataError("shot CSV has no rows");
    }
    std::size_t n_probes = 0;
    for (const auto& r : rows) n_probes = std::max(n_probes, r.probe + 1);
    std::size_t per_dp = 0;
    while (per_dp < rows.size() && rows[per_dp].id == rows[0].id) ++per_dp;
    if (per_dp % n_probes != 0 || rows.size() % per_dp != 0) {
        throw DataError("shot CSV: unequal shot counts across probes or datapoints");
    }
    ShotTable t(n_qubits, n_probes, per_dp / n_probes, seed);
    for (std::size_t start = 0; start < rows.size(); start += per_dp) {
        std::vector<std::uint64_t> s;
        for (std::size_t i = 0; i < per_dp; ++i) {
            const auto& r = rows[start + i];
            if (r.id != rows[start].id || r.probe != i / (per_dp / n_probes)) {
                throw DataError("shot CSV: rows not grouped by datapoint and probe");
            }
            s.push_back(r.bits);
        }
        t.add(rows[start].id, std::move(s));
    }
    return t;
}

namespace detail {

template <class T>
void put_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& in, const char* what) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
        throw DataError(std::string("truncated binary file while reading ") + what);
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

}  // namespace detail

inline constexpr char kShotMagic[8] = {'Q', 'R', 'C', 'S', 'H', 'O', 'T', '1'};

inline void write_shots_binary(const ShotTable& t, std::ostream& out) {
    out.write(kShotMagic, 8);
    detail::put_le<std::uint32_t>(out, 1);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.n_qubits()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.n_probes()));
    detail::put_le<std::uint32_t>(out, 0);
    detail::put_le<std::uint64_t>(out, t.n_shots());
    detail::put_le<std::uint64_t>(out, t.seed());
    detail::put_le<std::uint64_t>(out, t.n_datapoints());
    const std::size_t nbytes = (t.n_qubits() + 7) / 8;
    std::vector<char> rec(nbytes);
    for (std::size_t d = 0; d < t.n_datapoints(); ++d) {
        detail::put_le<std::uint64_t>(out, t.ids()[d]);
        for (auto b : t.datapoint_shots(d)) {
            for (std::size_t i = 0; i < nbytes; ++i) rec[i] = static_cast<char>((b >> (8 * i)) & 0xFF);
            out.write(rec.data(), static_cast<std::streamsize>(nbytes));
        }
    }
}

inline ShotTable read_shots_binary(std::istream& in) {
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kShotMagic, 8) != 0) {
        throw DataError("shot file: bad magic at offset 0 (expected QRCSHOT1)");
    }
    const auto version = detail::get_le<std::uint32_t>(in, "version");
    if (version != 1) {
        throw DataError("shot file: unsupported version " + std::to_string(version));
    }
    const auto n_qubits = detail::get_le<std::uint32_t>(in, "n_qubits");
    const auto n_probes = detail::get_le<std::uint32_t>(in, "n_probes");
    (void)detail::get_le<std::uint32_t>(in, "reserved");
    const auto n_shots = detail::get_le<std::uint64_t>(in, "n_shots");
    const auto seed = detail::get_le<std::uint64_t>(in, "seed");
    const auto n_dp = detail::get_le<std::uint64_t>(in, "n_datapoints");
    ShotTable t;
    try {
        t = ShotTable(n_qubits, n_probes, n_shots, seed);
    } catch (const ConfigError& e) {
        throw DataError(std::string("shot file header: ") + e.what());
    }
    const std::size_t nbytes = (n_qubits + 7) / 8;
    std::vector<unsigned char> rec(nbytes);
    for (std::uint64_t d = 0; d < n_dp; ++d) {
        const auto id = detail::get_le<std::uint64_t>(in, "datapoint id");
        std::vector<std::uint64_t> s(static_cast<std::size_t>(n_probes * n_shots));
        for (auto& b : s) {
            if (!in.read(reinterpret_cast<char*>(rec.data()), static_cast<std::streamsize>(nbytes))) {
                throw DataError("shot file: truncated shot records");
            }
            b = 0;
            for (std::size_t i = 0; i < nbytes; ++i) b |= static_cast<std::uint64_t>(rec[i]) << (8 * i);
        }
        try {
            t.add(id, std::move(s));
        } catch (const ConfigError& e) {
            throw DataError(std::string("shot file: ") + e.what());
        }
    }
    return t;
}

}  // namespace qrc
