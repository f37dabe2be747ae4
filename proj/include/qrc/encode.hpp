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

// Data -> Rydberg program encoders.
//
//   position      V_{i,i+1} = V0 (1 + lambda x_i): gap_i = d0 (1 + lambda x_i)^(-1/6)
//   local_pulse   alpha_i Delta_l = Delta_l^max x_i, constant in time
//   global_pulse  Delta_g(k dtau) = lo + (hi - lo) x_k, linear between
//                 breakpoints, held at the last value to the end
//
// Every program uses the same Rabi drive: linear ramp over `ramp`, plateau
// at `rabi`, ramp back to zero, total duration probe_count * probe_interval.

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qrc/core_model.hpp"
#include "qrc/rng.hpp"

namespace qrc {

enum class Geometry { chain, grid, irregular_chain };

inline std::string to_string(Geometry g) {
    switch (g) {
        case Geometry::chain: return "chain";
        case Geometry::grid: return "grid";
        case Geometry::irregular_chain: return "irregular_chain";
    }
    return "unknown";
}

inline Geometry geometry_from_string(const std::string& s) {
    if (s == "chain") return Geometry::chain;
    if (s == "grid") return Geometry::grid;
    if (s == "irregular_chain" || s == "irregular") return Geometry::irregular_chain;
    throw ConfigError("unknown geometry '" + s + "'");
}

/// Frequencies in rad/us, lengths in um, times in us.
struct EncodingSpec {
    EncodingKind kind = EncodingKind::position;
    std::size_t n_qubits = 9;

    double rabi = kTwoPi;
    double ramp = 0.05;
    double probe_interval = 0.5;
    std::size_t probe_count = 5;
    bool include_rampdown = true;
    double global_detuning = kTwoPi;  // constant Delta_g (position, local)

    double lambda = 3.0;  // position
    double d0 = 10.0;     // bare spacing, um
    double d0y = 10.0;    // grid row pitch, um
    std::size_t rows = 1;  // grid R_y; columns R_x = n_qubits / rows
    double min_gap = 4.0;
    bool round_positions = true;

    double local_max = -8.0;  // Delta_l^max

    double pulse_lo = 0.0;  // global pulse range
    double pulse_hi = 12.0;
    double encode_interval = 0.35;  // dtau

    Geometry geometry = Geometry::chain;
    double irregular_base = 8.9;  // gaps (base - g_i), g_i ~ U[0, 1]
    std::uint64_t geometry_seed = 0;

    [[nodiscard]] double total_time() const { return probe_interval * static_cast<double>(probe_count); }

    [[nodiscard]] std::size_t columns() const { return rows ? n_qubits / rows : 0; }

    /// Number of features this spec consumes per datapoint.
    [[nodiscard]] std::size_t feature_dim() const {
        switch (kind) {
            case EncodingKind::position:
                return geometry == Geometry::grid ? (columns() - 1) * rows : n_qubits - 1;
            case EncodingKind::local_pulse:
                return n_qubits;
            case EncodingKind::global_pulse: {
                const double r = total_time() / encode_interval;
                return static_cast<std::size_t>(std::floor(r + 1e-9));
            }
        }
        return 0;
    }

    void validate() const {
        if (n_qubits == 0) throw ConfigError("encoding needs at least one qubit");
        if (!(rabi > 0.0)) throw ConfigError("Rabi plateau must be positive");
        if (!(probe_interval > 0.0) || probe_count == 0) throw ConfigError("probe schedule is empty");
        if (!(ramp > 0.0) || (include_rampdown && probe_interval < 2.0 * ramp - 1e-12)) {
            throw ConfigError("probe interval must cover both ramps");
        }
        if (!(d0 > 0.0) || !(d0y > 0.0) || !(min_gap >= 0.0)) throw ConfigError("spacings must be positive");
        if (kind == EncodingKind::position && !(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
        if (geometry == Geometry::grid) {
            if (rows == 0 || n_qubits % rows != 0 || columns() < 2) {
                throw ConfigError("grid needs rows dividing n_qubits and at least two columns");
            }
        }
        if (kind == EncodingKind::global_pulse) {
            if (!(encode_interval > 0.0)) throw ConfigError("encode interval must be positive");
            if (!(pulse_hi >= pulse_lo)) throw ConfigError("pulse range is inverted");
            if (feature_dim() < 1) throw ConfigError("program too short for one pulse feature");
        }
        if (geometry == Geometry::irregular_chain && !(irregular_base - 1.0 >= min_gap)) {
            throw ConfigError("irregular chain gaps may fall below the minimum gap");
        }
    }
};

namespace detail {

inline void check_features(std::span<const double> x, std::size_t expected) {
    if (x.size() != expected) {
        throw DataError("encoder expects " + std::to_string(expected) + " features, got " +
                        std::to_string(x.size()));
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] >= 0.0 && x[i] <= 1.0)) {
            throw DataError("feature " + std::to_string(i) + " = " + std::to_string(x[i]) + " outside [0, 1]");
        }
    }
}

inline AtomArray finish(std::vector<Vec2> pos, bool round) {
    AtomArray a(std::move(pos));
    return round ? a.rounded_copy() : a;
}

}  // namespace detail

/// Chain with gaps (base - g_i), g_i ~ U[0, 1) from `seed`. Fixed per seed.
inline AtomArray irregular_chain(std::size_t n, double base, std::uint64_t seed, bool round = true) {
    const CounterRng rng = CounterRng(seed).derive(0x6e6f6d);
    std::vector<Vec2> pos{{0.0, 0.0}};
    double x = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        x += base - rng.uniform(i - 1);
        pos.push_back({x, 0.0});
    }
    return detail::finish(std::move(pos), round);
}

inline AtomArray regular_chain(std::size_t n, double spacing, bool round = true) {
    std::vector<Vec2> pos;
    for (std::size_t i = 0; i < n; ++i) pos.push_back({spacing * static_cast<double>(i), 0.0});
    return detail::finish(std::move(pos), round);
}

/// Geometry of the local and global-pulse encodings.
inline AtomArray base_array(const EncodingSpec& spec) {
    switch (spec.geometry) {
        case Geometry::chain: return regular_chain(spec.n_qubits, spec.d0, spec.round_positions);
        case Geometry::irregular_chain:
            return irregular_chain(spec.n_qubits, spec.irregular_base, spec.geometry_seed, spec.round_positions);
        case Geometry::grid: {
            std::vector<Vec2> pos;
            for (std::size_t r = 0; r < spec.rows; ++r) {
                for (std::size_t c = 0; c < spec.columns(); ++c) {
                    pos.push_back({spec.d0 * static_cast<double>(c), spec.d0y * static_cast<double>(r)});
                }
            }
            return detail::finish(std::move(pos), spec.round_positions);
        }
    }
    throw ConfigError("unknown geometry");
}

/// gap = d0 (1 + lambda x)^(-1/6).
inline double encoded_gap(double x, double lambda, double d0) { return d0 * std::pow(1.0 + lambda * x, -1.0 / 6.0); }

/**
 * Position encoding. Chain: feature i sets the gap between atoms i and i+1.
 * Grid: R_y rows at pitch d0y, R_x atoms per row; each row's R_x - 1
 * horizontal gaps take the next R_x - 1 features (row-major). Atom index is
 * row * R_x + column.
 */
inline AtomArray encode_position(std::span<const double> x, const EncodingSpec& spec) {
    detail::check_features(x, spec.feature_dim());
    const std::size_t rows = spec.geometry == Geometry::grid ? spec.rows : 1;
    const std::size_t cols = spec.geometry == Geometry::grid ? spec.columns() : spec.n_qubits;
    std::vector<Vec2> pos;
    std::size_t f = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        double px = 0.0;
        const double py = spec.d0y * static_cast<double>(r);
        pos.push_back({px, py});
        for (std::size_t c = 1; c < cols; ++c) {
            const double gap = encoded_gap(x[f++], spec.lambda, spec.d0);
            if (gap < spec.min_gap) {
                throw ConfigError("encoded gap " + std::to_string(gap) + " um is below the minimum " +
                                  std::to_string(spec.min_gap) + " um");
            }
            px += gap;
            pos.push_back({px, py});
        }
    }
    return detail::finish(std::move(pos), spec.round_positions);
}

inline Waveform rabi_waveform(const EncodingSpec& spec) {
    return Waveform::trapezoid(spec.rabi, spec.ramp, spec.total_time());
}

inline RydbergProgram encode_position_program(std::span<const double> x, const EncodingSpec& spec) {
    const double t = spec.total_time();
    return RydbergProgram(encode_position(x, spec), rabi_waveform(spec),
                          Waveform::constant(spec.global_detuning, t), t);
}

/// alpha_i = x_i / max(x), Delta_l = Delta_l^max max(x), so alpha_i Delta_l = Delta_l^max x_i.
inline RydbergProgram encode_local(std::span<const double> x, const EncodingSpec& spec) {
    detail::check_features(x, spec.n_qubits);
    const double t = spec.total_time();
    const double xmax = *std::max_element(x.begin(), x.end());
    std::vector<double> alpha(x.size(), 0.0);
    if (xmax > 0.0) {
        for (std::size_t i = 0; i < x.size(); ++i) alpha[i] = std::min(1.0, x[i] / xmax);
    }
    return RydbergProgram(base_array(spec), rabi_waveform(spec), Waveform::constant(spec.global_detuning, t),
                          Waveform::constant(spec.local_max * xmax, t), std::move(alpha), t);
}

/**
 * Global pulse: feature k is the detuning at t = k * dtau; consecutive
 * features are joined linearly and the last value is held to the end of
 * the program. The waveform has one breakpoint per feature plus a terminal
 * hold breakpoint carrying the same value as the last feature.
 */
inline Waveform global_pulse_waveform(std::span<const double> x, const EncodingSpec& spec) {
    detail::check_features(x, spec.feature_dim());
    std::vector<Breakpoint> bps;
    for (std::size_t k = 0; k < x.size(); ++k) {
        bps.push_back({spec.encode_interval * static_cast<double>(k),
                       spec.pulse_lo + (spec.pulse_hi - spec.pulse_lo) * x[k]});
    }
    const double t = spec.total_time();
    if (t > bps.back().time + 1e-12) {
        bps.push_back({t, bps.back().value});
    }
    return Waveform(std::move(bps));
}

inline RydbergProgram encode_global_pulse(std::span<const double> x, const EncodingSpec& spec) {
    const double t = spec.total_time();
    return RydbergProgram(base_array(spec), rabi_waveform(spec), global_pulse_waveform(x, spec), t);
}

inline RydbergProgram encode(std::span<const double> x, const EncodingSpec& spec) {
    switch (spec.kind) {
        case EncodingKind::position: return encode_position_program(x, spec);
        case EncodingKind::local_pulse: return encode_local(x, spec);
        case EncodingKind::global_pulse: return encode_global_pulse(x, spec);
    }
    throw ConfigError("unknown encoding");
}

inline ProbeSchedule probe_schedule(const EncodingSpec& spec) {
    return ProbeSchedule::uniform(spec.probe_interval, spec.probe_count, spec.ramp, spec.include_rampdown);
}

inline RegimeSpec regime_spec(const EncodingSpec& spec) {
    RegimeSpec r;
    r.kind = spec.kind;
    r.probe_interval = spec.probe_interval;
    r.encode_interval = spec.kind == EncodingKind::global_pulse ? spec.encode_interval : 0.0;
    r.bare_spacing = spec.d0;
    return r;
}

/// JSON form. Frequencies are rad/us unless "frequency_unit": "MHz".
inline EncodingSpec encoding_from_json(const nlohmann::json& j) {
    try {
        EncodingSpec s;
        const std::string unit = j.value("frequency_unit", std::string("rad_per_us"));
        double f = 1.0;
        if (unit == "MHz") {
            f = kTwoPi;
        } else if (unit != "rad_per_us") {
            throw ConfigError("unknown frequency unit '" + unit + "'");
        }
        s.kind = encoding_kind_from_string(j.at("kind").get<std::string>());
        s.n_qubits = j.at("n_qubits").get<std::size_t>();
        s.rabi = j.value("rabi", s.rabi / f) * f;
        s.ramp = j.value("ramp", s.ramp);
        s.probe_interval = j.value("probe_interval", s.probe_interval);
        s.probe_count = j.value("probe_count", s.probe_count);
        s.include_rampdown = !j.value("snapshot_mode", false);
        s.global_detuning = j.value("global_detuning", s.global_detuning / f) * f;
        s.lambda = j.value("lambda", s.lambda);
        s.d0 = j.value("d0", s.d0);
        s.d0y = j.value("d0y", s.d0y);
        s.rows = j.value("rows", s.rows);
        s.min_gap = j.value("min_gap", s.min_gap);
        s.round_positions = j.value("round_positions", s.round_positions);
        s.local_max = j.value("local_max", s.local_max / f) * f;
        if (j.contains("pulse_range")) {
            s.pulse_lo = j["pulse_range"].at(0).get<double>() * f;
            s.pulse_hi = j["pulse_range"].at(1).get<double>() * f;
        }
        s.encode_interval = j.value("encode_interval", s.probe_interval);
        s.geometry = geometry_from_string(j.value("geometry", std::string("chain")));
        s.irregular_base = j.value("irregular_base", s.irregular_base);
        s.geometry_seed = j.value("geometry_seed", s.geometry_seed);
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed encoding spec: ") + e.what());
    }
}

inline nlohmann::json to_json(const EncodingSpec& s) {
    return {{"kind", to_string(s.kind)},
            {"n_qubits", s.n_qubits},
            {"frequency_unit", "rad_per_us"},
            {"rabi", s.rabi},
            {"ramp", s.ramp},
            {"probe_interval", s.probe_interval},
            {"probe_count", s.probe_count},
            {"snapshot_mode", !s.include_rampdown},
            {"global_detuning", s.global_detuning},
            {"lambda", s.lambda},
            {"d0", s.d0},
            {"d0y", s.d0y},
            {"rows", s.rows},
            {"min_gap", s.min_gap},
            {"round_positions", s.round_positions},
            {"local_max", s.local_max},
            {"pulse_range", {s.pulse_lo, s.pulse_hi}},
            {"encode_interval", s.encode_interval},
            {"geometry", to_string(s.geometry)},
            {"irregular_base", s.irregular_base},
            {"geometry_seed", s.geometry_seed}};
}

}  // namespace qrc
