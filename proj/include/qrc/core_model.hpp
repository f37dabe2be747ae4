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

// Domain types for Rydberg atom-array programs.
//
// Units throughout the library: lengths in micrometres, times in
// microseconds, and every energy/frequency in angular units (rad/us).
// Values quoted in MHz are converted with mhz_to_rad_per_us().

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qrc/errors.hpp"

namespace qrc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double mhz_to_rad_per_us(double mhz) noexcept { return kTwoPi * mhz; }
constexpr double rad_per_us_to_mhz(double w) noexcept { return w / kTwoPi; }

/// Van der Waals coefficient in rad/us * um^6.
struct PhysicalConstants {
    double c6 = 862690.0 * kTwoPi;

    void validate() const {
        if (!(c6 > 0.0) || !std::isfinite(c6)) {
            throw ConfigError("van der Waals coefficient must be positive and finite");
        }
    }
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double distance(const Vec2& a, const Vec2& b) noexcept {
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// Rounds to the nearest multiple of `quantum` (0.01 um on hardware).
inline double round_to(double value, double quantum) noexcept {
    return std::round(value / quantum) * quantum;
}

inline constexpr double kPositionQuantum = 0.01;

/// Atom positions in um. Immutable; invariants checked on construction.
class AtomArray {
  public:
    AtomArray() = default;

    explicit AtomArray(std::vector<Vec2> positions, bool rounded = false)
        : positions_(std::move(positions)), rounded_(rounded) {
        for (std::size_t i = 0; i < positions_.size(); ++i) {
            const auto& p = positions_[i];
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
                throw ConfigError("atom " + std::to_string(i) + " has a non-finite coordinate");
            }
            if (rounded_) {
                for (double c : {p.x, p.y}) {
                    if (std::abs(c / kPositionQuantum - std::round(c / kPositionQuantum)) > 1e-6) {
                        throw ConfigError("atom " + std::to_string(i) +
                                          " is flagged rounded but not on the 0.01 um grid");
                    }
                }
            }
            for (std::size_t j = 0; j < i; ++j) {
                if (!(distance(p, positions_[j]) > 0.0)) {
                    throw ConfigError("atoms " + std::to_string(j) + " and " + std::to_string(i) +
                                      " coincide");
                }
            }
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return positions_.size(); }
    [[nodiscard]] const std::vector<Vec2>& positions() const noexcept { return positions_; }
    [[nodiscard]] const Vec2& operator[](std::size_t i) const { return positions_[i]; }
    [[nodiscard]] bool rounded() const noexcept { return rounded_; }

    /// Copy with every coordinate snapped to the 0.01 um hardware grid.
    [[nodiscard]] AtomArray rounded_copy() const {
        std::vector<Vec2> out = positions_;
        for (auto& p : out) {
            p = {round_to(p.x, kPositionQuantum), round_to(p.y, kPositionQuantum)};
        }
        return AtomArray(std::move(out), true);
    }

    [[nodiscard]] AtomArray scaled(double factor) const {
        std::vector<Vec2> out = positions_;
        for (auto& p : out) {
            p = {p.x * factor, p.y * factor};
        }
        return AtomArray(std::move(out));
    }

  private:
    std::vector<Vec2> positions_;
    bool rounded_ = false;
};

struct Breakpoint {
    double time = 0.0;   // us
    double value = 0.0;  // rad/us

    friend bool operator==(const Breakpoint&, const Breakpoint&) = default;
};

/// Piecewise-linear waveform. Holds its last value past the final breakpoint.
class Waveform {
  public:
    Waveform() : breakpoints_{{0.0, 0.0}} {}

    explicit Waveform(std::vector<Breakpoint> breakpoints) : breakpoints_(std::move(breakpoints)) {
        if (breakpoints_.empty()) {
            throw ConfigError("waveform needs at least one breakpoint");
        }
        if (breakpoints_.front().time != 0.0) {
            throw ConfigError("waveform must start at t = 0");
        }
        for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
            if (!std::isfinite(breakpoints_[i].time) || !std::isfinite(breakpoints_[i].value)) {
                throw ConfigError("waveform breakpoint " + std::to_string(i) + " is not finite");
            }
            if (i > 0 && !(breakpoints_[i].time > breakpoints_[i - 1].time)) {
                throw ConfigError("waveform times must be strictly increasing");
            }
        }
    }

    static Waveform constant(double value, double duration) {
        return Waveform({{0.0, value}, {duration, value}});
    }

    /// 0 -> plateau over `ramp`, hold, plateau -> 0 over the final `ramp`.
    static Waveform trapezoid(double plateau, double ramp, double duration) {
        if (!(ramp > 0.0) || !(duration >= 2.0 * ramp)) {
            throw ConfigError("trapezoid needs 0 < ramp and duration >= 2 * ramp");
        }
        if (duration == 2.0 * ramp) {
            return Waveform({{0.0, 0.0}, {ramp, plateau}, {duration, 0.0}});
        }
        return Waveform({{0.0, 0.0}, {ramp, plateau}, {duration - ramp, plateau}, {duration, 0.0}});
    }

    [[nodiscard]] double operator()(double t) const noexcept {
        if (t <= breakpoints_.front().time) {
            return breakpoints_.front().value;
        }
        if (t >= breakpoints_.back().time) {
            return breakpoints_.back().value;
        }
        auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t,
                                   [](double v, const Breakpoint& b) { return v < b.time; });
        const auto& hi = *it;
        const auto& lo = *(it - 1);
        const double w = (t - lo.time) / (hi.time - lo.time);
        return lo.value + w * (hi.value - lo.value);
    }

    [[nodiscard]] const std::vector<Breakpoint>& breakpoints() const noexcept { return breakpoints_; }
    [[nodiscard]] double end_time() const noexcept { return breakpoints_.back().time; }

    [[nodiscard]] double max_abs() const noexcept {
        double m = 0.0;
        for (const auto& b : breakpoints_) {
            m = std::max(m, std::abs(b.value));
        }
        return m;
    }

    [[nodiscard]] double max_value() const noexcept {
        double m = breakpoints_.front().value;
        for (const auto& b : breakpoints_) {
            m = std::max(m, b.value);
        }
        return m;
    }

    /// Same waveform up to `t_cut - ramp`, then linear to zero at `t_cut`.
    [[nodiscard]] Waveform ramped_down_at(double t_cut, double ramp) const {
        const double t_start = t_cut - ramp;
        std::vector<Breakpoint> out;
        for (const auto& b : breakpoints_) {
            if (b.time < t_start) {
                out.push_back(b);
            }
        }
        out.push_back({t_start, (*this)(t_start)});
        out.push_back({t_cut, 0.0});
        return Waveform(std::move(out));
    }

    friend bool operator==(const Waveform&, const Waveform&) = default;

  private:
    std::vector<Breakpoint> breakpoints_;
};

/**
 * One reservoir run: geometry plus drive. The Hamiltonian is
 *
 *   H(t) = Omega(t)/2 sum_j X_j + sum_{j<k} V_jk n_j n_k
 *          - sum_j [Delta_g(t) + alpha_j Delta_l(t)] n_j
 */
class RydbergProgram {
  public:
    RydbergProgram(AtomArray array, Waveform rabi, Waveform global_detuning, Waveform local_detuning,
                   std::vector<double> local_pattern, double total_time)
        : array_(std::move(array)),
          rabi_(std::move(rabi)),
          global_detuning_(std::move(global_detuning)),
          local_detuning_(std::move(local_detuning)),
          local_pattern_(std::move(local_pattern)),
          total_time_(total_time) {
        if (array_.size() == 0) {
            throw ConfigError("program has no atoms");
        }
        if (local_pattern_.empty()) {
            local_pattern_.assign(array_.size(), 0.0);
        }
        if (local_pattern_.size() != array_.size()) {
            throw ConfigError("local pattern length " + std::to_string(local_pattern_.size()) +
                              " does not match " + std::to_string(array_.size()) + " atoms");
        }
        for (double a : local_pattern_) {
            if (!(a >= 0.0 && a <= 1.0)) {
                throw ConfigError("local pattern weights must lie in [0, 1]");
            }
        }
        if (!(total_time_ > 0.0) || !std::isfinite(total_time_)) {
            throw ConfigError("program duration must be positive");
        }
    }

    /// Program without local detuning.
    RydbergProgram(AtomArray array, Waveform rabi, Waveform global_detuning, double total_time)
        : RydbergProgram(std::move(array), std::move(rabi), std::move(global_detuning),
                         Waveform::constant(0.0, total_time), {}, total_time) {}

    [[nodiscard]] const AtomArray& array() const noexcept { return array_; }
    [[nodiscard]] std::size_t n_qubits() const noexcept { return array_.size(); }
    [[nodiscard]] const Waveform& rabi() const noexcept { return rabi_; }
    [[nodiscard]] const Waveform& global_detuning() const noexcept { return global_detuning_; }
    [[nodiscard]] const Waveform& local_detuning() const noexcept { return local_detuning_; }
    [[nodiscard]] const std::vector<double>& local_pattern() const noexcept { return local_pattern_; }
    [[nodiscard]] double total_time() const noexcept { return total_time_; }

    /// Total detuning Delta_g(t) + alpha_j Delta_l(t) on site j.
    [[nodiscard]] double detuning(std::size_t site, double t) const {
        return global_detuning_(t) + local_pattern_[site] * local_detuning_(t);
    }

    /// Largest |detuning| over all sites and times (extremes sit on breakpoints).
    [[nodiscard]] double max_abs_detuning() const {
        std::vector<double> times;
        for (const auto* w : {&rabi_, &global_detuning_, &local_detuning_}) {
            for (const auto& b : w->breakpoints()) {
                if (b.time <= total_time_) {
                    times.push_back(b.time);
                }
            }
        }
        times.push_back(total_time_);
        double m = 0.0;
        for (double t : times) {
            for (std::size_t j = 0; j < n_qubits(); ++j) {
                m = std::max(m, std::abs(detuning(j, t)));
            }
        }
        return m;
    }

    /// Hardware ramp convention: Rabi drive is zero at both ends.
    void validate_hardware() const {
        if (rabi_(0.0) != 0.0 || rabi_(total_time_) != 0.0) {
            throw ConfigError("Rabi drive must be zero at t = 0 and t = total_time");
        }
    }

    [[nodiscard]] RydbergProgram with_array(AtomArray array) const {
        return RydbergProgram(std::move(array), rabi_, global_detuning_, local_detuning_,
                              local_pattern_, total_time_);
    }

    [[nodiscard]] RydbergProgram with_rabi(Waveform rabi, double total_time) const {
        return RydbergProgram(array_, std::move(rabi), global_detuning_, local_detuning_,
                              local_pattern_, total_time);
    }

    [[nodiscard]] RydbergProgram with_local(Waveform local_detuning,
                                            std::vector<double> local_pattern) const {
        return RydbergProgram(array_, rabi_, global_detuning_, std::move(local_detuning),
                              std::move(local_pattern), total_time_);
    }

  private:
    AtomArray array_;
    Waveform rabi_;
    Waveform global_detuning_;
    Waveform local_detuning_;
    std::vector<double> local_pattern_;
    double total_time_;
};

/// Probe times of a run. Each probe is measured after its own evolution.
struct ProbeSchedule {
    std::vector<double> probe_times;
    double ramp = 0.05;
    bool include_rampdown = true;

    static ProbeSchedule uniform(double interval, std::size_t count, double ramp = 0.05,
                                 bool include_rampdown = true) {
        ProbeSchedule s;
        for (std::size_t k = 1; k <= count; ++k) {
            s.probe_times.push_back(interval * static_cast<double>(k));
        }
        s.ramp = ramp;
        s.include_rampdown = include_rampdown;
        return s;
    }

    void validate() const {
        if (probe_times.empty()) {
            throw ConfigError("probe schedule is empty");
        }
        for (std::size_t k = 0; k < probe_times.size(); ++k) {
            if (k > 0 && !(probe_times[k] > probe_times[k - 1])) {
                throw ConfigError("probe times must be strictly increasing");
            }
            if (include_rampdown && probe_times[k] < 2.0 * ramp - 1e-12) {
                throw ConfigError("probe time " + std::to_string(probe_times[k]) +
                                  " is shorter than the two ramps");
            }
        }
    }
};

/// V_jk = C / |r_j - r_k|^6 with zero diagonal.
inline Matrix interaction_matrix(const AtomArray& array, const PhysicalConstants& constants = {}) {
    constants.validate();
    const auto n = static_cast<Eigen::Index>(array.size());
    Matrix v = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = j + 1; k < n; ++k) {
            const double d = distance(array[j], array[k]);
            if (!(d > 0.0)) {
                throw ConfigError("atoms " + std::to_string(j) + " and " + std::to_string(k) +
                                  " coincide");
            }
            const double d2 = d * d;
            v(j, k) = v(k, j) = constants.c6 / (d2 * d2 * d2);
        }
    }
    return v;
}

/// Initial blockade radius over spacing, [C / (Omega d0^6)]^(1/6).
inline double blockade_ratio(double omega, double spacing, const PhysicalConstants& constants = {}) {
    if (!(omega > 0.0) || !(spacing > 0.0)) {
        throw ConfigError("blockade_ratio needs positive Rabi frequency and spacing");
    }
    return std::pow(constants.c6 / (omega * std::pow(spacing, 6)), 1.0 / 6.0);
}

/**
 * Nearest-neighbour bonds (i, j), i < j: pairs with no third atom closer to
 * both of them (relative neighbourhood graph). Chains give consecutive
 * pairs; square and row-modulated grids give horizontal and vertical bonds.
 */
inline std::vector<std::pair<std::size_t, std::size_t>> nearest_neighbor_pairs(const AtomArray& array) {
    const std::size_t n = array.size();
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = distance(array[i], array[j]);
            bool blocked = false;
            for (std::size_t k = 0; k < n && !blocked; ++k) {
                if (k != i && k != j) {
                    blocked = std::max(distance(array[i], array[k]), distance(array[j], array[k])) < d;
                }
            }
            if (!blocked) out.emplace_back(i, j);
        }
    }
    return out;
}

/**
 * Ising form of the diagonal part of H at one time:
 *
 *   sum_{i<j} V_ij n_i n_j - sum_i Delta_i n_i
 *     = sum_{i<j} J_ij Z_i Z_j + sum_i h_i Z_i + constant
 *
 * with Z = 2n - 1, J_ij = V_ij / 4, h_i = -(Delta_i - sum_{j!=i} V_ij / 2) / 2.
 * h_i equals the z component of the classical spin field at S^z = 0.
 */
struct ZRepresentation {
    std::vector<double> fields;
    Matrix couplings;
    double constant = 0.0;

    /// Energy of a computational-basis state (bit j set = atom j in |r>).
    [[nodiscard]] double energy(std::uint64_t bits) const {
        const auto n = fields.size();
        double e = constant;
        for (std::size_t i = 0; i < n; ++i) {
            const double zi = ((bits >> i) & 1U) ? 1.0 : -1.0;
            e += fields[i] * zi;
            for (std::size_t j = i + 1; j < n; ++j) {
                const double zj = ((bits >> j) & 1U) ? 1.0 : -1.0;
                e += couplings(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * zi * zj;
            }
        }
        return e;
    }
};

/// `reference_time` picks the instant at which the detunings are read.
inline ZRepresentation z_representation(const RydbergProgram& program, double reference_time,
                                        const PhysicalConstants& constants = {}) {
    const Matrix v = interaction_matrix(program.array(), constants);
    const std::size_t n = program.n_qubits();
    ZRepresentation z;
    z.couplings = v / 4.0;
    z.fields.resize(n);
    double sum_delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double delta = program.detuning(i, reference_time);
        sum_delta += delta;
        const double row = v.row(static_cast<Eigen::Index>(i)).sum();
        z.fields[i] = -0.5 * (delta - 0.5 * row);
    }
    z.constant = v.sum() / 8.0 - 0.5 * sum_delta;
    return z;
}

/// Direct evaluation of sum V n n - sum Delta n for a bitstring.
inline double diagonal_energy(const RydbergProgram& program, double t, std::uint64_t bits,
                              const PhysicalConstants& constants = {}) {
    const Matrix v = interaction_matrix(program.array(), constants);
    const std::size_t n = program.n_qubits();
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!((bits >> i) & 1U)) {
            continue;
        }
        e -= program.detuning(i, t);
        for (std::size_t j = i + 1; j < n; ++j) {
            if ((bits >> j) & 1U) {
                e += v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
        }
    }
    return e;
}

enum class EncodingKind { global_pulse, position, local_pulse };

inline std::string to_string(EncodingKind kind) {
    switch (kind) {
        case EncodingKind::global_pulse: return "global_pulse";
        case EncodingKind::position: return "position";
        case EncodingKind::local_pulse: return "local_pulse";
    }
    return "unknown";
}

inline EncodingKind encoding_kind_from_string(const std::string& s) {
    if (s == "global_pulse" || s == "pulse") return EncodingKind::global_pulse;
    if (s == "position") return EncodingKind::position;
    if (s == "local_pulse" || s == "local") return EncodingKind::local_pulse;
    throw ConfigError("unknown encoding kind '" + s + "'");
}

/// What regime_report needs to know about the encoding.
struct RegimeSpec {
    EncodingKind kind = EncodingKind::local_pulse;
    double probe_interval = 0.5;   // us
    double encode_interval = 0.0;  // us, global pulse only
    double bare_spacing = 10.0;    // um, position encoding: V0 = C / d0^6
};

struct ScaleRatio {
    std::string numerator;
    std::string denominator;
    double log10_ratio = 0.0;
};

struct RegimeReport {
    double mixing_scale = 0.0;
    double entangling_scale = 0.0;
    double encoding_scale = 0.0;
    double probe_scale = 0.0;
    std::optional<double> encode_scale;
    std::vector<ScaleRatio> ratios;
    bool in_regime = false;
    bool degenerate = false;
    std::vector<std::string> notes;
};

inline constexpr double kRegimeLogTolerance = 0.5;

/**
 * Energy scales of a program, all in rad/us:
 *   mixing      plateau Rabi value
 *   entangling  mean nearest-neighbour interaction
 *   encoding    mean |alpha Delta_l| (local), mean |V - V0| over encoded
 *               horizontal bonds (position), mean |Delta_g| over the
 *               breakpoints (global pulse)
 *   probe       2 pi / probe interval; encode = 2 pi / encode interval
 * The program is in the regime when every pairwise |log10 ratio| <= 0.5.
 */
inline RegimeReport regime_report(const RydbergProgram& program, const RegimeSpec& spec,
                                  const PhysicalConstants& constants = {}) {
    RegimeReport r;
    r.mixing_scale = program.rabi().max_abs();

    const Matrix v = interaction_matrix(program.array(), constants);
    const auto bonds = nearest_neighbor_pairs(program.array());
    if (!bonds.empty()) {
        double sum = 0.0;
        for (auto [i, j] : bonds) {
            sum += v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        r.entangling_scale = sum / static_cast<double>(bonds.size());
    }

    switch (spec.kind) {
        case EncodingKind::local_pulse: {
            double sum = 0.0;
            const double amp = std::abs(program.local_detuning()(0.5 * program.total_time()));
            for (double a : program.local_pattern()) {
                sum += a * amp;
            }
            r.encoding_scale = sum / static_cast<double>(program.n_qubits());
            break;
        }
        case EncodingKind::position: {
            const double v0 = constants.c6 / std::pow(spec.bare_spacing, 6);
            double sum = 0.0;
            std::size_t count = 0;
            for (auto [i, j] : bonds) {
                if (std::abs(program.array()[i].y - program.array()[j].y) < 1e-9) {
                    sum += std::abs(v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - v0);
                    ++count;
                }
            }
            r.encoding_scale = count ? sum / static_cast<double>(count) : 0.0;
            break;
        }
        case EncodingKind::global_pulse: {
            const auto& bps = program.global_detuning().breakpoints();
            double sum = 0.0;
            for (const auto& b : bps) {
                sum += std::abs(b.value);
            }
            r.encoding_scale = sum / static_cast<double>(bps.size());
            if (spec.encode_interval > 0.0) {
                r.encode_scale = kTwoPi / spec.encode_interval;
            }
            break;
        }
    }
    if (spec.probe_interval > 0.0) {
        r.probe_scale = kTwoPi / spec.probe_interval;
    }

    std::vector<std::pair<std::string, double>> scales = {{"mixing", r.mixing_scale},
                                                          {"entangling", r.entangling_scale},
                                                          {"encoding", r.encoding_scale},
                                                          {"probe", r.probe_scale}};
    if (r.encode_scale) {
        scales.emplace_back("encode", *r.encode_scale);
    }
    if (r.mixing_scale == 0.0) {
        r.degenerate = true;
        r.notes.emplace_back("zero Rabi plateau: no mixing dynamics");
    }
    r.in_regime = true;
    for (const auto& [name, value] : scales) {
        if (!(value > 0.0)) {
            r.in_regime = false;
            r.notes.push_back(name + " scale is zero");
        }
    }
    for (std::size_t a = 0; a < scales.size(); ++a) {
        for (std::size_t b = a + 1; b < scales.size(); ++b) {
            if (scales[a].second > 0.0 && scales[b].second > 0.0) {
                const double lr = std::log10(scales[a].second / scales[b].second);
                r.ratios.push_back({scales[a].first, scales[b].first, lr});
                if (std::abs(lr) > kRegimeLogTolerance) {
                    r.in_regime = false;
                }
            }
        }
    }
    return r;
}

}  // namespace qrc
