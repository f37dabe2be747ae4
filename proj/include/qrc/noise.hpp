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

// Static hardware perturbations: atom position jitter and per-site local
// detuning miscalibration. Shots of a datapoint are grouped into R noise
// realizations, each simulated once.

#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "qrc/core_model.hpp"
#include "qrc/quantum_sim.hpp"
#include "qrc/rng.hpp"
#include "qrc/shot_table.hpp"

namespace qrc {

struct NoiseParams {
    double position_amplitude = 0.0;  // um
    double detuning_amplitude = 0.0;  // relative
    std::size_t realizations = 0;     // 0: min(N_s, 20)
    bool symmetric_positions = false; // [-a/2, a/2] instead of [0, a]

    [[nodiscard]] bool active() const noexcept { return position_amplitude > 0.0 || detuning_amplitude > 0.0; }

    void validate() const {
        if (!(position_amplitude >= 0.0) || !(detuning_amplitude >= 0.0)) {
            throw ConfigError("noise amplitudes must be nonnegative");
        }
        if (detuning_amplitude > 1.0) throw ConfigError("relative detuning fluctuation must not exceed 1");
    }

    [[nodiscard]] std::size_t realizations_for(std::size_t n_shots) const {
        const std::size_t r = realizations == 0 ? std::min<std::size_t>(n_shots, 20) : realizations;
        if (r < 1 || r > n_shots) {
            throw ConfigError("noise realizations must lie in [1, N_s]");
        }
        return r;
    }
};

inline nlohmann::json to_json(const NoiseParams& p) {
    return {{"position_amplitude_um", p.position_amplitude},
            {"detuning_relative", p.detuning_amplitude},
            {"realizations", p.realizations},
            {"symmetric_positions", p.symmetric_positions}};
}

inline NoiseParams noise_from_json(const nlohmann::json& j) {
    NoiseParams p;
    p.position_amplitude = j.value("position_amplitude_um", 0.0);
    p.detuning_amplitude = j.value("detuning_relative", 0.0);
    p.realizations = j.value("realizations", std::size_t{0});
    p.symmetric_positions = j.value("symmetric_positions", false);
    p.validate();
    return p;
}

/// Shots per realization; the remainder goes to the earliest realizations.
inline std::vector<std::size_t> realization_shots(std::size_t n_shots, std::size_t r) {
    if (r == 0 || r > n_shots) throw ConfigError("noise realizations must lie in [1, N_s]");
    std::vector<std::size_t> out(r, n_shots / r);
    for (std::size_t i = 0; i < n_shots % r; ++i) ++out[i];
    return out;
}

/// Each coordinate shifted by an independent draw from [0, a] (or [-a/2, a/2]).
inline AtomArray perturb_positions(const AtomArray& array, double amplitude, const CounterRng& stream,
                                   bool symmetric = false) {
    if (!(amplitude >= 0.0)) throw ConfigError("position fluctuation must be nonnegative");
    if (amplitude == 0.0) return array;
    const double offset = symmetric ? -0.5 * amplitude : 0.0;
    std::vector<Vec2> p = array.positions();
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i].x += offset + amplitude * stream.uniform(2 * i);
        p[i].y += offset + amplitude * stream.uniform(2 * i + 1);
    }
    return AtomArray(std::move(p), false);
}

/**
 * Site-wise local detuning magnitudes scaled by (1 + eta_i), eta_i uniform in
 * [-a, a]. The pattern is renormalized to max 1 with the waveform absorbing
 * the scale, so alpha_i Delta_l(t) changes by exactly (1 + eta_i).
 */
inline RydbergProgram perturb_local_detuning(const RydbergProgram& program, double amplitude,
                                             const CounterRng& stream) {
    if (!(amplitude >= 0.0) || amplitude > 1.0) throw ConfigError("detuning fluctuation must lie in [0, 1]");
    if (amplitude == 0.0) return program;
    std::vector<double> alpha = program.local_pattern();
    double top = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        alpha[i] *= 1.0 + amplitude * (2.0 * stream.uniform(i) - 1.0);
        top = std::max(top, alpha[i]);
    }
    if (top == 0.0) return program;
    for (auto& a : alpha) a /= top;
    std::vector<Breakpoint> bps = program.local_detuning().breakpoints();
    for (auto& b : bps) b.value *= top;
    return program.with_local(Waveform(std::move(bps)), std::move(alpha));
}

inline CounterRng position_stream(std::uint64_t seed, std::uint64_t datapoint, std::uint64_t realization) {
    return CounterRng(seed).derive(0x706f73).derive(datapoint).derive(realization);
}

/// One draw per dataset run, shared by every datapoint and shot.
inline CounterRng detuning_stream(std::uint64_t seed) { return CounterRng(seed).derive(0x646574); }

/**
 * Probe-major shots of one datapoint under noise. Realization r covers the
 * shot counters [offset_r, offset_r + n_r) of each probe stream, so with zero
 * amplitudes the output equals sample_datapoint() on the clean program.
 */
inline std::vector<std::uint64_t> sample_noisy_datapoint(const RydbergProgram& program, const ProbeSchedule& schedule,
                                                         std::size_t n_shots, const NoiseParams& noise,
                                                         std::uint64_t seed, std::uint64_t datapoint,
                                                         const PhysicalConstants& constants = {},
                                                         const IntegratorOptions& options = {}) {
    noise.validate();
    const std::size_t n_probes = schedule.probe_times.size();
    const RydbergProgram base = perturb_local_detuning(program, noise.detuning_amplitude, detuning_stream(seed));
    if (noise.position_amplitude == 0.0) {
        return sample_datapoint(probe_probabilities(base, schedule, constants, options), n_shots, seed, datapoint);
    }
    const auto counts = realization_shots(n_shots, noise.realizations_for(n_shots));
    std::vector<std::uint64_t> out(n_probes * n_shots);
    std::size_t offset = 0;
    for (std::size_t r = 0; r < counts.size(); ++r) {
        const AtomArray moved = perturb_positions(base.array(), noise.position_amplitude,
                                                  position_stream(seed, datapoint, r), noise.symmetric_positions);
        const auto probs = probe_probabilities(base.with_array(moved), schedule, constants, options);
        const auto shots = sample_datapoint(probs, counts[r], seed, datapoint, offset);
        for (std::size_t k = 0; k < n_probes; ++k) {
            std::copy_n(shots.begin() + static_cast<std::ptrdiff_t>(k * counts[r]), counts[r],
                        out.begin() + static_cast<std::ptrdiff_t>(k * n_shots + offset));
        }
        offset += counts[r];
    }
    return out;
}

}  // namespace qrc
