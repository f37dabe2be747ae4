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

// Time stepping shared by the quantum and classical backends.
//
// Every probe is an independent evolution from the initial state under the
// program truncated at the probe time, with the Rabi drive ramped to zero
// over the final `ramp`. Two truncated programs agree up to the start of the
// earlier ramp-down, so run_probe_plan() integrates one trunk trajectory and
// branches off a copy for each ramp-down. The result is identical to running
// the probes separately but costs T + n_probes * ramp instead of sum(t_k).

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "qrc/core_model.hpp"

namespace qrc {

struct DriveSample {
    double rabi = 0.0;
    double global = 0.0;
    double local = 0.0;
};

/// The three waveforms driving an evolution. Non-owning.
struct Drive {
    const Waveform* rabi;
    const Waveform* global;
    const Waveform* local;

    [[nodiscard]] DriveSample at(double t) const { return {(*rabi)(t), (*global)(t), (*local)(t)}; }
};

inline Drive drive_of(const RydbergProgram& p) {
    return {&p.rabi(), &p.global_detuning(), &p.local_detuning()};
}

struct IntegratorOptions {
    double max_step = 1e-3;         // us
    double step_scale = 0.1;        // h <= step_scale / max energy scale
    double step_multiplier = 1.0;   // 0.5 for step-halving checks
    double norm_tolerance = 1e-9;   // allowed drift at probe times
    double min_step = 1e-9;         // underflow guard
};

/// h = min(max_step, step_scale / max(Omega, V_max, |Delta|_max)).
inline double integration_step(const RydbergProgram& program, const IntegratorOptions& options,
                               const PhysicalConstants& constants = {}) {
    const Matrix v = interaction_matrix(program.array(), constants);
    const double scale =
        std::max({program.rabi().max_abs(), v.size() ? v.maxCoeff() : 0.0, program.max_abs_detuning()});
    double h = options.max_step;
    if (scale > 0.0) {
        h = std::min(h, options.step_scale / scale);
    }
    h *= options.step_multiplier;
    if (!(h >= options.min_step)) {
        throw NumericalError("integrator step underflow (h = " + std::to_string(h) + " us)");
    }
    return h;
}

/**
 * Calls step(t, dt, drive) over [t0, t1] in uniform substeps no longer than
 * h, splitting at every waveform breakpoint so each RK stage sees a drive
 * that is linear in time.
 */
template <class StepFn>
void for_each_step(const Drive& drive, double t0, double t1, double h, StepFn&& step) {
    if (!(t1 > t0)) {
        return;
    }
    std::vector<double> cuts{t0};
    for (const auto* w : {drive.rabi, drive.global, drive.local}) {
        for (const auto& b : w->breakpoints()) {
            if (b.time > t0 && b.time < t1) {
                cuts.push_back(b.time);
            }
        }
    }
    cuts.push_back(t1);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double a = cuts[s];
        const double len = cuts[s + 1] - a;
        if (len <= 1e-15) {
            continue;
        }
        const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(len / h - 1e-9)));
        const double dt = len / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            step(a + static_cast<double>(i) * dt, dt, drive);
        }
    }
}

/**
 * Drives the probe schedule. `advance(state, drive, t0, t1)` integrates a
 * state; `record(k, state)` receives the state at probe k.
 */
template <class State, class Advance, class Record>
void run_probe_plan(const RydbergProgram& program, const ProbeSchedule& schedule, State state,
                    Advance&& advance, Record&& record) {
    schedule.validate();
    const double total = program.total_time();
    constexpr double eps = 1e-12;
    for (double t : schedule.probe_times) {
        if (t > total + eps) {
            throw ConfigError("probe time " + std::to_string(t) + " exceeds program duration " +
                              std::to_string(total));
        }
    }
    const Drive trunk = drive_of(program);
    double now = 0.0;
    for (std::size_t k = 0; k < schedule.probe_times.size(); ++k) {
        const double t = schedule.probe_times[k];
        if (!schedule.include_rampdown || t >= total - eps) {
            advance(state, trunk, now, std::min(t, total));
            now = std::min(t, total);
            record(k, static_cast<const State&>(state));
            continue;
        }
        const double branch_start = t - schedule.ramp;
        advance(state, trunk, now, branch_start);
        now = branch_start;
        const Waveform ramped = program.rabi().ramped_down_at(t, schedule.ramp);
        const Drive branch{&ramped, &program.global_detuning(), &program.local_detuning()};
        State copy = state;
        advance(copy, branch, branch_start, t);
        record(k, static_cast<const State&>(copy));
    }
}

}  // namespace qrc
