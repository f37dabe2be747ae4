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

// Classical spin reservoir: every atom is a unit vector S_i precessing as
//
//   dS_i/dt = B_i x S_i,
//   B_i = Omega/2 x^ + [-Delta_i/2 + 1/4 sum_{j!=i} V_ij (1 + S_j^z)] z^,
//
// where B_i = dE/dS_i for
//
//   E = sum_i [Omega/2 S_i^x - Delta_i/2 S_i^z] + 1/4 sum_{i<j} V_ij (1 + S_i^z)(1 + S_j^z).
//
// A single spin therefore precesses at rate Omega/2, half the quantum Rabi
// frequency.

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "qrc/core_model.hpp"
#include "qrc/observables.hpp"
#include "qrc/probe_plan.hpp"

namespace qrc {

using Spin = std::array<double, 3>;

class SpinConfiguration {
  public:
    SpinConfiguration() = default;

    explicit SpinConfiguration(std::vector<Spin> spins) : spins_(std::move(spins)) {
        for (std::size_t i = 0; i < spins_.size(); ++i) {
            const double n = norm(spins_[i]);
            if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-9) {
                throw ConfigError("spin " + std::to_string(i) + " is not a unit vector");
            }
        }
    }

    /// All spins along -z, the classical image of |g...g>.
    static SpinConfiguration all_down(std::size_t n) {
        return SpinConfiguration(std::vector<Spin>(n, Spin{0.0, 0.0, -1.0}));
    }

    [[nodiscard]] std::size_t size() const noexcept { return spins_.size(); }
    [[nodiscard]] const std::vector<Spin>& spins() const noexcept { return spins_; }
    [[nodiscard]] const Spin& operator[](std::size_t i) const { return spins_[i]; }

    static double norm(const Spin& s) noexcept { return std::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2]); }

  private:
    std::vector<Spin> spins_;
};

namespace detail {

inline void crc_fields(const std::vector<Spin>& s, const Matrix& v, const RydbergProgram& program,
                       const DriveSample& d, std::vector<Spin>& out) {
    const std::size_t n = s.size();
    const auto& alpha = program.local_pattern();
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double z = -0.5 * (d.global + alpha[i] * d.local);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                z += 0.25 * v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * (1.0 + s[j][2]);
            }
        }
        out[i] = {0.5 * d.rabi, 0.0, z};
    }
}

inline Spin cross(const Spin& a, const Spin& b) noexcept {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

class SpinPropagator {
  public:
    SpinPropagator(const RydbergProgram& program, const PhysicalConstants& constants, double drift_tolerance)
        : program_(program), v_(interaction_matrix(program.array(), constants)), tol_(drift_tolerance) {}

    void advance(std::vector<Spin>& s, const Drive& drive, double t0, double t1, double h) {
        for_each_step(drive, t0, t1, h, [&](double t, double dt, const Drive& d) { step(s, d, t, dt); });
    }

  private:
    void rhs(const std::vector<Spin>& s, const DriveSample& d, std::vector<Spin>& out) {
        crc_fields(s, v_, program_, d, field_);
        out.resize(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            out[i] = cross(field_[i], s[i]);
        }
    }

    void step(std::vector<Spin>& y, const Drive& drive, double t, double h) {
        const std::size_t n = y.size();
        const DriveSample d0 = drive.at(t);
        const DriveSample dm = drive.at(t + 0.5 * h);
        const DriveSample d1 = drive.at(t + h);
        auto shifted = [&](const std::vector<Spin>& k, double a) -> const std::vector<Spin>& {
            tmp_.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                for (int c = 0; c < 3; ++c) tmp_[i][c] = y[i][c] + a * k[i][c];
            }
            return tmp_;
        };
        rhs(y, d0, k1_);
        rhs(shifted(k1_, 0.5 * h), dm, k2_);
        rhs(shifted(k2_, 0.5 * h), dm, k3_);
        rhs(shifted(k3_, h), d1, k4_);
        for (std::size_t i = 0; i < n; ++i) {
            for (int c = 0; c < 3; ++c) {
                y[i][c] += h / 6.0 * (k1_[i][c] + 2.0 * (k2_[i][c] + k3_[i][c]) + k4_[i][c]);
            }
            const double nrm = SpinConfiguration::norm(y[i]);
            if (!std::isfinite(nrm) || std::abs(nrm - 1.0) > tol_) {
                throw NumericalError("spin norm drift " + std::to_string(std::abs(nrm - 1.0)) +
                                     " in one step; reduce the integrator step");
            }
            for (int c = 0; c < 3; ++c) y[i][c] /= nrm;
        }
    }

    const RydbergProgram& program_;
    Matrix v_;
    double tol_;
    std::vector<Spin> field_, k1_, k2_, k3_, k4_, tmp_;
};

}  // namespace detail

/// Effective field on every spin at time t.
inline std::vector<Spin> crc_field(const SpinConfiguration& config, const RydbergProgram& program, double t,
                                   const PhysicalConstants& constants = {}) {
    if (config.size() != program.n_qubits()) {
        throw ConfigError("spin configuration size does not match the program");
    }
    std::vector<Spin> out;
    detail::crc_fields(config.spins(), interaction_matrix(program.array(), constants), program,
                       drive_of(program).at(t), out);
    return out;
}

/// Classical energy whose gradient is crc_field.
inline double crc_energy(const SpinConfiguration& config, const RydbergProgram& program, double t,
                         const PhysicalConstants& constants = {}) {
    const Matrix v = interaction_matrix(program.array(), constants);
    const auto d = drive_of(program).at(t);
    const auto& alpha = program.local_pattern();
    double e = 0.0;
    for (std::size_t i = 0; i < config.size(); ++i) {
        const auto& s = config[i];
        e += 0.5 * d.rabi * s[0] - 0.5 * (d.global + alpha[i] * d.local) * s[2];
        for (std::size_t j = i + 1; j < config.size(); ++j) {
            e += 0.25 * v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * (1.0 + s[2]) *
                 (1.0 + config[j][2]);
        }
    }
    return e;
}

/// h = min(max_step, step_scale / max |B|) with |B| bounded over the program.
inline double crc_integration_step(const RydbergProgram& program, const IntegratorOptions& options,
                                   const PhysicalConstants& constants = {}) {
    const Matrix v = interaction_matrix(program.array(), constants);
    const double vrow = v.size() ? v.rowwise().sum().maxCoeff() : 0.0;
    const double bound = 0.5 * program.rabi().max_abs() + 0.5 * program.max_abs_detuning() + 0.5 * vrow;
    double h = options.max_step;
    if (bound > 0.0) h = std::min(h, options.step_scale / bound);
    h *= options.step_multiplier;
    if (!(h >= options.min_step)) {
        throw NumericalError("integrator step underflow (h = " + std::to_string(h) + " us)");
    }
    return h;
}

/// Spin configuration at every probe, same probe semantics as run_program.
inline std::vector<SpinConfiguration> crc_evolve(const RydbergProgram& program, const ProbeSchedule& schedule,
                                                 const PhysicalConstants& constants = {},
                                                 const IntegratorOptions& options = {}) {
    const double h = crc_integration_step(program, options, constants);
    detail::SpinPropagator prop(program, constants, options.norm_tolerance);
    std::vector<SpinConfiguration> out(schedule.probe_times.size());
    run_probe_plan(
        program, schedule, SpinConfiguration::all_down(program.n_qubits()).spins(),
        [&](std::vector<Spin>& s, const Drive& d, double t0, double t1) { prop.advance(s, d, t0, t1, h); },
        [&](std::size_t k, const std::vector<Spin>& s) { out[k] = SpinConfiguration(s); });
    return out;
}

/// S_i^z and S_i^z S_j^z per probe, concatenated probe-major.
inline std::vector<double> crc_embeddings(const std::vector<SpinConfiguration>& probes, const ObservableSpec& spec) {
    spec.validate();
    std::vector<double> out;
    out.reserve(spec.size() * probes.size());
    for (const auto& c : probes) {
        if (c.size() != spec.n_qubits) {
            throw ConfigError("observable spec and spin configuration disagree on size");
        }
        for (auto i : spec.singles) out.push_back(c[i][2]);
        for (auto [i, j] : spec.pairs) out.push_back(c[i][2] * c[j][2]);
    }
    return out;
}

}  // namespace qrc
