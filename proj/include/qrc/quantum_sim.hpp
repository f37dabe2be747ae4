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

// Exact state-vector dynamics of the Rydberg Hamiltonian.
//
// Basis convention: amplitude index b, bit j of b set <=> atom j in |r>.
// Z_j = 2 n_j - 1, so the all-ground state has <Z_j> = -1.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "qrc/core_model.hpp"
#include "qrc/observables.hpp"
#include "qrc/probe_plan.hpp"
#include "qrc/rng.hpp"

namespace qrc {

using Complex = std::complex<double>;

inline constexpr std::size_t kMaxQubits = 24;

class StateVector {
  public:
    StateVector() = default;

    StateVector(std::size_t n_qubits, std::vector<Complex> amplitudes)
        : n_qubits_(n_qubits), amplitudes_(std::move(amplitudes)) {
        if (n_qubits_ > kMaxQubits) {
            throw ConfigError("state vector limited to " + std::to_string(kMaxQubits) + " qubits");
        }
        if (amplitudes_.size() != (std::size_t{1} << n_qubits_)) {
            throw ConfigError("amplitude count must equal 2^n_qubits");
        }
        const double nrm = norm();
        if (!std::isfinite(nrm)) {
            throw NumericalError("state vector has non-finite amplitudes");
        }
        if (std::abs(nrm - 1.0) > 1e-9) {
            throw ConfigError("state vector is not normalized (norm " + std::to_string(nrm) + ")");
        }
    }

    /// |g...g>.
    static StateVector ground(std::size_t n_qubits) {
        std::vector<Complex> a(std::size_t{1} << n_qubits);
        a[0] = 1.0;
        return StateVector(n_qubits, std::move(a));
    }

    /// Scales arbitrary amplitudes to unit norm.
    static StateVector normalized(std::size_t n_qubits, std::vector<Complex> amplitudes) {
        double s = 0.0;
        for (const auto& c : amplitudes) {
            s += std::norm(c);
        }
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw NumericalError("cannot normalize a zero or non-finite vector");
        }
        const double inv = 1.0 / std::sqrt(s);
        for (auto& c : amplitudes) {
            c *= inv;
        }
        return StateVector(n_qubits, std::move(amplitudes));
    }

    [[nodiscard]] std::size_t n_qubits() const noexcept { return n_qubits_; }
    [[nodiscard]] std::size_t dim() const noexcept { return amplitudes_.size(); }
    [[nodiscard]] const std::vector<Complex>& amplitudes() const noexcept { return amplitudes_; }

    [[nodiscard]] double norm() const noexcept {
        double s = 0.0;
        for (const auto& c : amplitudes_) {
            s += std::norm(c);
        }
        return std::sqrt(s);
    }

    [[nodiscard]] std::vector<double> probabilities() const {
        std::vector<double> p(amplitudes_.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] = std::norm(amplitudes_[i]);
        }
        return p;
    }

  private:
    std::size_t n_qubits_ = 0;
    std::vector<Complex> amplitudes_;
};

/// |<a|b>|^2.
inline double fidelity(const StateVector& a, const StateVector& b) {
    Complex s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        s += std::conj(a.amplitudes()[i]) * b.amplitudes()[i];
    }
    return std::norm(s);
}

namespace detail {

/// Real and imaginary parts in separate arrays; H is real so they decouple.
struct SplitState {
    std::vector<double> re;
    std::vector<double> im;
};

/**
 * Matrix-free RK4 propagator for one program.
 *
 * H psi = D(t) psi + Omega(t)/2 sum_j X_j psi with the diagonal
 * D(t)[b] = E_int[b] - Delta_g(t) popcount(b) - Delta_l(t) A[b],
 * A[b] = sum_j alpha_j b_j. E_int, popcount and A are tabulated once.
 */
class RydbergPropagator {
  public:
    RydbergPropagator(const RydbergProgram& program, const PhysicalConstants& constants)
        : n_(program.n_qubits()), dim_(std::size_t{1} << program.n_qubits()) {
        if (n_ > kMaxQubits) {
            throw ConfigError("state vector limited to " + std::to_string(kMaxQubits) + " qubits");
        }
        const Matrix v = interaction_matrix(program.array(), constants);
        interaction_.assign(dim_, 0.0);
        popcount_.assign(dim_, 0.0);
        local_weight_.assign(dim_, 0.0);
        const auto& alpha = program.local_pattern();
        // Build tables incrementally from b with its lowest set bit cleared.
        for (std::size_t b = 1; b < dim_; ++b) {
            const auto j = static_cast<std::size_t>(std::countr_zero(b));
            const std::size_t rest = b & (b - 1);
            double e = interaction_[rest];
            for (std::size_t k = j + 1; k < n_; ++k) {
                if ((rest >> k) & 1U) {
                    e += v(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
                }
            }
            interaction_[b] = e;
            popcount_[b] = popcount_[rest] + 1.0;
            local_weight_[b] = local_weight_[rest] + alpha[j];
        }
        for (auto* buf : {&k1_, &k2_, &k3_, &k4_, &tmp_}) {
            buf->re.resize(dim_);
            buf->im.resize(dim_);
        }
        diag_.resize(dim_);
    }

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }

    void advance(SplitState& s, const Drive& drive, double t0, double t1, double h) {
        for_each_step(drive, t0, t1, h, [&](double t, double dt, const Drive& d) { rk4_step(s, d, t, dt); });
    }

  private:
    // out = -i H in, split as out.re = H in.im, out.im = -H in.re.
    void derivative(const SplitState& in, SplitState& out, const DriveSample& drive) {
        const double dg = drive.global;
        const double dl = drive.local;
        for (std::size_t b = 0; b < dim_; ++b) {
            diag_[b] = interaction_[b] - dg * popcount_[b] - dl * local_weight_[b];
        }
        double* __restrict ore = out.re.data();
        double* __restrict oim = out.im.data();
        const double* __restrict ire = in.re.data();
        const double* __restrict iim = in.im.data();
        for (std::size_t b = 0; b < dim_; ++b) {
            ore[b] = diag_[b] * iim[b];
            oim[b] = -diag_[b] * ire[b];
        }
        const double c = 0.5 * drive.rabi;
        if (c == 0.0) {
            return;
        }
        for (std::size_t j = 0; j < n_; ++j) {
            const std::size_t m = std::size_t{1} << j;
            for (std::size_t base = 0; base < dim_; base += 2 * m) {
                for (std::size_t i = base; i < base + m; ++i) {
                    ore[i] += c * iim[i + m];
                    ore[i + m] += c * iim[i];
                    oim[i] -= c * ire[i + m];
                    oim[i + m] -= c * ire[i];
                }
            }
        }
    }

    static void axpy_into(SplitState& out, const SplitState& y, double a, const SplitState& k) {
        const std::size_t n = y.re.size();
        for (std::size_t i = 0; i < n; ++i) {
            out.re[i] = y.re[i] + a * k.re[i];
            out.im[i] = y.im[i] + a * k.im[i];
        }
    }

    void rk4_step(SplitState& y, const Drive& drive, double t, double h) {
        const DriveSample d0 = drive.at(t);
        const DriveSample dm = drive.at(t + 0.5 * h);
        const DriveSample d1 = drive.at(t + h);
        derivative(y, k1_, d0);
        axpy_into(tmp_, y, 0.5 * h, k1_);
        derivative(tmp_, k2_, dm);
        axpy_into(tmp_, y, 0.5 * h, k2_);
        derivative(tmp_, k3_, dm);
        axpy_into(tmp_, y, h, k3_);
        derivative(tmp_, k4_, d1);
        const double w = h / 6.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            y.re[i] += w * (k1_.re[i] + 2.0 * (k2_.re[i] + k3_.re[i]) + k4_.re[i]);
            y.im[i] += w * (k1_.im[i] + 2.0 * (k2_.im[i] + k3_.im[i]) + k4_.im[i]);
        }
    }

    std::size_t n_;
    std::size_t dim_;
    std::vector<double> interaction_;
    std::vector<double> popcount_;
    std::vector<double> local_weight_;
    std::vector<double> diag_;
    SplitState k1_, k2_, k3_, k4_, tmp_;
};

inline SplitState split(const StateVector& s) {
    SplitState out;
    out.re.resize(s.dim());
    out.im.resize(s.dim());
    for (std::size_t i = 0; i < s.dim(); ++i) {
        out.re[i] = s.amplitudes()[i].real();
        out.im[i] = s.amplitudes()[i].imag();
    }
    return out;
}

/// Checks drift against the tolerance, then renormalizes.
inline StateVector join(const SplitState& s, std::size_t n_qubits, double tolerance) {
    std::vector<Complex> a(s.re.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = {s.re[i], s.im[i]};
        sum += s.re[i] * s.re[i] + s.im[i] * s.im[i];
    }
    const double nrm = std::sqrt(sum);
    if (!std::isfinite(nrm)) {
        throw NumericalError("non-finite amplitudes during evolution");
    }
    if (std::abs(nrm - 1.0) > tolerance) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "norm drift %.3g exceeds tolerance %.3g", std::abs(nrm - 1.0), tolerance);
        throw NormDriftError(std::string(buf) + "; reduce the integrator step");
    }
    return StateVector::normalized(n_qubits, std::move(a));
}

/// Runs `f(h)` from the configured step, halving it after each norm drift failure.
template <class F>
auto with_step_halving(double h, const IntegratorOptions& options, F&& f) {
    for (;;) {
        try {
            return f(h);
        } catch (const NormDriftError&) {
            if (h * 0.5 < options.min_step) throw;
            h *= 0.5;
        }
    }
}

}  // namespace detail

/// Solves i d psi/dt = H(t) psi from t = 0 to t_end.
inline StateVector evolve(const RydbergProgram& program, double t_end, const StateVector& initial,
                          const PhysicalConstants& constants = {}, const IntegratorOptions& options = {}) {
    if (initial.n_qubits() != program.n_qubits()) {
        throw ConfigError("initial state size does not match the program");
    }
    if (t_end > program.total_time() + 1e-12 || t_end < 0.0) {
        throw ConfigError("evolve: t_end outside [0, total_time]");
    }
    detail::RydbergPropagator prop(program, constants);
    return detail::with_step_halving(integration_step(program, options, constants), options, [&](double h) {
        auto s = detail::split(initial);
        prop.advance(s, drive_of(program), 0.0, t_end, h);
        return detail::join(s, program.n_qubits(), options.norm_tolerance);
    });
}

/// One state per probe time, each from |g...g> (see probe_plan.hpp).
inline std::vector<StateVector> run_program(const RydbergProgram& program, const ProbeSchedule& schedule,
                                            const PhysicalConstants& constants = {},
                                            const IntegratorOptions& options = {}) {
    detail::RydbergPropagator prop(program, constants);
    return detail::with_step_halving(integration_step(program, options, constants), options, [&](double h) {
        std::vector<StateVector> out(schedule.probe_times.size());
        run_probe_plan(
            program, schedule, detail::split(StateVector::ground(program.n_qubits())),
            [&](detail::SplitState& s, const Drive& d, double t0, double t1) { prop.advance(s, d, t0, t1, h); },
            [&](std::size_t k, const detail::SplitState& s) {
                out[k] = detail::join(s, program.n_qubits(), options.norm_tolerance);
            });
        return out;
    });
}

/// Outcome distribution |amplitude|^2 at every probe.
inline std::vector<std::vector<double>> probe_probabilities(const RydbergProgram& program,
                                                            const ProbeSchedule& schedule,
                                                            const PhysicalConstants& constants = {},
                                                            const IntegratorOptions& options = {}) {
    std::vector<std::vector<double>> out;
    for (const auto& s : run_program(program, schedule, constants, options)) {
        out.push_back(s.probabilities());
    }
    return out;
}

/// <Z_j> then <Z_j Z_k> for a probability distribution over bitstrings.
inline std::vector<double> expectations_from_probabilities(std::span<const double> probs,
                                                           const ObservableSpec& spec) {
    spec.validate();
    std::vector<double> out;
    out.reserve(spec.size());
    for (auto j : spec.singles) {
        double z = 0.0;
        for (std::size_t b = 0; b < probs.size(); ++b) {
            z += ((b >> j) & 1U) ? probs[b] : -probs[b];
        }
        out.push_back(z);
    }
    for (auto [j, k] : spec.pairs) {
        double zz = 0.0;
        for (std::size_t b = 0; b < probs.size(); ++b) {
            const bool same = ((b >> j) & 1U) == ((b >> k) & 1U);
            zz += same ? probs[b] : -probs[b];
        }
        out.push_back(zz);
    }
    return out;
}

inline std::vector<double> exact_expectations(const StateVector& state, const ObservableSpec& spec) {
    if (spec.n_qubits != state.n_qubits()) {
        throw ConfigError("observable spec and state disagree on qubit count");
    }
    const auto p = state.probabilities();
    return expectations_from_probabilities(p, spec);
}

/**
 * Shots first_shot .. first_shot + n_shots - 1 of a stream. Shot s uses
 * counter s only, so a range of shots can be drawn in any order or split.
 */
inline std::vector<std::uint64_t> sample_from_probabilities(std::span<const double> probs, std::size_t n_shots,
                                                            const CounterRng& stream,
                                                            std::uint64_t first_shot = 0) {
    std::vector<double> cdf(probs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        cdf[i] = acc;
    }
    std::vector<std::uint64_t> shots(n_shots);
    for (std::size_t s = 0; s < n_shots; ++s) {
        const double u = stream.uniform(first_shot + s) * acc;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        if (it == cdf.end()) {
            --it;
        }
        // Skip zero-probability entries that share the cdf value.
        while (it != cdf.begin() && probs[static_cast<std::size_t>(it - cdf.begin())] == 0.0) {
            --it;
        }
        shots[s] = static_cast<std::uint64_t>(it - cdf.begin());
    }
    return shots;
}

inline std::vector<std::uint64_t> sample_bitstrings(const StateVector& state, std::size_t n_shots,
                                                    const CounterRng& stream, std::uint64_t first_shot = 0) {
    if (n_shots == 0) {
        throw ConfigError("need at least one shot");
    }
    const auto p = state.probabilities();
    return sample_from_probabilities(p, n_shots, stream, first_shot);
}

}  // namespace qrc
