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

// JSON form of a RydbergProgram:
//
//   {
//     "units": {"frequency": "MHz" | "rad_per_us", "length": "um", "time": "us"},
//     "positions": [[x, y], ...],
//     "rounded": false,
//     "rabi": [[t, value], ...],
//     "global_detuning": [[t, value], ...],
//     "local_detuning": [[t, value], ...],
//     "local_pattern": [alpha_0, ...],
//     "total_time": 2.5
//   }
//
// Frequencies given in "MHz" are multiplied by 2 pi on load. The writer
// always emits "rad_per_us" so a round trip is exact.

#pragma once

#include <string>

#include <json.hpp>

#include "qrc/core_model.hpp"

namespace qrc {

namespace detail {

inline double frequency_factor(const nlohmann::json& j) {
    std::string unit = "rad_per_us";
    if (j.contains("units") && j["units"].contains("frequency")) {
        unit = j["units"]["frequency"].get<std::string>();
    }
    if (unit == "rad_per_us") return 1.0;
    if (unit == "MHz") return kTwoPi;
    throw ConfigError("unknown frequency unit '" + unit + "' (expected MHz or rad_per_us)");
}

inline void check_length_unit(const nlohmann::json& j) {
    if (j.contains("units") && j["units"].contains("length")) {
        const auto unit = j["units"]["length"].get<std::string>();
        if (unit != "um") {
            throw ConfigError("unknown length unit '" + unit + "' (expected um)");
        }
    }
    if (j.contains("units") && j["units"].contains("time")) {
        const auto unit = j["units"]["time"].get<std::string>();
        if (unit != "us") {
            throw ConfigError("unknown time unit '" + unit + "' (expected us)");
        }
    }
}

inline Waveform waveform_from_json(const nlohmann::json& j, double factor) {
    std::vector<Breakpoint> bps;
    for (const auto& p : j) {
        if (!p.is_array() || p.size() != 2) {
            throw ConfigError("waveform breakpoints must be [time, value] pairs");
        }
        bps.push_back({p[0].get<double>(), p[1].get<double>() * factor});
    }
    return Waveform(std::move(bps));
}

inline nlohmann::json waveform_to_json(const Waveform& w) {
    auto out = nlohmann::json::array();
    for (const auto& b : w.breakpoints()) {
        out.push_back({b.time, b.value});
    }
    return out;
}

}  // namespace detail

inline nlohmann::json to_json(const RydbergProgram& p) {
    nlohmann::json j;
    j["units"] = {{"frequency", "rad_per_us"}, {"length", "um"}, {"time", "us"}};
    auto pos = nlohmann::json::array();
    for (const auto& r : p.array().positions()) {
        pos.push_back({r.x, r.y});
    }
    j["positions"] = std::move(pos);
    j["rounded"] = p.array().rounded();
    j["rabi"] = detail::waveform_to_json(p.rabi());
    j["global_detuning"] = detail::waveform_to_json(p.global_detuning());
    j["local_detuning"] = detail::waveform_to_json(p.local_detuning());
    j["local_pattern"] = p.local_pattern();
    j["total_time"] = p.total_time();
    return j;
}

inline RydbergProgram program_from_json(const nlohmann::json& j) {
    try {
        const double f = detail::frequency_factor(j);
        detail::check_length_unit(j);
        std::vector<Vec2> positions;
        for (const auto& r : j.at("positions")) {
            positions.push_back({r.at(0).get<double>(), r.at(1).get<double>()});
        }
        AtomArray array(std::move(positions), j.value("rounded", false));
        const double total = j.at("total_time").get<double>();
        Waveform rabi = detail::waveform_from_json(j.at("rabi"), f);
        Waveform global = j.contains("global_detuning")
                              ? detail::waveform_from_json(j["global_detuning"], f)
                              : Waveform::constant(0.0, total);
        Waveform local = j.contains("local_detuning")
                             ? detail::waveform_from_json(j["local_detuning"], f)
                             : Waveform::constant(0.0, total);
        std::vector<double> pattern = j.value("local_pattern", std::vector<double>{});
        return RydbergProgram(std::move(array), std::move(rabi), std::move(global), std::move(local),
                              std::move(pattern), total);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed program JSON: ") + e.what());
    }
}

}  // namespace qrc
