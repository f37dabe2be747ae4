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

// Experiment orchestration: dataset -> preprocessing -> encoding ->
// simulation -> embeddings -> learner -> metrics, repeated over the
// uncertainty instances, plus the kernel-advantage construction.

#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qrc/cache.hpp"
#include "qrc/classical_sim.hpp"
#include "qrc/datasets.hpp"
#include "qrc/embeddings.hpp"
#include "qrc/encode.hpp"
#include "qrc/kernel_geometry.hpp"
#include "qrc/learners.hpp"
#include "qrc/noise.hpp"
#include "qrc/parallel.hpp"
#include "qrc/preprocess.hpp"
#include "qrc/quantum_sim.hpp"

namespace qrc {

inline constexpr const char* kReportSchema = "qrc-report/1";

enum class Backend { qrc_exact, qrc_shots, crc, features };

inline std::string to_string(Backend b) {
    switch (b) {
        case Backend::qrc_exact: return "qrc-exact";
        case Backend::qrc_shots: return "qrc-shots";
        case Backend::crc: return "crc";
        case Backend::features: return "features";
    }
    return "unknown";
}

inline Backend backend_from_string(const std::string& s) {
    if (s == "qrc-exact" || s == "exact") return Backend::qrc_exact;
    if (s == "qrc-shots" || s == "shots") return Backend::qrc_shots;
    if (s == "crc") return Backend::crc;
    if (s == "features" || s == "linear") return Backend::features;
    throw ConfigError("unknown backend '" + s + "' (expected qrc-exact, qrc-shots, crc or features)");
}

struct DatasetConfig {
    std::string kind = "mnist";  // mnist | timeseries | images
    std::filesystem::path images, labels, path, manifest;
    std::vector<int> digits;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    bool permute = true;  // classification: data instances permute the pool

    std::size_t window = 0;
    std::size_t horizon = 1;
    std::size_t column = 0;
    std::string split_mode = "windows";  // windows | targets
    std::array<std::size_t, 2> train_range{0, 0};
    std::array<std::size_t, 2> test_range{0, 0};
    double train_keep = 0.9;  // timeseries data instances keep ceil(train_keep * n_train) windows

    std::size_t resolution_x = 0;
    std::size_t resolution_y = 0;
    bool normalize_images = true;

    [[nodiscard]] bool timeseries() const { return kind == "timeseries"; }
};

struct LearnerConfig {
    KernelKind kernel = KernelKind::linear;
    Grids grids;
    double validation_fraction = 0.8;
    std::optional<Hyperparams> fixed;
};

struct UncertaintyConfig {
    std::size_t shot_resamples = 5;
    std::size_t data_resamples = 5;
    double resample_fraction = 0.9;
};

struct KernelAdvantageConfig {
    bool enabled = false;
    std::string classical = "crc";  // crc | gaussian
    std::size_t n_train = 800;
    std::size_t n_test = 400;
    std::size_t instances = 5;
    std::vector<double> deltas = delta_grid();
    std::vector<double> C{1e-2, 1e-1, 1.0, 1e1, 1e2};
    std::vector<double> gamma = Grids::default_gamma_grid();
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::uint64_t seed = 0;
    DatasetConfig dataset;
    std::size_t pca_dim = 0;
    EncodingSpec encoding;
    Backend backend = Backend::qrc_exact;
    std::size_t n_shots = 1000;
    NoiseParams noise;
    LearnerConfig learner;
    UncertaintyConfig uncertainty;
    KernelAdvantageConfig kernel_advantage;
    std::filesystem::path output_dir;
    std::filesystem::path cache_dir;
    std::size_t jobs = 0;
    PhysicalConstants constants;
    IntegratorOptions integrator;
    SolverOptions solver;

    void validate() const {
        const auto& d = dataset;
        if (d.kind != "mnist" && d.kind != "timeseries" && d.kind != "images") {
            throw ConfigError("unknown dataset kind '" + d.kind + "'");
        }
        if (d.kind == "mnist" && (!std::filesystem::exists(d.images) || !std::filesystem::exists(d.labels))) {
            throw ConfigError("MNIST files not found: " + d.images.string() + ", " + d.labels.string());
        }
        if (d.kind == "timeseries") {
            if (!std::filesystem::exists(d.path)) throw ConfigError("time series not found: " + d.path.string());
            if (d.window == 0) throw ConfigError("time series window must be positive");
            if (d.split_mode != "windows" && d.split_mode != "targets") {
                throw ConfigError("split mode must be 'windows' or 'targets'");
            }
            if (!(d.train_keep > 0.0 && d.train_keep <= 1.0)) throw ConfigError("train_keep must lie in (0, 1]");
        }
        if (d.kind == "images") {
            if (!std::filesystem::exists(d.manifest)) throw ConfigError("manifest not found: " + d.manifest.string());
            if (d.resolution_x == 0 || d.resolution_y == 0) throw ConfigError("image resolution must be positive");
        }
        if (d.kind != "timeseries" && (d.n_train == 0 || d.n_test == 0)) {
            throw ConfigError("n_train and n_test must be positive");
        }
        if (backend != Backend::features) encoding.validate();
        if (backend == Backend::qrc_shots && n_shots == 0) throw ConfigError("qrc-shots needs shots > 0");
        if (noise.active() && backend != Backend::qrc_shots) {
            throw ConfigError("noise applies to the qrc-shots backend only");
        }
        noise.validate();
        if (uncertainty.shot_resamples == 0 || uncertainty.data_resamples == 0) {
            throw ConfigError("uncertainty protocol needs at least one instance");
        }
        if (!(uncertainty.resample_fraction > 0.0 && uncertainty.resample_fraction <= 1.0)) {
            throw ConfigError("resample fraction must lie in (0, 1]");
        }
        if (!(learner.validation_fraction > 0.0 && learner.validation_fraction < 1.0)) {
            throw ConfigError("validation fraction must lie in (0, 1)");
        }
        if (kernel_advantage.enabled) {
            if (kernel_advantage.classical != "crc" && kernel_advantage.classical != "gaussian") {
                throw ConfigError("kernel advantage compares against 'crc' or 'gaussian'");
            }
            if (backend != Backend::qrc_exact && backend != Backend::qrc_shots) {
                throw ConfigError("kernel advantage needs a quantum backend");
            }
        }
    }
};

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return {};
    const std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
}

inline std::array<std::size_t, 2> range_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2) throw ConfigError("ranges are [first, last] pairs");
    return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

}  // namespace detail

/// Relative paths resolve against `base` (the config file's directory).
inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base = ".") {
    try {
        ExperimentConfig c;
        c.name = j.value("name", c.name);
        c.seed = j.value("seed", c.seed);
        const auto& d = j.at("dataset");
        c.dataset.kind = d.at("kind").get<std::string>();
        c.dataset.images = detail::resolve(base, d.value("images", std::string()));
        c.dataset.labels = detail::resolve(base, d.value("labels", std::string()));
        c.dataset.path = detail::resolve(base, d.value("path", std::string()));
        c.dataset.manifest = detail::resolve(base, d.value("manifest", std::string()));
        c.dataset.digits = d.value("digits", std::vector<int>{});
        c.dataset.n_train = d.value("n_train", std::size_t{0});
        c.dataset.n_test = d.value("n_test", std::size_t{0});
        c.dataset.permute = d.value("permute", true);
        c.dataset.window = d.value("window", std::size_t{0});
        c.dataset.horizon = d.value("horizon", std::size_t{1});
        c.dataset.column = d.value("column", std::size_t{0});
        c.dataset.train_keep = d.value("train_keep", 0.9);
        if (d.contains("split")) {
            const auto& s = d["split"];
            c.dataset.split_mode = s.value("mode", std::string("windows"));
            c.dataset.train_range = detail::range_from_json(s.at("train"));
            c.dataset.test_range = detail::range_from_json(s.at("test"));
        }
        if (d.contains("resolution")) {
            c.dataset.resolution_x = d["resolution"].at(0).get<std::size_t>();
            c.dataset.resolution_y = d["resolution"].at(1).get<std::size_t>();
        }
        c.dataset.normalize_images = d.value("normalize_images", true);
        if (j.contains("preprocess")) c.pca_dim = j["preprocess"].value("pca", std::size_t{0});
        c.backend = backend_from_string(j.value("backend", std::string("qrc-exact")));
        if (j.contains("encoding")) c.encoding = encoding_from_json(j["encoding"]);
        c.n_shots = j.value("shots", c.n_shots);
        if (j.contains("noise")) c.noise = noise_from_json(j["noise"]);
        if (j.contains("learner")) {
            const auto& l = j["learner"];
            c.learner.kernel = kernel_kind_from_string(l.value("kernel", std::string("linear")));
            if (l.contains("C")) c.learner.grids.C = l["C"].get<std::vector<double>>();
            if (l.contains("epsilon")) c.learner.grids.epsilon = l["epsilon"].get<std::vector<double>>();
            if (l.contains("gamma")) c.learner.grids.gamma = l["gamma"].get<std::vector<double>>();
            c.learner.validation_fraction = l.value("validation_fraction", c.learner.validation_fraction);
            if (l.contains("fixed")) {
                const auto& f = l["fixed"];
                c.learner.fixed = Hyperparams{f.value("C", 1.0), f.value("epsilon", 0.1), f.value("gamma", 1.0)};
            }
        }
        if (j.contains("uncertainty")) {
            const auto& u = j["uncertainty"];
            c.uncertainty.shot_resamples = u.value("shot_resamples", c.uncertainty.shot_resamples);
            c.uncertainty.data_resamples = u.value("data_resamples", c.uncertainty.data_resamples);
            c.uncertainty.resample_fraction = u.value("resample_fraction", c.uncertainty.resample_fraction);
        }
        if (j.contains("kernel_advantage")) {
            const auto& k = j["kernel_advantage"];
            auto& ka = c.kernel_advantage;
            ka.enabled = k.value("enabled", true);
            ka.classical = k.value("classical", ka.classical);
            ka.n_train = k.value("n_train", ka.n_train);
            ka.n_test = k.value("n_test", ka.n_test);
            ka.instances = k.value("instances", ka.instances);
            if (k.contains("C")) ka.C = k["C"].get<std::vector<double>>();
            if (k.contains("gamma")) ka.gamma = k["gamma"].get<std::vector<double>>();
            if (k.contains("delta_exponents")) {
                const auto& e = k["delta_exponents"];
                ka.deltas = delta_grid(e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>());
            }
        }
        c.output_dir = detail::resolve(base, j.value("output", std::string()));
        c.cache_dir = detail::resolve(base, j.value("cache", std::string()));
        c.jobs = j.value("jobs", c.jobs);
        if (j.contains("integrator")) {
            const auto& g = j["integrator"];
            c.integrator.max_step = g.value("max_step", c.integrator.max_step);
            c.integrator.step_scale = g.value("step_scale", c.integrator.step_scale);
            c.integrator.norm_tolerance = g.value("norm_tolerance", c.integrator.norm_tolerance);
        }
        if (j.contains("c6")) c.constants.c6 = j["c6"].get<double>();
        if (j.contains("solver")) {
            c.solver.tolerance = j["solver"].value("tolerance", c.solver.tolerance);
            c.solver.max_iterations = j["solver"].value("max_iterations", c.solver.max_iterations);
            if (j["solver"].contains("method")) {
                c.solver.method = solver_method_from_string(j["solver"]["method"].get<std::string>());
            }
        }
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed experiment config: ") + e.what());
    }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
    const auto& d = c.dataset;
    nlohmann::json ds = {{"kind", d.kind}, {"n_train", d.n_train}, {"n_test", d.n_test}};
    if (d.kind == "mnist") {
        ds["images"] = d.images.string();
        ds["labels"] = d.labels.string();
        ds["digits"] = d.digits;
        ds["permute"] = d.permute;
    } else if (d.kind == "timeseries") {
        ds["path"] = d.path.string();
        ds["window"] = d.window;
        ds["horizon"] = d.horizon;
        ds["column"] = d.column;
        ds["split"] = {{"mode", d.split_mode}, {"train", d.train_range}, {"test", d.test_range}};
        ds["train_keep"] = d.train_keep;
    } else {
        ds["manifest"] = d.manifest.string();
        ds["resolution"] = {d.resolution_x, d.resolution_y};
        ds["normalize_images"] = d.normalize_images;
        ds["permute"] = d.permute;
    }
    nlohmann::json learner = {{"kernel", to_string(c.learner.kernel)},
                              {"C", c.learner.grids.C},
                              {"epsilon", c.learner.grids.epsilon},
                              {"gamma", c.learner.grids.gamma},
                              {"validation_fraction", c.learner.validation_fraction}};
    if (c.learner.fixed) {
        learner["fixed"] = {{"C", c.learner.fixed->C}, {"epsilon", c.learner.fixed->epsilon}, {"gamma", c.learner.fixed->gamma}};
    }
    nlohmann::json j = {{"name", c.name},
                        {"seed", c.seed},
                        {"dataset", ds},
                        {"preprocess", {{"pca", c.pca_dim}}},
                        {"backend", to_string(c.backend)},
                        {"encoding", to_json(c.encoding)},
                        {"shots", c.n_shots},
                        {"noise", to_json(c.noise)},
                        {"learner", learner},
                        {"uncertainty",
                         {{"shot_resamples", c.uncertainty.shot_resamples},
                          {"data_resamples", c.uncertainty.data_resamples},
                          {"resample_fraction", c.uncertainty.resample_fraction}}},
                        {"integrator",
                         {{"max_step", c.integrator.max_step},
                          {"step_scale", c.integrator.step_scale},
                          {"norm_tolerance", c.integrator.norm_tolerance}}},
                        {"solver",
                         {{"method", to_string(c.solver.method)},
                          {"tolerance", c.solver.tolerance},
                          {"max_iterations", c.solver.max_iterations}}},
                        {"c6", c.constants.c6},
                        {"jobs", c.jobs}};
    if (c.kernel_advantage.enabled) {
        const auto& k = c.kernel_advantage;
        j["kernel_advantage"] = {{"enabled", true},          {"classical", k.classical}, {"n_train", k.n_train},
                                 {"n_test", k.n_test},        {"instances", k.instances}, {"C", k.C},
                                 {"gamma", k.gamma},          {"deltas", k.deltas}};
    }
    if (!c.output_dir.empty()) j["output"] = c.output_dir.string();
    return j;
}

/// Wraps a stage so its typed errors carry the stage name.
template <class F>
auto run_stage(const char* stage, F&& f) -> decltype(f()) {
    const std::string tag = std::string("[") + stage + "] ";
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(tag + e.what());
    } catch (const DataError& e) {
        throw DataError(tag + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(tag + e.what());
    }
}

/// Samples before preprocessing. `ids` are stable sample ids (RNG keys).
struct SourceData {
    Matrix raw;
    Vector targets;
    bool classification = true;
    std::vector<std::uint64_t> ids;
    std::vector<std::size_t> train_pool;  // timeseries: fixed train/test rows
    std::vector<std::size_t> test_pool;
    Vector naive;  // timeseries: last window value (persistence forecast)
};

inline SourceData load_source(const ExperimentConfig& cfg) {
    const auto& d = cfg.dataset;
    SourceData s;
    if (d.kind == "mnist" || d.kind == "images") {
        const auto imgs = d.kind == "mnist" ? load_mnist(d.images, d.labels, d.digits)
                                            : load_images(d.manifest, d.resolution_x, d.resolution_y, d.normalize_images);
        const std::size_t n = d.n_train + d.n_test;
        if (static_cast<std::size_t>(imgs.labels.size()) < n) {
            throw DataError("dataset has " + std::to_string(imgs.labels.size()) + " samples, " + std::to_string(n) +
                            " requested");
        }
        s.raw = imgs.pixels.topRows(static_cast<Eigen::Index>(n));
        s.targets = imgs.labels.head(static_cast<Eigen::Index>(n));
        s.classification = true;
        s.ids.resize(n);
        std::iota(s.ids.begin(), s.ids.end(), 0);
        return s;
    }
    const auto series = normalize_series(read_timeseries_file(d.path, d.column));
    const Dataset w = sliding_windows(series, d.window, d.horizon);
    const bool by_target = d.split_mode == "targets";
    const auto train = window_range(w, d.train_range[0], d.train_range[1], by_target, d.horizon);
    const auto test = window_range(w, d.test_range[0], d.test_range[1], by_target, d.horizon);
    if (train.empty() || test.empty()) throw DataError("time series split leaves an empty part");
    std::vector<std::size_t> rows(train);
    rows.insert(rows.end(), test.begin(), test.end());
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    if (rows.size() != train.size() + test.size()) throw ConfigError("time series train and test windows overlap");
    std::map<std::size_t, std::size_t> pos;
    for (std::size_t r = 0; r < rows.size(); ++r) pos[rows[r]] = r;
    s.raw = select_rows(w.features, rows);
    s.targets = select_entries(w.targets, rows);
    s.classification = false;
    s.ids.assign(rows.begin(), rows.end());
    for (auto k : train) s.train_pool.push_back(pos[k]);
    for (auto k : test) s.test_pool.push_back(pos[k]);
    s.naive = s.raw.col(s.raw.cols() - 1);
    return s;
}

struct Instance {
    std::size_t data_index = 0;
    std::size_t shot_index = 0;

    friend bool operator==(const Instance&, const Instance&) = default;
};

/// Shot resamples x data resamples; deterministic backends skip shot resampling.
inline std::vector<Instance> uncertainty_instances(const ExperimentConfig& cfg) {
    const std::size_t shots = cfg.backend == Backend::qrc_shots ? cfg.uncertainty.shot_resamples : 1;
    std::vector<Instance> out;
    for (std::size_t d = 0; d < cfg.uncertainty.data_resamples; ++d) {
        for (std::size_t s = 0; s < shots; ++s) out.push_back({d, s});
    }
    return out;
}

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

inline CounterRng data_stream(std::uint64_t seed, std::size_t data_index) {
    return CounterRng(seed).derive(0x64617461).derive(data_index);
}

inline CounterRng resample_stream(std::uint64_t seed, std::size_t shot_index) {
    return CounterRng(seed).derive(0x73686f74).derive(shot_index);
}

/**
 * Classification: a seeded permutation of the pool, first n_train for
 * training. Time series: ceil(train_keep * n_train) training windows kept at
 * random, test windows fixed.
 */
inline Split data_split(const SourceData& src, const ExperimentConfig& cfg, std::size_t data_index) {
    Split s;
    if (src.classification) {
        const std::size_t n = static_cast<std::size_t>(src.raw.rows());
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        if (cfg.dataset.permute) {
            SequentialRng rng(data_stream(cfg.seed, data_index));
            for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
        }
        s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cfg.dataset.n_train));
        s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(cfg.dataset.n_train), idx.end());
        return s;
    }
    const std::size_t n = src.train_pool.size();
    const auto keep = static_cast<std::size_t>(std::ceil(cfg.dataset.train_keep * static_cast<double>(n) - 1e-9));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (keep < n) {
        SequentialRng rng(data_stream(cfg.seed, data_index));
        for (std::size_t i = 0; i < keep; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
        idx.resize(keep);
        std::sort(idx.begin(), idx.end());
    }
    for (auto i : idx) s.train.push_back(src.train_pool[i]);
    s.test = src.test_pool;
    return s;
}

struct PreparedFeatures {
    Matrix features;  // all rows of the source, encoder-ready
    std::vector<std::string> warnings;
};

/// PCA fitted on the training rows (when configured), applied to every row.
inline PreparedFeatures prepare_features(const SourceData& src, const ExperimentConfig& cfg, const Split& split) {
    PreparedFeatures out;
    if (cfg.pca_dim > 0) {
        const auto model = pca_fit(select_rows(src.raw, split.train), cfg.pca_dim);
        out.features = model.apply(src.raw);
        out.warnings = model.warnings;
    } else {
        out.features = src.raw;
    }
    return out;
}

/// One embedding matrix to derive from a simulation: exact (n_shots = 0) or shot-based.
struct EmbeddingRequest {
    std::size_t n_shots = 0;
    double fraction = 1.0;
    std::uint64_t resample_seed = 0;
};

struct SimulationStats {
    std::size_t simulated = 0;     // datapoints evolved
    std::size_t cache_hits = 0;    // artifacts served from the cache
    double seconds = 0.0;
};

namespace detail {

inline nlohmann::json simulation_key(const Matrix& features, const std::vector<std::uint64_t>& ids,
                                     const ExperimentConfig& cfg, Backend backend) {
    std::uint64_t idh = fnv1a(ids.data(), ids.size() * sizeof(std::uint64_t));
    return {{"features", hex64(matrix_hash(features))},
            {"ids", hex64(idh)},
            {"encoding", to_json(cfg.encoding)},
            {"backend", backend == Backend::crc ? "crc" : "qrc"},
            {"c6", cfg.constants.c6},
            {"integrator", {cfg.integrator.max_step, cfg.integrator.step_scale, cfg.integrator.norm_tolerance}}};
}

}  // namespace detail

/// Observables recorded per probe: all pairs up to 16 atoms, nearest neighbours beyond.
inline ObservableSpec observable_spec(const EncodingSpec& spec) {
    return ObservableSpec::default_for(base_array(spec));
}

inline EmbeddingLayout embedding_layout(const EncodingSpec& spec) {
    return {observable_spec(spec), probe_schedule(spec).probe_times};
}

/**
 * Embedding matrices (rows follow `features`) for each request. Quantum
 * outcome distributions are cached when they fit in 512 MB, so later
 * requests with other shot counts reuse the evolution.
 */
inline std::vector<Matrix> compute_embeddings(const Matrix& features, const std::vector<std::uint64_t>& ids,
                                              const ExperimentConfig& cfg, Backend backend,
                                              const std::vector<EmbeddingRequest>& requests,
                                              const ArtifactCache& cache, SimulationStats* stats = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    SimulationStats local;
    SimulationStats& st = stats ? *stats : local;
    if (static_cast<std::size_t>(features.rows()) != ids.size()) throw ConfigError("feature rows and ids disagree");
    if (backend == Backend::features) {
        return std::vector<Matrix>(requests.size(), features);
    }
    const EncodingSpec& enc = cfg.encoding;
    if (static_cast<std::size_t>(features.cols()) != enc.feature_dim()) {
        throw ConfigError("encoding consumes " + std::to_string(enc.feature_dim()) + " features, data has " +
                          std::to_string(features.cols()));
    }
    const ObservableSpec spec = observable_spec(enc);
    const ProbeSchedule schedule = probe_schedule(enc);
    const std::size_t n = ids.size();
    const std::size_t n_probes = schedule.probe_times.size();
    const std::size_t width = spec.size() * n_probes;
    const nlohmann::json base = detail::simulation_key(features, ids, cfg, backend);

    std::vector<std::string> keys;
    std::vector<std::optional<Matrix>> found;
    for (const auto& r : requests) {
        if (backend == Backend::crc && r.n_shots != 0) throw ConfigError("the classical backend has no shots");
        nlohmann::json k = base;
        k["artifact"] = "embeddings";
        k["shots"] = r.n_shots;
        if (r.n_shots) {
            k["seed"] = cfg.seed;
            k["fraction"] = r.fraction;
            k["resample_seed"] = r.resample_seed;
            k["noise"] = to_json(cfg.noise);
        }
        keys.push_back(content_key(k));
        found.push_back(cache.load_matrix(keys.back()));
        if (found.back()) ++st.cache_hits;
    }
    if (std::all_of(found.begin(), found.end(), [](const auto& m) { return m.has_value(); })) {
        std::vector<Matrix> out;
        for (auto& m : found) out.push_back(std::move(*m));
        st.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }

    std::vector<Matrix> out(requests.size(), Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width)));
    auto fill = [&](std::size_t req, std::size_t row, const std::vector<double>& e) {
        out[req].row(static_cast<Eigen::Index>(row)) = Eigen::Map<const Vector>(e.data(), static_cast<Eigen::Index>(e.size()));
    };
    auto program_of = [&](std::size_t row) {
        const Vector x = features.row(static_cast<Eigen::Index>(row)).transpose();
        return encode(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), enc);
    };

    if (backend == Backend::crc) {
        parallel_for(n, cfg.jobs, [&](std::size_t row) {
            const auto e = crc_embeddings(crc_evolve(program_of(row), schedule, cfg.constants, cfg.integrator), spec);
            for (std::size_t q = 0; q < requests.size(); ++q) fill(q, row, e);
        });
        st.simulated += n;
    } else if (cfg.noise.active()) {
        parallel_for(n, cfg.jobs, [&](std::size_t row) {
            const auto prog = program_of(row);
            std::vector<double> exact;
            for (std::size_t q = 0; q < requests.size(); ++q) {
                const auto& r = requests[q];
                if (r.n_shots == 0) {
                    if (exact.empty()) exact = exact_embedding(probe_probabilities(prog, schedule, cfg.constants, cfg.integrator), spec);
                    fill(q, row, exact);
                    continue;
                }
                const auto shots = sample_noisy_datapoint(prog, schedule, r.n_shots, cfg.noise, cfg.seed, ids[row],
                                                          cfg.constants, cfg.integrator);
                fill(q, row, resample_from_shots(shots, n_probes, spec, r.fraction,
                                                 CounterRng(r.resample_seed).derive(ids[row])));
            }
        });
        st.simulated += n;
    } else {
        const std::size_t dim = std::size_t{1} << enc.n_qubits;
        const bool cache_probs = cache.enabled() && n * n_probes * dim * 8 <= (std::size_t{512} << 20);
        nlohmann::json pk = base;
        pk["artifact"] = "probabilities";
        const std::string pkey = content_key(pk);
        std::optional<Matrix> probs = cache_probs ? cache.load_matrix(pkey) : std::nullopt;
        if (probs && (static_cast<std::size_t>(probs->rows()) != n ||
                      static_cast<std::size_t>(probs->cols()) != n_probes * dim)) {
            probs.reset();
        }
        if (probs) ++st.cache_hits;
        Matrix store;
        if (!probs && cache_probs) store.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n_probes * dim));
        parallel_for(n, cfg.jobs, [&](std::size_t row) {
            std::vector<std::vector<double>> p(n_probes, std::vector<double>(dim));
            if (probs) {
                for (std::size_t k = 0; k < n_probes; ++k) {
                    for (std::size_t b = 0; b < dim; ++b) {
                        p[k][b] = (*probs)(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(k * dim + b));
                    }
                }
            } else {
                p = probe_probabilities(program_of(row), schedule, cfg.constants, cfg.integrator);
                if (store.size()) {
                    for (std::size_t k = 0; k < n_probes; ++k) {
                        for (std::size_t b = 0; b < dim; ++b) {
                            store(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(k * dim + b)) = p[k][b];
                        }
                    }
                }
            }
            for (std::size_t q = 0; q < requests.size(); ++q) {
                const auto& r = requests[q];
                if (r.n_shots == 0) {
                    fill(q, row, exact_embedding(p, spec));
                } else {
                    const auto shots = sample_datapoint(p, r.n_shots, cfg.seed, ids[row]);
                    fill(q, row, resample_from_shots(shots, n_probes, spec, r.fraction,
                                                     CounterRng(r.resample_seed).derive(ids[row])));
                }
            }
        });
        if (!probs) st.simulated += n;
        if (store.size()) cache.store_matrix(pkey, store, pk);
    }
    for (std::size_t q = 0; q < requests.size(); ++q) {
        nlohmann::json manifest = base;
        manifest["shots"] = requests[q].n_shots;
        cache.store_matrix(keys[q], out[q], manifest);
    }
    st.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

struct InstanceResult {
    Instance instance;
    double metric = 0.0;
    Hyperparams hyper;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
};

inline double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct KernelAdvantageResult {
    std::string classical;
    std::vector<double> deltas;
    std::vector<std::vector<double>> acc_quantum;    // [delta][instance]
    std::vector<std::vector<double>> acc_classical;  // [delta][instance]
    std::vector<double> gamma;                       // per delta (gaussian only)
    std::vector<GeometryResult> geometry;            // per delta
    double mean_difference = 0.0;
    double std_difference = 0.0;
    bool sign_constant = false;

    [[nodiscard]] std::vector<double> differences() const {
        std::vector<double> d;
        for (std::size_t i = 0; i < deltas.size(); ++i)
            for (std::size_t k = 0; k < acc_quantum[i].size(); ++k) d.push_back(acc_quantum[i][k] - acc_classical[i][k]);
        return d;
    }

    [[nodiscard]] std::vector<double> mean_difference_per_delta() const {
        std::vector<double> out;
        for (std::size_t i = 0; i < deltas.size(); ++i) {
            std::vector<double> d;
            for (std::size_t k = 0; k < acc_quantum[i].size(); ++k) d.push_back(acc_quantum[i][k] - acc_classical[i][k]);
            out.push_back(mean_of(d));
        }
        return out;
    }
};

inline nlohmann::json to_json(const KernelAdvantageResult& r) {
    nlohmann::json per = nlohmann::json::array();
    const auto md = r.mean_difference_per_delta();
    for (std::size_t i = 0; i < r.deltas.size(); ++i) {
        nlohmann::json e = {{"delta", r.deltas[i]},
                            {"accuracy_quantum", r.acc_quantum[i]},
                            {"accuracy_classical", r.acc_classical[i]},
                            {"mean_difference", md[i]}};
        if (!r.gamma.empty()) e["gamma"] = r.gamma[i];
        per.push_back(std::move(e));
    }
    return {{"classical", r.classical},
            {"delta_count", r.deltas.size()},
            {"mean_difference", r.mean_difference},
            {"std_difference", r.std_difference},
            {"pool_size", r.differences().size()},
            {"sign_constant", r.sign_constant},
            {"per_delta", per}};
}

namespace detail {

inline Matrix gram_block(const Matrix& k, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                k(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(cols[j]));
    return m;
}

/// Test accuracies of one kernel on a labelling, C chosen on the first split.
inline std::vector<double> kernel_accuracies(const Matrix& k, const Vector& y, const std::vector<Split>& splits,
                                             const std::vector<double>& c_grid, std::uint64_t seed,
                                             const SolverOptions& solver) {
    std::vector<double> acc;
    Hyperparams h;
    for (std::size_t i = 0; i < splits.size(); ++i) {
        const auto& s = splits[i];
        const Matrix ktt = gram_block(k, s.train, s.train);
        const Vector yt = select_entries(y, s.train);
        if (i == 0) {
            Grids g;
            g.C = c_grid;
            h = grid_search_precomputed(ktt, yt, Task::csvc, g, seed, 0.8, solver).best;
        }
        const auto model = train_csvc_precomputed(ktt, yt, h, solver);
        acc.push_back(accuracy(predict_precomputed(model, gram_block(k, s.test, s.train)), select_entries(y, s.test)));
    }
    return acc;
}

}  // namespace detail

/**
 * Synthetic-label comparison of K_q against one or more candidate classical
 * kernels. `kq_labels` builds the labels, `kq_train` trains the quantum
 * model (the same matrix for exact embeddings, disjoint shot halves
 * otherwise). With several candidates (a gamma grid), each delta keeps the
 * candidate with the smallest mean quantum-minus-classical difference.
 */
inline KernelAdvantageResult kernel_advantage_from_kernels(const Matrix& kq_labels, const Matrix& kq_train,
                                                           const std::vector<Matrix>& kc_candidates,
                                                           const std::vector<double>& candidate_gamma,
                                                           const KernelAdvantageConfig& ka, std::uint64_t seed,
                                                           const SolverOptions& solver = {}, std::size_t jobs = 1) {
    const auto n = static_cast<std::size_t>(kq_labels.rows());
    if (kc_candidates.empty()) throw ConfigError("no classical kernel to compare against");
    if (ka.n_train + ka.n_test > n) {
        throw ConfigError("kernel advantage split " + std::to_string(ka.n_train) + "/" + std::to_string(ka.n_test) +
                          " exceeds " + std::to_string(n) + " samples");
    }
    std::vector<Split> splits;
    for (std::size_t i = 0; i < ka.instances; ++i) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        SequentialRng rng(CounterRng(seed).derive(0x6b61).derive(i));
        for (std::size_t t = n; t > 1; --t) std::swap(idx[t - 1], idx[rng.below(t)]);
        splits.push_back({std::vector<std::size_t>(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(ka.n_train)),
                          std::vector<std::size_t>(idx.begin() + static_cast<std::ptrdiff_t>(ka.n_train),
                                                   idx.begin() + static_cast<std::ptrdiff_t>(ka.n_train + ka.n_test))});
    }
    KernelAdvantageResult r;
    r.deltas = ka.deltas;
    const std::size_t nd = ka.deltas.size();
    r.acc_quantum.assign(nd, {});
    r.acc_classical.assign(nd, {});
    r.geometry.assign(nd, {});
    if (!candidate_gamma.empty()) r.gamma.assign(nd, 0.0);
    std::vector<double> best(nd, std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < kc_candidates.size(); ++c) {
        const GeometryPrep prep(kq_labels, kc_candidates[c]);
        parallel_for(nd, jobs, [&](std::size_t i) {
            auto g = geometry_result(prep, ka.deltas[i]);
            Vector y(static_cast<Eigen::Index>(n));
            for (std::size_t t = 0; t < n; ++t) y(static_cast<Eigen::Index>(t)) = g.labels[t];
            auto aq = detail::kernel_accuracies(kq_train, y, splits, ka.C, seed, solver);
            auto ac = detail::kernel_accuracies(kc_candidates[c], y, splits, ka.C, seed, solver);
            std::vector<double> diff(aq.size());
            for (std::size_t k = 0; k < aq.size(); ++k) diff[k] = aq[k] - ac[k];
            const double m = mean_of(diff);
            if (m < best[i]) {
                best[i] = m;
                r.acc_quantum[i] = std::move(aq);
                r.acc_classical[i] = std::move(ac);
                r.geometry[i] = std::move(g);
                if (!candidate_gamma.empty()) r.gamma[i] = candidate_gamma[c];
            }
        });
    }
    const auto d = r.differences();
    r.mean_difference = mean_of(d);
    r.std_difference = sample_std(d);
    const auto md = r.mean_difference_per_delta();
    r.sign_constant = std::all_of(md.begin(), md.end(), [](double v) { return v > 0.0; }) ||
                      std::all_of(md.begin(), md.end(), [](double v) { return v < 0.0; });
    return r;
}

struct Report {
    std::string name;
    std::string metric;  // accuracy | nmse
    Backend backend = Backend::qrc_exact;
    std::size_t n_shots = 0;
    std::vector<InstanceResult> instances;
    double mean = 0.0;
    double std = 0.0;
    Hyperparams hyper;
    GridResult grid;
    nlohmann::json config;
    nlohmann::json baselines = nlohmann::json::object();
    std::vector<std::string> warnings;
    std::optional<KernelAdvantageResult> kernel_advantage;
    SimulationStats runtime;

    [[nodiscard]] std::vector<double> metrics() const {
        std::vector<double> v;
        for (const auto& i : instances) v.push_back(i.metric);
        return v;
    }
};

/// Deterministic report body (runtime statistics are emitted separately).
inline nlohmann::json to_json(const Report& r) {
    nlohmann::json inst = nlohmann::json::array();
    for (const auto& i : r.instances) {
        inst.push_back({{"data_instance", i.instance.data_index},
                        {"shot_instance", i.instance.shot_index},
                        {"metric", i.metric},
                        {"n_train", i.n_train},
                        {"n_test", i.n_test}});
    }
    nlohmann::json grid = nlohmann::json::array();
    for (const auto& [h, score] : r.grid.table) {
        grid.push_back({{"C", h.C}, {"epsilon", h.epsilon}, {"gamma", h.gamma}, {"score", score}});
    }
    nlohmann::json j = {{"schema_version", kReportSchema},
                        {"name", r.name},
                        {"backend", to_string(r.backend)},
                        {"shots", r.n_shots},
                        {"metric", r.metric},
                        {"instance_count", r.instances.size()},
                        {"mean", r.mean},
                        {"std", r.std},
                        {"hyperparameters", {{"C", r.hyper.C}, {"epsilon", r.hyper.epsilon}, {"gamma", r.hyper.gamma}}},
                        {"grid_search", grid},
                        {"instances", inst},
                        {"baselines", r.baselines},
                        {"warnings", r.warnings},
                        {"config", r.config}};
    if (r.kernel_advantage) j["kernel_advantage"] = to_json(*r.kernel_advantage);
    return j;
}

/// Trains on the split and returns the test metric.
inline double evaluate_split(const Matrix& x, const Vector& y, bool classification, const Split& split,
                             const Hyperparams& h, KernelKind kernel, const SolverOptions& solver) {
    const Matrix xt = select_rows(x, split.train), xs = select_rows(x, split.test);
    const Vector yt = select_entries(y, split.train), ys = select_entries(y, split.test);
    if (classification) return accuracy(predict(train_csvc(xt, yt, h, kernel, solver), xs), ys);
    return nmse(predict(train_esvr(xt, yt, h, kernel, solver), xs), ys);
}

inline Hyperparams select_hyperparameters(const Matrix& x, const Vector& y, bool classification, const Split& split,
                                          const ExperimentConfig& cfg, GridResult* grid = nullptr) {
    if (cfg.learner.fixed) return *cfg.learner.fixed;
    const auto g = grid_search(select_rows(x, split.train), select_entries(y, split.train),
                               classification ? Task::csvc : Task::esvr, cfg.learner.kernel, cfg.learner.grids,
                               CounterRng(cfg.seed).derive(0x67726964).key(), cfg.learner.validation_fraction,
                               cfg.solver);
    if (grid) *grid = g;
    return g.best;
}

/**
 * Kernel matrices for the advantage construction on the first data
 * instance: quantum kernel(s) from the configured backend, classical
 * candidates from the classical spin model or a Gaussian gamma grid.
 */
inline KernelAdvantageResult kernel_advantage_run(const ExperimentConfig& cfg, const ArtifactCache& cache,
                                                  SimulationStats* stats = nullptr) {
    const auto src = run_stage("dataset", [&] { return load_source(cfg); });
    if (!src.classification) throw ConfigError("kernel advantage needs a classification dataset");
    const auto split = data_split(src, cfg, 0);
    const auto prep = run_stage("preprocess", [&] { return prepare_features(src, cfg, split); });
    Matrix kq_labels, kq_train;
    run_stage("simulate", [&] {
        if (cfg.backend == Backend::qrc_exact) {
            const auto e = compute_embeddings(prep.features, src.ids, cfg, Backend::qrc_exact, {{}}, cache, stats);
            kq_labels = kernel_from_embeddings(e[0], "qrc").values;
            kq_train = kq_labels;
            return 0;
        }
        // Two disjoint halves of the N_s shots: labels from one, training from the other.
        const ObservableSpec spec = observable_spec(cfg.encoding);
        const ProbeSchedule schedule = probe_schedule(cfg.encoding);
        ShotTable table(cfg.encoding.n_qubits, schedule.probe_times.size(), cfg.n_shots, cfg.seed);
        for (std::size_t r = 0; r < src.ids.size(); ++r) {
            const Vector x = prep.features.row(static_cast<Eigen::Index>(r)).transpose();
            const auto prog = encode(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), cfg.encoding);
            table.add(src.ids[r], sample_noisy_datapoint(prog, schedule, cfg.n_shots, cfg.noise, cfg.seed, src.ids[r],
                                                         cfg.constants, cfg.integrator));
        }
        if (stats) stats->simulated += src.ids.size();
        const auto halves = split_shot_protocol(table, cfg.seed);
        Matrix e1(static_cast<Eigen::Index>(src.ids.size()), static_cast<Eigen::Index>(spec.size() * schedule.probe_times.size()));
        Matrix e2 = e1;
        for (std::size_t r = 0; r < src.ids.size(); ++r) {
            const auto a = estimate_observables(halves.first, r, spec);
            const auto b = estimate_observables(halves.second, r, spec);
            e1.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Vector>(a.data(), static_cast<Eigen::Index>(a.size()));
            e2.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
        }
        kq_labels = kernel_from_embeddings(e1, "qrc").values;
        kq_train = kernel_from_embeddings(e2, "qrc").values;
        return 0;
    });
    std::vector<Matrix> candidates;
    std::vector<double> gammas;
    run_stage("classical", [&] {
        if (cfg.kernel_advantage.classical == "crc") {
            const auto e = compute_embeddings(prep.features, src.ids, cfg, Backend::crc, {{}}, cache, stats);
            candidates.push_back(kernel_from_embeddings(e[0], "crc").values);
        } else {
            for (double g : cfg.kernel_advantage.gamma) {
                candidates.push_back(gaussian_kernel(prep.features, g).values);
                gammas.push_back(g);
            }
        }
        return 0;
    });
    return run_stage("kernel-geometry", [&] {
        auto r = kernel_advantage_from_kernels(kq_labels, kq_train, candidates, gammas, cfg.kernel_advantage, cfg.seed,
                                               cfg.solver, cfg.jobs);
        r.classical = cfg.kernel_advantage.classical;
        return r;
    });
}

/**
 * The full protocol: per data instance, split -> preprocess -> embeddings
 * (one per shot instance) -> train/test. Hyperparameters come from a grid
 * search on the first instance and stay fixed for the rest.
 */
inline Report run_experiment(const ExperimentConfig& cfg, const ArtifactCache& cache = {}) {
    cfg.validate();
    Report rep;
    rep.name = cfg.name;
    rep.backend = cfg.backend;
    rep.n_shots = cfg.backend == Backend::qrc_shots ? cfg.n_shots : 0;
    rep.config = to_json(cfg);
    const auto src = run_stage("dataset", [&] { return load_source(cfg); });
    rep.metric = src.classification ? "accuracy" : "nmse";
    const auto instances = uncertainty_instances(cfg);
    const std::size_t n_shot_inst = cfg.backend == Backend::qrc_shots ? cfg.uncertainty.shot_resamples : 1;
    bool have_hyper = false;
    std::vector<double> naive;
    for (std::size_t d = 0; d < cfg.uncertainty.data_resamples; ++d) {
        const auto split = data_split(src, cfg, d);
        const auto prep = run_stage("preprocess", [&] { return prepare_features(src, cfg, split); });
        for (const auto& w : prep.warnings) rep.warnings.push_back(w);
        std::vector<EmbeddingRequest> reqs;
        for (std::size_t s = 0; s < n_shot_inst; ++s) {
            if (cfg.backend == Backend::qrc_shots) {
                reqs.push_back({cfg.n_shots, cfg.uncertainty.resample_fraction, resample_stream(cfg.seed, s).key()});
            } else {
                reqs.push_back({});
            }
        }
        const auto emb = run_stage("simulate", [&] {
            return compute_embeddings(prep.features, src.ids, cfg, cfg.backend, reqs, cache, &rep.runtime);
        });
        for (std::size_t s = 0; s < n_shot_inst; ++s) {
            run_stage("train", [&] {
                if (!have_hyper) {
                    rep.hyper = select_hyperparameters(emb[s], src.targets, src.classification, split, cfg, &rep.grid);
                    have_hyper = true;
                }
                InstanceResult ir;
                ir.instance = {d, s};
                ir.hyper = rep.hyper;
                ir.n_train = split.train.size();
                ir.n_test = split.test.size();
                ir.metric = evaluate_split(emb[s], src.targets, src.classification, split, rep.hyper,
                                           cfg.learner.kernel, cfg.solver);
                rep.instances.push_back(ir);
                return 0;
            });
        }
        if (!src.classification) {
            naive.push_back(nmse(select_entries(src.naive, split.test), select_entries(src.targets, split.test)));
        }
    }
    if (rep.instances.size() != instances.size()) throw NumericalError("instance bookkeeping mismatch");
    const auto m = rep.metrics();
    rep.mean = mean_of(m);
    rep.std = sample_std(m);
    if (!naive.empty()) rep.baselines["naive_nmse"] = naive.front();
    if (cfg.kernel_advantage.enabled) rep.kernel_advantage = kernel_advantage_run(cfg, cache, &rep.runtime);
    return rep;
}

/// report.json, instances.csv and runtime.json under `dir`.
inline void emit_report(const Report& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "report.json");
        if (!out) throw DataError("cannot write " + (dir / "report.json").string());
        out << to_json(r).dump(2) << '\n';
    }
    {
        std::ofstream out(dir / "instances.csv");
        out.precision(17);
        out << "data_instance,shot_instance," << r.metric << ",C,epsilon,gamma\n";
        for (const auto& i : r.instances) {
            out << i.instance.data_index << ',' << i.instance.shot_index << ',' << i.metric << ',' << i.hyper.C << ','
                << i.hyper.epsilon << ',' << i.hyper.gamma << '\n';
        }
    }
    if (r.kernel_advantage) {
        std::ofstream out(dir / "kernel_advantage.csv");
        out.precision(17);
        out << "delta,instance,accuracy_quantum,accuracy_classical,difference\n";
        const auto& ka = *r.kernel_advantage;
        for (std::size_t i = 0; i < ka.deltas.size(); ++i) {
            for (std::size_t k = 0; k < ka.acc_quantum[i].size(); ++k) {
                out << ka.deltas[i] << ',' << k << ',' << ka.acc_quantum[i][k] << ',' << ka.acc_classical[i][k] << ','
                    << ka.acc_quantum[i][k] - ka.acc_classical[i][k] << '\n';
            }
        }
    }
    std::ofstream(dir / "runtime.json") << nlohmann::json{{"simulated_datapoints", r.runtime.simulated},
                                                          {"cache_hits", r.runtime.cache_hits},
                                                          {"simulation_seconds", r.runtime.seconds}}
                                               .dump(2)
                                        << '\n';
}

}  // namespace qrc
