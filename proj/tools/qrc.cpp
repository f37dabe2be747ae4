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

// qrc: command-line driver for encoding, simulation, embedding, training,
// kernel geometry and full experiment runs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "qrc/qrc.hpp"

namespace fs = std::filesystem;
using namespace qrc;

namespace {

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string backend;
    std::optional<std::size_t> jobs;
    std::optional<std::size_t> shots;
    std::string cache;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("-o,--out", c.out, "output directory (default: config 'output')");
    cmd->add_option("--seed", c.seed, "override the master seed");
    cmd->add_option("--backend", c.backend, "qrc-exact | qrc-shots | crc | features");
    cmd->add_option("-j,--jobs", c.jobs, "worker threads (0: all cores)");
    cmd->add_option("--shots", c.shots, "override the shot count");
    cmd->add_option("--cache", c.cache, "artifact cache directory (default: config 'cache' or $QRC_CACHE_DIR)");
}

ExperimentConfig resolve(const Common& c) {
    auto cfg = load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.backend.empty()) cfg.backend = backend_from_string(c.backend);
    if (c.jobs) cfg.jobs = *c.jobs;
    if (c.shots) cfg.n_shots = *c.shots;
    if (!c.out.empty()) cfg.output_dir = c.out;
    if (cfg.output_dir.empty()) cfg.output_dir = fs::path("out") / cfg.name;
    if (!c.cache.empty()) cfg.cache_dir = c.cache;
    cfg.validate();
    return cfg;
}

ArtifactCache cache_for(const ExperimentConfig& cfg) { return ArtifactCache::from_env(cfg.cache_dir.string()); }

void write_json(const fs::path& path, const nlohmann::json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

struct FirstInstance {
    SourceData src;
    Split split;
    Matrix features;
};

FirstInstance first_instance(const ExperimentConfig& cfg) {
    FirstInstance f;
    f.src = run_stage("dataset", [&] { return load_source(cfg); });
    f.split = data_split(f.src, cfg, 0);
    f.features = run_stage("preprocess", [&] { return prepare_features(f.src, cfg, f.split).features; });
    return f;
}

EmbeddingSet embedding_set(const ExperimentConfig& cfg, Matrix values, const std::vector<std::uint64_t>& ids,
                           std::size_t n_shots, double fraction) {
    EmbeddingSet e;
    e.values = std::move(values);
    if (cfg.backend == Backend::features) {
        e.layout.observables.n_qubits = 0;
        e.provenance.backend = "features";
    } else {
        e.layout = embedding_layout(cfg.encoding);
        e.provenance.backend = cfg.backend == Backend::crc ? "crc" : "qrc";
    }
    e.provenance.exact = n_shots == 0;
    e.provenance.n_shots = n_shots;
    e.provenance.seed = cfg.seed;
    e.provenance.resample_fraction = fraction;
    e.ids = ids;
    return e;
}

void write_embeddings(const EmbeddingSet& e, const fs::path& dir) {
    fs::create_directories(dir);
    std::ofstream out(dir / "embeddings.csv");
    write_embeddings_csv(e, out);
    write_json(dir / "embeddings.json", sidecar_json(e));
}

int cmd_encode(const Common& c, std::size_t limit) {
    const auto cfg = resolve(c);
    if (cfg.backend == Backend::features) throw ConfigError("the features backend has no encoding");
    const auto f = first_instance(cfg);
    const std::size_t n = limit ? std::min<std::size_t>(limit, f.features.rows()) : f.features.rows();
    fs::create_directories(cfg.output_dir);
    std::ofstream out(cfg.output_dir / "programs.jsonl");
    std::size_t in_regime = 0;
    nlohmann::json notes = nlohmann::json::array();
    for (std::size_t r = 0; r < n; ++r) {
        const Vector x = f.features.row(static_cast<Eigen::Index>(r)).transpose();
        const auto prog = run_stage("encode", [&] {
            return encode(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), cfg.encoding);
        });
        out << nlohmann::json{{"id", f.src.ids[r]}, {"program", to_json(prog)}}.dump() << '\n';
        const auto rep = regime_report(prog, regime_spec(cfg.encoding), cfg.constants);
        in_regime += rep.in_regime;
        if (r == 0) {
            notes = {{"mixing", rep.mixing_scale},
                     {"entangling", rep.entangling_scale},
                     {"encoding", rep.encoding_scale},
                     {"probe", rep.probe_scale},
                     {"notes", rep.notes}};
        }
    }
    write_json(cfg.output_dir / "regime.json",
               {{"programs", n}, {"in_regime", in_regime}, {"first_program_scales", notes}});
    std::printf("encoded %zu programs (%zu in regime) -> %s\n", n, in_regime, (cfg.output_dir / "programs.jsonl").c_str());
    return 0;
}

int cmd_simulate(const Common& c) {
    const auto cfg = resolve(c);
    const auto f = first_instance(cfg);
    const auto cache = cache_for(cfg);
    if (cfg.backend == Backend::qrc_shots) {
        const auto schedule = probe_schedule(cfg.encoding);
        ShotTable table(cfg.encoding.n_qubits, schedule.probe_times.size(), cfg.n_shots, cfg.seed);
        std::vector<std::vector<std::uint64_t>> rows(f.src.ids.size());
        run_stage("simulate", [&] {
            parallel_for(rows.size(), cfg.jobs, [&](std::size_t r) {
                const Vector x = f.features.row(static_cast<Eigen::Index>(r)).transpose();
                const auto prog = encode(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), cfg.encoding);
                rows[r] = sample_noisy_datapoint(prog, schedule, cfg.n_shots, cfg.noise, cfg.seed, f.src.ids[r],
                                                 cfg.constants, cfg.integrator);
            });
            return 0;
        });
        for (std::size_t r = 0; r < rows.size(); ++r) table.add(f.src.ids[r], std::move(rows[r]));
        fs::create_directories(cfg.output_dir);
        std::ofstream out(cfg.output_dir / "shots.bin", std::ios::binary);
        write_shots_binary(table, out);
        write_json(cfg.output_dir / "shots.json", {{"datapoints", table.n_datapoints()},
                                                   {"probes", table.n_probes()},
                                                   {"shots", table.n_shots()},
                                                   {"n_qubits", table.n_qubits()},
                                                   {"seed", cfg.seed},
                                                   {"encoding", to_json(cfg.encoding)},
                                                   {"noise", to_json(cfg.noise)}});
        std::printf("sampled %zu x %zu x %zu shots -> %s\n", table.n_datapoints(), table.n_probes(), table.n_shots(),
                    (cfg.output_dir / "shots.bin").c_str());
        return 0;
    }
    const auto emb = run_stage("simulate", [&] {
        return compute_embeddings(f.features, f.src.ids, cfg, cfg.backend, {{}}, cache);
    });
    write_embeddings(embedding_set(cfg, emb[0], f.src.ids, 0, 1.0), cfg.output_dir);
    std::printf("%s embeddings %ld x %ld -> %s\n", to_string(cfg.backend).c_str(), static_cast<long>(emb[0].rows()),
                static_cast<long>(emb[0].cols()), (cfg.output_dir / "embeddings.csv").c_str());
    return 0;
}

int cmd_embed(const Common& c, const std::string& shots_path, double fraction, std::uint64_t resample_seed) {
    const auto cfg = resolve(c);
    const fs::path path = shots_path.empty() ? cfg.output_dir / "shots.bin" : fs::path(shots_path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open shot table " + path.string());
    const auto table = read_shots_binary(in);
    const auto spec = observable_spec(cfg.encoding);
    if (spec.n_qubits != table.n_qubits()) throw ConfigError("shot table and encoding disagree on qubit count");
    Matrix values(static_cast<Eigen::Index>(table.n_datapoints()), static_cast<Eigen::Index>(spec.size() * table.n_probes()));
    for (std::size_t r = 0; r < table.n_datapoints(); ++r) {
        const auto e = fraction < 1.0
                           ? resample_embeddings(table, r, spec, fraction, CounterRng(resample_seed).derive(table.ids()[r]))
                           : estimate_observables(table, r, spec);
        values.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Vector>(e.data(), static_cast<Eigen::Index>(e.size()));
    }
    auto set = embedding_set(cfg, std::move(values), table.ids(), table.n_shots(), fraction);
    set.provenance.seed = table.seed();
    write_embeddings(set, cfg.output_dir);
    std::printf("embeddings %zu x %ld from %zu shots -> %s\n", set.size(), static_cast<long>(set.values.cols()),
                table.n_shots(), (cfg.output_dir / "embeddings.csv").c_str());
    return 0;
}

int cmd_train(const Common& c, const std::string& embeddings_path) {
    const auto cfg = resolve(c);
    const auto src = run_stage("dataset", [&] { return load_source(cfg); });
    const auto split = data_split(src, cfg, 0);
    Matrix x;
    if (!embeddings_path.empty()) {
        const fs::path p(embeddings_path);
        std::ifstream in(p);
        if (!in) throw DataError("cannot open " + p.string());
        auto side = p;
        side.replace_extension(".json");
        const auto set = read_embeddings_csv(in, read_json(side));
        if (set.ids != src.ids) throw DataError("embedding ids do not match the configured dataset");
        x = set.values;
    } else {
        const auto prep = run_stage("preprocess", [&] { return prepare_features(src, cfg, split); });
        std::vector<EmbeddingRequest> req{{}};
        if (cfg.backend == Backend::qrc_shots) req[0] = {cfg.n_shots, 1.0, 0};
        x = run_stage("simulate", [&] {
            return compute_embeddings(prep.features, src.ids, cfg, cfg.backend, req, cache_for(cfg))[0];
        });
    }
    GridResult grid;
    const auto h = run_stage("train", [&] { return select_hyperparameters(x, src.targets, src.classification, split, cfg, &grid); });
    const Matrix xt = select_rows(x, split.train), xs = select_rows(x, split.test);
    const Vector yt = select_entries(src.targets, split.train), ys = select_entries(src.targets, split.test);
    const auto model = run_stage("train", [&] {
        return src.classification ? train_csvc(xt, yt, h, cfg.learner.kernel, cfg.solver)
                                  : train_esvr(xt, yt, h, cfg.learner.kernel, cfg.solver);
    });
    const Vector pred = predict(model, xs);
    const double metric = src.classification ? accuracy(pred, ys) : nmse(pred, ys);
    const std::string name = src.classification ? "accuracy" : "nmse";
    write_json(cfg.output_dir / "model.json", to_json(model));
    write_json(cfg.output_dir / "metrics.json",
               {{"metric", name}, {name, metric}, {"C", h.C}, {"epsilon", h.epsilon}, {"gamma", h.gamma},
                {"n_train", split.train.size()}, {"n_test", split.test.size()}});
    std::printf("%s = %.6f (C=%g, epsilon=%g) -> %s\n", name.c_str(), metric, h.C, h.epsilon,
                (cfg.output_dir / "model.json").c_str());
    return 0;
}

int cmd_kernel_geometry(const Common& c) {
    auto cfg = resolve(c);
    cfg.kernel_advantage.enabled = true;
    cfg.validate();
    const auto r = kernel_advantage_run(cfg, cache_for(cfg));
    write_json(cfg.output_dir / "kernel_advantage.json", to_json(r));
    nlohmann::json geo = nlohmann::json::array();
    for (const auto& g : r.geometry) geo.push_back(to_json(g));
    write_json(cfg.output_dir / "geometry.json", geo);
    std::printf("classical=%s  mean(acc_q - acc_c) = %+.4f +/- %.4f over %zu  sign constant: %s\n",
                r.classical.c_str(), r.mean_difference, r.std_difference, r.differences().size(),
                r.sign_constant ? "yes" : "no");
    return 0;
}

int cmd_run(const Common& c) {
    const auto cfg = resolve(c);
    const auto rep = run_experiment(cfg, cache_for(cfg));
    emit_report(rep, cfg.output_dir);
    std::printf("%s [%s] %s = %.4f +/- %.4f over %zu instances -> %s\n", rep.name.c_str(), to_string(rep.backend).c_str(),
                rep.metric.c_str(), rep.mean, rep.std, rep.instances.size(), (cfg.output_dir / "report.json").c_str());
    if (rep.baselines.contains("naive_nmse")) std::printf("  naive nmse = %.4f\n", rep.baselines["naive_nmse"].get<double>());
    if (rep.kernel_advantage) {
        std::printf("  kernel advantage: %+.4f +/- %.4f\n", rep.kernel_advantage->mean_difference,
                    rep.kernel_advantage->std_difference);
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs) {
    std::printf("%-28s %-10s %6s %-9s %10s %10s %5s\n", "name", "backend", "shots", "metric", "mean", "std", "n");
    for (const auto& in : inputs) {
        fs::path p(in);
        if (fs::is_directory(p)) p /= "report.json";
        const auto j = read_json(p);
        if (j.value("schema_version", std::string()) != kReportSchema) {
            throw DataError(p.string() + ": not a " + std::string(kReportSchema) + " report");
        }
        std::printf("%-28s %-10s %6zu %-9s %10.4f %10.4f %5zu\n", j["name"].get<std::string>().c_str(),
                    j["backend"].get<std::string>().c_str(), j["shots"].get<std::size_t>(),
                    j["metric"].get<std::string>().c_str(), j["mean"].get<double>(), j["std"].get<double>(),
                    j["instance_count"].get<std::size_t>());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reservoir computing with simulated Rydberg-atom arrays"};
    app.require_subcommand(1);

    Common common;
    std::size_t limit = 0;
    std::string shots_path, embeddings_path;
    double fraction = 1.0;
    std::uint64_t resample_seed = 0;
    std::vector<std::string> reports;

    auto* encode_cmd = app.add_subcommand("encode", "encode the first data instance into Rydberg programs");
    add_common(encode_cmd, common);
    encode_cmd->add_option("--limit", limit, "encode at most this many datapoints");

    auto* simulate_cmd = app.add_subcommand("simulate", "sample a shot table (qrc-shots) or exact embeddings");
    add_common(simulate_cmd, common);

    auto* embed_cmd = app.add_subcommand("embed", "estimate embeddings from a shot table");
    add_common(embed_cmd, common);
    embed_cmd->add_option("--shots-file", shots_path, "shot table (default: <out>/shots.bin)");
    embed_cmd->add_option("--fraction", fraction, "resample this fraction of shots without replacement")
        ->check(CLI::Range(0.0, 1.0));
    embed_cmd->add_option("--resample-seed", resample_seed, "seed for the shot subset");

    auto* train_cmd = app.add_subcommand("train", "grid-search and fit the linear head on the first instance");
    add_common(train_cmd, common);
    train_cmd->add_option("--embeddings", embeddings_path, "embeddings CSV (sidecar JSON next to it)");

    auto* kg_cmd = app.add_subcommand("kernel-geometry", "geometric-difference sweep and synthetic-label comparison");
    add_common(kg_cmd, common);

    auto* run_cmd = app.add_subcommand("run", "full experiment over all uncertainty instances");
    add_common(run_cmd, common);

    auto* report_cmd = app.add_subcommand("report", "summarize report.json files");
    report_cmd->add_option("reports", reports, "report files or output directories")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_code::kSuccess : exit_code::kConfig;
    }

    try {
        if (*encode_cmd) return cmd_encode(common, limit);
        if (*simulate_cmd) return cmd_simulate(common);
        if (*embed_cmd) return cmd_embed(common, shots_path, fraction, resample_seed);
        if (*train_cmd) return cmd_train(common, embeddings_path);
        if (*kg_cmd) return cmd_kernel_geometry(common);
        if (*run_cmd) return cmd_run(common);
        if (*report_cmd) return cmd_report(reports);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return exit_code::kConfig;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return exit_code::kData;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return exit_code::kNumerical;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return exit_code::kConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return exit_code::kData;
    }
    return exit_code::kSuccess;
}
