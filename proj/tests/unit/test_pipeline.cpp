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

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qrc/pipeline.hpp"

namespace fs = std::filesystem;
using namespace qrc;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("qrc_pipeline_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Two-pixel images: class 0 is bright on the left, class 1 on the right.
fs::path write_toy_images(const fs::path& dir, std::size_t n) {
    std::ofstream manifest(dir / "manifest.csv");
    manifest << "path,label\n";
    SequentialRng rng(CounterRng(99));
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        const int hi = 200 + static_cast<int>(rng.below(50));
        const int lo = static_cast<int>(rng.below(50));
        const std::string name = "img" + std::to_string(i) + ".pgm";
        std::ofstream(dir / name) << "P2\n2 1\n255\n" << (label ? lo : hi) << ' ' << (label ? hi : lo) << '\n';
        manifest << name << ',' << label << '\n';
    }
    return dir / "manifest.csv";
}

nlohmann::json local_encoding(std::size_t n) {
    return {{"kind", "local"}, {"n_qubits", n}, {"rabi", 2 * M_PI}, {"global_detuning", 4.0}, {"local_max", -8.0},
            {"d0", 8.0},       {"probe_interval", 0.5}, {"probe_count", 3}};
}

nlohmann::json toy_classification(const fs::path& dir) {
    return {{"name", "toy"},
            {"seed", 11},
            {"dataset",
             {{"kind", "images"},
              {"manifest", write_toy_images(dir, 40).string()},
              {"resolution", {2, 1}},
              {"normalize_images", false},
              {"n_train", 30},
              {"n_test", 10}}},
            {"encoding", local_encoding(2)},
            {"backend", "qrc-exact"},
            {"shots", 64},
            {"learner", {{"C", {1.0, 10.0}}}},
            {"uncertainty", {{"shot_resamples", 5}, {"data_resamples", 5}}},
            {"jobs", 1}};
}

nlohmann::json toy_series(const fs::path& dir) {
    std::ofstream out(dir / "series.csv");
    out.precision(17);
    out << "value\n";
    for (int t = 0; t < 200; ++t) out << std::sin(0.3 * t) + 0.2 * std::sin(0.71 * t) << '\n';
    return {{"name", "series"},
            {"seed", 5},
            {"dataset",
             {{"kind", "timeseries"},
              {"path", (dir / "series.csv").string()},
              {"window", 2},
              {"split", {{"mode", "windows"}, {"train", {0, 99}}, {"test", {100, 149}}}}}},
            {"encoding", local_encoding(2)},
            {"backend", "qrc-exact"},
            {"learner", {{"C", {1.0}}, {"epsilon", {0.01}}}},
            {"uncertainty", {{"shot_resamples", 2}, {"data_resamples", 2}}},
            {"jobs", 1}};
}

}  // namespace

TEST(Pipeline, ToySeparableReachesPerfectAccuracy) {
    const auto dir = scratch("toy");
    const auto cfg = config_from_json(toy_classification(dir));
    const auto rep = run_experiment(cfg);
    ASSERT_EQ(rep.instances.size(), 5u);
    for (const auto& i : rep.instances) EXPECT_DOUBLE_EQ(i.metric, 1.0);
    EXPECT_DOUBLE_EQ(rep.mean, 1.0);
    EXPECT_DOUBLE_EQ(rep.std, 0.0);
    EXPECT_EQ(rep.metric, "accuracy");
}

TEST(Pipeline, ClassicalBackendSharesTheSchema) {
    const auto dir = scratch("crc");
    auto j = toy_classification(dir);
    const auto q = run_experiment(config_from_json(j));
    j["backend"] = "crc";
    const auto c = run_experiment(config_from_json(j));
    auto a = to_json(q), b = to_json(c);
    for (auto* r : {&a, &b}) {
        r->erase("config");
    }
    std::vector<std::string> ka, kb;
    for (auto it = a.begin(); it != a.end(); ++it) ka.push_back(it.key());
    for (auto it = b.begin(); it != b.end(); ++it) kb.push_back(it.key());
    EXPECT_EQ(ka, kb);
    EXPECT_EQ(b["backend"], "crc");
    EXPECT_EQ(b["instances"].size(), 5u);
}

TEST(Pipeline, InstanceCountsFollowBackend) {
    const auto dir = scratch("counts");
    auto j = toy_classification(dir);
    EXPECT_EQ(uncertainty_instances(config_from_json(j)).size(), 5u);
    j["backend"] = "crc";
    EXPECT_EQ(uncertainty_instances(config_from_json(j)).size(), 5u);
    j["backend"] = "qrc-shots";
    const auto inst = uncertainty_instances(config_from_json(j));
    ASSERT_EQ(inst.size(), 25u);
    EXPECT_EQ(inst.front(), (Instance{0, 0}));
    EXPECT_EQ(inst.back(), (Instance{4, 4}));
}

TEST(Pipeline, ShotBackendRunsAllInstances) {
    const auto dir = scratch("shots");
    auto j = toy_classification(dir);
    j["backend"] = "qrc-shots";
    j["uncertainty"] = {{"shot_resamples", 2}, {"data_resamples", 2}};
    const auto rep = run_experiment(config_from_json(j));
    EXPECT_EQ(rep.instances.size(), 4u);
    EXPECT_EQ(rep.n_shots, 64u);
    EXPECT_GE(rep.mean, 0.9);
}

TEST(Pipeline, TimeseriesKeepsCeilOfNinetyPercent) {
    const auto dir = scratch("ts_split");
    const auto cfg = config_from_json(toy_series(dir));
    const auto src = load_source(cfg);
    ASSERT_EQ(src.train_pool.size(), 100u);
    ASSERT_EQ(src.test_pool.size(), 50u);
    const auto s0 = data_split(src, cfg, 0);
    const auto s1 = data_split(src, cfg, 1);
    EXPECT_EQ(s0.train.size(), 90u);
    EXPECT_EQ(s0.test, src.test_pool);
    EXPECT_NE(s0.train, s1.train);
    EXPECT_TRUE(std::is_sorted(s0.train.begin(), s0.train.end()));

    auto j = toy_series(dir);
    j["dataset"]["split"]["train"] = {0, 96};
    const auto cfg2 = config_from_json(j);
    EXPECT_EQ(data_split(load_source(cfg2), cfg2, 0).train.size(), 88u);  // ceil(87.3)
}

TEST(Pipeline, TargetSplitSelectsByTargetIndex) {
    const auto dir = scratch("ts_targets");
    auto j = toy_series(dir);
    j["dataset"]["split"] = {{"mode", "targets"}, {"train", {10, 40}}, {"test", {41, 50}}};
    const auto cfg = config_from_json(j);
    const auto src = load_source(cfg);
    EXPECT_EQ(src.train_pool.size(), 31u);
    EXPECT_EQ(src.test_pool.size(), 10u);
    EXPECT_EQ(src.ids.front(), 8u);  // window 8 predicts index 10
}

TEST(Pipeline, TimeseriesReportsNmseAndNaiveBaseline) {
    const auto dir = scratch("ts_run");
    const auto rep = run_experiment(config_from_json(toy_series(dir)));
    EXPECT_EQ(rep.metric, "nmse");
    EXPECT_EQ(rep.instances.size(), 2u);
    for (const auto& i : rep.instances) EXPECT_TRUE(std::isfinite(i.metric));
    ASSERT_TRUE(rep.baselines.contains("naive_nmse"));

    // Persistence forecast on windows 100..149: predict s[k+1] for target s[k+2].
    std::vector<double> s;
    for (int t = 0; t < 200; ++t) s.push_back(std::sin(0.3 * t) + 0.2 * std::sin(0.71 * t));
    const double lo = *std::min_element(s.begin(), s.end()), hi = *std::max_element(s.begin(), s.end());
    double mse = 0.0, mean = 0.0, var = 0.0;
    for (int k = 100; k <= 149; ++k) {
        const double y = (s[k + 2] - lo) / (hi - lo), p = (s[k + 1] - lo) / (hi - lo);
        mse += (y - p) * (y - p) / 50.0;
        mean += y / 50.0;
    }
    for (int k = 100; k <= 149; ++k) var += std::pow((s[k + 2] - lo) / (hi - lo) - mean, 2) / 50.0;
    EXPECT_NEAR(rep.baselines["naive_nmse"].get<double>(), mse / var, 1e-12);
}

TEST(Pipeline, RepeatedRunsAreBitIdentical) {
    const auto dir = scratch("determinism");
    auto j = toy_classification(dir);
    j["backend"] = "qrc-shots";
    j["uncertainty"] = {{"shot_resamples", 2}, {"data_resamples", 1}};
    const auto cfg = config_from_json(j);
    const auto a = to_json(run_experiment(cfg)).dump();
    auto cfg4 = cfg;
    cfg4.jobs = 4;
    const auto b = to_json(run_experiment(cfg4)).dump();
    auto ja = nlohmann::json::parse(a), jb = nlohmann::json::parse(b);
    ja["config"].erase("jobs");
    jb["config"].erase("jobs");
    EXPECT_EQ(ja.dump(), jb.dump());
}

TEST(Pipeline, EmitReportWritesCsvRowPerInstance) {
    const auto dir = scratch("emit");
    const auto rep = run_experiment(config_from_json(toy_classification(dir)));
    emit_report(rep, dir / "out");
    std::ifstream in(dir / "out" / "instances.csv");
    std::string line;
    std::size_t rows = 0;
    std::getline(in, line);
    EXPECT_EQ(line.rfind("data_instance,shot_instance,accuracy", 0), 0u);
    while (std::getline(in, line)) rows += !line.empty();
    EXPECT_EQ(rows, rep.instances.size());
    std::ifstream rj(dir / "out" / "report.json");
    const auto j = nlohmann::json::parse(rj);
    EXPECT_EQ(j["schema_version"], kReportSchema);
    EXPECT_EQ(j["instance_count"], rep.instances.size());
    EXPECT_TRUE(fs::exists(dir / "out" / "runtime.json"));
}

TEST(Pipeline, ConfigRoundTripsThroughJson) {
    const auto dir = scratch("roundtrip");
    const auto cfg = config_from_json(toy_classification(dir));
    const auto again = config_from_json(to_json(cfg));
    EXPECT_EQ(to_json(again).dump(), to_json(cfg).dump());
}

TEST(Pipeline, BadConfigsRaiseConfigError) {
    const auto dir = scratch("bad");
    auto j = toy_classification(dir);
    j["backend"] = "annealer";
    EXPECT_THROW(config_from_json(j), ConfigError);
    j = toy_classification(dir);
    j["noise"] = {{"position_amplitude_um", 0.1}};
    EXPECT_THROW(config_from_json(j), ConfigError);  // noise needs shots
    j = toy_classification(dir);
    j["dataset"]["kind"] = "audio";
    EXPECT_THROW(config_from_json(j), ConfigError);
    j = toy_classification(dir);
    j["encoding"]["n_qubits"] = 3;
    try {
        run_experiment(config_from_json(j));
        FAIL() << "feature/encoding mismatch accepted";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("[simulate]"), std::string::npos);
    }
}

TEST(Pipeline, MissingDataIsADataError) {
    const auto dir = scratch("missing");
    auto j = toy_classification(dir);
    j["dataset"]["n_train"] = 1000;
    try {
        run_experiment(config_from_json(j));
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("[dataset]"), std::string::npos);
    }
}

TEST(Pipeline, CacheServesRepeatedSimulation) {
    const auto dir = scratch("cache");
    auto cfg = config_from_json(toy_classification(dir));
    cfg.uncertainty.data_resamples = 1;
    const ArtifactCache cache(dir / "cache");
    const auto a = run_experiment(cfg, cache);
    EXPECT_EQ(a.runtime.simulated, 40u);
    const auto b = run_experiment(cfg, cache);
    EXPECT_EQ(b.runtime.simulated, 0u);
    EXPECT_GE(b.runtime.cache_hits, 1u);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Pipeline, ShotEmbeddingsReuseCachedProbabilities) {
    const auto dir = scratch("probcache");
    const auto cfg = config_from_json(toy_classification(dir));
    const auto src = load_source(cfg);
    const auto feats = prepare_features(src, cfg, data_split(src, cfg, 0)).features;
    const ArtifactCache cache(dir / "cache");
    SimulationStats s1, s2;
    const auto exact = compute_embeddings(feats, src.ids, cfg, Backend::qrc_exact, {{}}, cache, &s1);
    const auto shots = compute_embeddings(feats, src.ids, cfg, Backend::qrc_shots, {{5000, 1.0, 3}}, cache, &s2);
    EXPECT_EQ(s1.simulated, 40u);
    EXPECT_EQ(s2.simulated, 0u);
    EXPECT_LT((exact[0] - shots[0]).cwiseAbs().maxCoeff(), 0.06);
}

TEST(Pipeline, FeaturesBackendPassesFeaturesThrough) {
    const auto dir = scratch("features");
    auto j = toy_classification(dir);
    j["backend"] = "features";
    const auto cfg = config_from_json(j);
    const auto rep = run_experiment(cfg);
    EXPECT_DOUBLE_EQ(rep.mean, 1.0);
    EXPECT_EQ(rep.runtime.simulated, 0u);
}

TEST(Pipeline, StageErrorsKeepTheirType) {
    EXPECT_THROW(run_stage("x", []() -> int { throw NumericalError("boom"); }), NumericalError);
    try {
        run_stage("learn", []() -> int { throw DataError("bad"); });
    } catch (const DataError& e) {
        EXPECT_EQ(std::string(e.what()), "[learn] bad");
    }
}

TEST(KernelAdvantage, IdenticalKernelsGiveZeroDifference) {
    const std::size_t n = 60;
    Matrix x(n, 3);
    SequentialRng rng(CounterRng(4));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index c = 0; c < x.cols(); ++c) x(i, c) = rng.uniform();
    const Matrix k = gaussian_kernel(x, 2.0).values;
    KernelAdvantageConfig ka;
    ka.enabled = true;
    ka.n_train = 40;
    ka.n_test = 20;
    ka.instances = 3;
    ka.deltas = {1e-6, 1e-3};
    ka.C = {1.0, 10.0};
    const auto r = kernel_advantage_from_kernels(k, k, {k}, {}, ka, 9);
    EXPECT_EQ(r.differences().size(), 6u);
    for (double d : r.differences()) EXPECT_DOUBLE_EQ(d, 0.0);
    EXPECT_DOUBLE_EQ(r.mean_difference, 0.0);
    EXPECT_FALSE(r.sign_constant);
}

TEST(KernelAdvantage, GeometryLabelsFavourTheQuantumKernel) {
    const std::size_t n = 120;
    Matrix x(n, 4);
    SequentialRng rng(CounterRng(8));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index c = 0; c < x.cols(); ++c) x(i, c) = rng.uniform();
    const Matrix kq = gaussian_kernel(x, 8.0).values;
    const Matrix kc = gaussian_kernel(x.leftCols(2), 0.5).values;
    KernelAdvantageConfig ka;
    ka.enabled = true;
    ka.n_train = 80;
    ka.n_test = 40;
    ka.instances = 3;
    ka.deltas = {1e-4};
    const auto r = kernel_advantage_from_kernels(kq, kq, {kc}, {}, ka, 1);
    EXPECT_GT(r.mean_difference, 0.0);
    const auto j = to_json(r);
    EXPECT_EQ(j["per_delta"].size(), 1u);
    EXPECT_EQ(j["pool_size"], 3u);
}

TEST(KernelAdvantage, GammaCandidatesPickTheClosestClassicalKernel) {
    const std::size_t n = 80;
    Matrix x(n, 3);
    SequentialRng rng(CounterRng(12));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index c = 0; c < x.cols(); ++c) x(i, c) = rng.uniform();
    const Matrix kq = gaussian_kernel(x, 4.0).values;
    KernelAdvantageConfig ka;
    ka.n_train = 50;
    ka.n_test = 30;
    ka.instances = 2;
    ka.deltas = {1e-5};
    const auto r = kernel_advantage_from_kernels(kq, kq, {gaussian_kernel(x, 0.25).values, kq}, {0.25, 4.0}, ka, 3);
    ASSERT_EQ(r.gamma.size(), 1u);
    EXPECT_DOUBLE_EQ(r.gamma[0], 4.0);
    EXPECT_DOUBLE_EQ(r.mean_difference, 0.0);
}

TEST(Cache, MatrixBinaryRoundTrip) {
    Matrix m(3, 4);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::sin(static_cast<double>(i)) * 1e-7 + i;
    std::stringstream ss;
    write_matrix_binary(ss, m);
    const Matrix back = read_matrix_binary(ss);
    EXPECT_EQ(back, m);
    std::stringstream torn(ss.str().substr(0, 30));
    EXPECT_THROW(read_matrix_binary(torn), DataError);
}

TEST(Cache, KeysDependOnContentOnly) {
    EXPECT_EQ(content_key({{"a", 1}, {"b", 2}}), content_key({{"b", 2}, {"a", 1}}));
    EXPECT_NE(content_key({{"a", 1}}), content_key({{"a", 2}}));
    Matrix a = Matrix::Zero(2, 2), b = a;
    b(1, 1) = 1e-300;
    EXPECT_NE(matrix_hash(a), matrix_hash(b));
}

TEST(Cache, DisabledCacheStoresNothing) {
    const ArtifactCache off;
    EXPECT_FALSE(off.enabled());
    off.store_matrix("abcd", Matrix::Ones(1, 1));
    EXPECT_FALSE(off.load_matrix("abcd").has_value());
    const auto dir = scratch("cache_on");
    const ArtifactCache on(dir);
    on.store_matrix("abcd", Matrix::Ones(2, 1), {{"k", 1}});
    EXPECT_TRUE(fs::exists(dir / "ab" / "abcd.json"));
    EXPECT_EQ(*on.load_matrix("abcd"), Matrix::Ones(2, 1));
}

TEST(Parallel, EveryIndexRunsOnce) {
    std::vector<std::atomic<int>> hits(500);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(Parallel, LowestFailingIndexWins) {
    try {
        parallel_for(100, 1, [](std::size_t i) {
            if (i == 7 || i == 50) throw DataError(std::to_string(i));
        });
        FAIL();
    } catch (const DataError& e) {
        EXPECT_STREQ(e.what(), "7");
    }
}
