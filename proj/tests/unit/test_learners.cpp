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

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "qrc/learners.hpp"
#include "support/dual_oracle.hpp"

namespace qrc {
namespace {

using testing_support::brute_force_dual;

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    SequentialRng rng{CounterRng(seed)};
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = 2.0 * rng.uniform() - 1.0;
    return m;
}

Vector labels_from(const Matrix& x, std::uint64_t seed) {
    const Matrix w = random_matrix(x.cols(), 1, seed);
    Vector y(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) y(i) = (x.row(i).dot(w.col(0)) > 0.0) ? 1.0 : -1.0;
    y(0) = 1.0;
    y(1) = -1.0;
    return y;
}

TEST(Svm, TwoPointMargin) {
    Matrix x(2, 2);
    x << 1, 0, -1, 0;
    const Vector y = (Vector(2) << 1, -1).finished();
    const auto m = train_csvc(x, y, {1e3, 0.1, 1.0});
    ASSERT_EQ(m.machines.size(), 1u);
    EXPECT_NEAR(m.machines[0].w(0), 1.0, 1e-6);
    EXPECT_NEAR(m.machines[0].w(1), 0.0, 1e-12);
    EXPECT_NEAR(m.machines[0].rho, 0.0, 1e-6);
    EXPECT_NEAR(m.machines[0].objective, -0.5, 1e-6);
    for (double c : m.machines[0].coef) EXPECT_NEAR(std::abs(c), 0.5, 1e-6);
}

TEST(Svm, TwoPointSoftMarginSaturates) {
    Matrix x(2, 1);
    x << 1, -1;
    const Vector y = (Vector(2) << 1, -1).finished();
    // With C below 1/2 both multipliers sit at C and w = 2C.
    const auto m = train_csvc(x, y, {0.2, 0.1, 1.0});
    EXPECT_NEAR(m.machines[0].w(0), 0.4, 1e-9);
}

class CsvcOracle : public ::testing::TestWithParam<std::tuple<int, double, KernelKind>> {};

TEST_P(CsvcOracle, MatchesEnumeratedQp) {
    const auto [seed, C, kernel] = GetParam();
    const Matrix x = random_matrix(7, 3, static_cast<std::uint64_t>(seed));
    Vector y = labels_from(x, static_cast<std::uint64_t>(seed) + 100);
    y(3) = -y(3);  // not separable
    const Hyperparams h{C, 0.1, 0.7};
    const auto m = train_csvc(x, y, h, kernel);
    const Matrix k = kernel == KernelKind::linear ? linear_gram(x, x) : gaussian_gram(x, h.gamma);
    const Matrix q = (y * y.transpose()).cwiseProduct(k);
    const double oracle = brute_force_dual(q, -Vector::Ones(7), y, C);
    EXPECT_NEAR(m.machines[0].objective, oracle, 1e-4 * std::max(1.0, std::abs(oracle)));
}

INSTANTIATE_TEST_SUITE_P(Grid, CsvcOracle,
                         ::testing::Combine(::testing::Values(1, 2, 3), ::testing::Values(0.1, 1.0, 10.0),
                                            ::testing::Values(KernelKind::linear, KernelKind::gaussian)));

TEST(Svr, MatchesEnumeratedQp) {
    for (std::uint64_t seed : {5u, 6u, 7u}) {
        const Matrix x = random_matrix(4, 2, seed);
        const Vector z = random_matrix(4, 1, seed + 50).col(0);
        for (double C : {0.5, 5.0}) {
            const Hyperparams h{C, 0.05, 1.3};
            const auto m = train_esvr(x, z, h, KernelKind::gaussian);
            const Matrix k = gaussian_gram(x, h.gamma);
            Matrix q(8, 8);
            Vector p(8), y(8);
            for (int i = 0; i < 8; ++i) {
                y(i) = i < 4 ? 1 : -1;
                p(i) = h.epsilon + (i < 4 ? -z(i) : z(i - 4));
            }
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j) q(i, j) = y(i) * y(j) * k(i % 4, j % 4);
            const double oracle = brute_force_dual(q, p, y, C);
            EXPECT_NEAR(m.machines[0].objective, oracle, 1e-4 * std::max(1.0, std::abs(oracle))) << seed << " " << C;
        }
    }
}

TEST(Svm, KktHoldsOnLargerProblem) {
    const Matrix x = random_matrix(200, 5, 11);
    Vector y = labels_from(x, 12);
    for (Eigen::Index i = 0; i < 200; i += 9) y(i) = -y(i);
    const double C = 3.0;
    const auto m = train_csvc(x, y, {C, 0.1, 1.0});
    const Vector f = decision_values(m, x).col(0);
    std::vector<double> alpha(200, 0.0);
    for (std::size_t s = 0; s < m.machines[0].support.size(); ++s) {
        alpha[m.machines[0].support[s]] = m.machines[0].coef[s] * y(static_cast<Eigen::Index>(m.machines[0].support[s]));
    }
    const double tol = 1e-4;
    for (Eigen::Index i = 0; i < 200; ++i) {
        const double margin = y(i) * f(i);
        const double a = alpha[static_cast<std::size_t>(i)];
        if (a <= 0.0) EXPECT_GT(margin, 1.0 - tol) << i;
        else if (a >= C) EXPECT_LT(margin, 1.0 + tol) << i;
        else EXPECT_NEAR(margin, 1.0, tol) << i;
    }
}

TEST(Svm, LinearMatchesPrecomputed) {
    const Matrix x = random_matrix(60, 4, 21);
    const Matrix xt = random_matrix(25, 4, 22);
    Vector y = labels_from(x, 23);
    y(5) = -y(5);
    const Hyperparams h{2.0, 0.1, 1.0};
    const auto lin = train_csvc(x, y, h);
    const auto pre = train_csvc_precomputed(linear_gram(x, x), y, h);
    const Matrix block = linear_gram(xt, x);
    const Vector a = decision_values(lin, xt).col(0);
    const Vector b = decision_values(pre, Matrix(), &block).col(0);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_EQ(predict(lin, xt), predict_precomputed(pre, block));

    const Vector z = x.col(0) * 0.7 - x.col(2);
    const auto rl = train_esvr(x, z, {1.0, 0.01, 1.0});
    const auto rp = train_esvr_precomputed(linear_gram(x, x), z, {1.0, 0.01, 1.0});
    EXPECT_LT((predict(rl, xt) - predict_precomputed(rp, block)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Svm, GaussianMatchesPrecomputed) {
    const Matrix x = random_matrix(40, 3, 31);
    const Matrix xt = random_matrix(10, 3, 32);
    const Vector y = labels_from(x, 33);
    const Hyperparams h{5.0, 0.1, 2.0};
    const auto g = train_csvc(x, y, h, KernelKind::gaussian);
    const auto p = train_csvc_precomputed(gaussian_gram(x, 2.0), y, h);
    const Matrix block = gaussian_gram(xt, x, 2.0);
    EXPECT_LT((decision_values(g, xt) - decision_values(p, Matrix(), &block)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Svr, FitsLinearFunction) {
    const Matrix x = random_matrix(80, 3, 41);
    const Vector z = 0.5 * x.col(0) - 0.25 * x.col(1) + Vector::Constant(80, 0.3);
    const auto m = train_esvr(x, z, {100.0, 1e-3, 1.0});
    const Vector pred = predict(m, x);
    EXPECT_LT((pred - z).cwiseAbs().maxCoeff(), 1e-3 + 1e-5);
    EXPECT_LT(nmse(pred, z), 1e-4);
}

TEST(Svm, OneVsOneSeparatesBlobs) {
    Matrix x(30, 2);
    Vector y(30);
    const Matrix noise = random_matrix(30, 2, 51) * 0.3;
    const double cx[3] = {0, 4, 0}, cy[3] = {0, 0, 4};
    for (int i = 0; i < 30; ++i) {
        const int c = i % 3;
        x(i, 0) = cx[c] + noise(i, 0);
        x(i, 1) = cy[c] + noise(i, 1);
        y(i) = 7 + c;
    }
    const auto m = train_csvc(x, y, {10.0, 0.1, 1.0});
    EXPECT_EQ(m.machines.size(), 3u);
    EXPECT_EQ(m.classes, (std::vector<double>{7, 8, 9}));
    EXPECT_DOUBLE_EQ(accuracy(predict(m, x), y), 1.0);
}

TEST(Svm, VoteTieGoesToLowestClass) {
    SvmModel m;
    m.kernel = KernelKind::linear;
    m.n_features = 1;
    m.classes = {0, 1, 2};
    auto machine = [](double pos, double neg, double w, double rho) {
        BinaryModel b;
        b.positive_class = pos;
        b.negative_class = neg;
        b.w = Vector::Constant(1, w);
        b.rho = rho;
        return b;
    };
    // x = 1: 0 beats 1, 1 beats 2, 2 beats 0.
    m.machines = {machine(0, 1, 1, 0), machine(0, 2, -1, 0), machine(1, 2, 1, 0)};
    const Matrix x = Matrix::Constant(1, 1, 1.0);
    const auto votes = vote_counts(m, decision_values(m, x));
    EXPECT_EQ(votes(0, 0), 1);
    EXPECT_EQ(votes(0, 1), 1);
    EXPECT_EQ(votes(0, 2), 1);
    EXPECT_EQ(predict(m, x)(0), 0.0);
}

TEST(Metrics, Values) {
    const Vector t = (Vector(4) << 1, 2, 3, 4).finished();
    EXPECT_DOUBLE_EQ(nmse(Vector::Constant(4, 2.5), t), 1.0);
    EXPECT_DOUBLE_EQ(nmse(t, t), 0.0);
    // population variance 1.25, mse 0.25
    EXPECT_DOUBLE_EQ(nmse((Vector(4) << 1.5, 2.5, 2.5, 3.5).finished(), t), 0.2);
    EXPECT_DOUBLE_EQ(accuracy((Vector(4) << 1, 2, 0, 0).finished(), t), 0.5);
    EXPECT_THROW(nmse(Vector::Ones(3), Vector::Ones(3)), DataError);
    EXPECT_THROW(accuracy(Vector::Ones(3), Vector::Ones(2)), DataError);
}

TEST(GridSearch, TiesPickSmallestC) {
    Matrix x(20, 1);
    Vector y(20);
    for (int i = 0; i < 20; ++i) {
        x(i, 0) = i % 2 ? 10.0 + i : -10.0 - i;
        y(i) = i % 2 ? 1 : -1;
    }
    Grids g;
    g.C = {100.0, 1.0, 0.1};
    const auto r = grid_search(x, y, Task::csvc, KernelKind::linear, g, 3);
    EXPECT_DOUBLE_EQ(r.score, 1.0);
    EXPECT_DOUBLE_EQ(r.best.C, 0.1);
    EXPECT_EQ(r.table.size(), 3u);
}

TEST(GridSearch, SvrPicksLowNmse) {
    const Matrix x = random_matrix(100, 2, 61);
    const Vector z = x.col(0) - 0.5 * x.col(1);
    Grids g;
    g.C = {1e-3, 10.0};
    g.epsilon = {0.5, 1e-3};
    const auto r = grid_search(x, z, Task::esvr, KernelKind::linear, g, 4);
    EXPECT_DOUBLE_EQ(r.best.C, 10.0);
    EXPECT_DOUBLE_EQ(r.best.epsilon, 1e-3);
    EXPECT_LT(r.score, 1e-3);
}

TEST(GridSearch, SplitIsDeterministicPartition) {
    const auto [a, b] = validation_split(50, 0.8, 9);
    EXPECT_EQ(a.size(), 40u);
    EXPECT_EQ(b.size(), 10u);
    std::vector<std::size_t> all(a);
    all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(all[i], i);
    EXPECT_EQ(validation_split(50, 0.8, 9).first, a);
    EXPECT_NE(validation_split(50, 0.8, 10).first, a);
}

TEST(Gram, GaussianIsPsdWithUnitDiagonal) {
    const Matrix x = random_matrix(30, 4, 71);
    const Matrix k = gaussian_gram(x, 0.8);
    EXPECT_LT((k - k.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    for (Eigen::Index i = 0; i < 30; ++i) EXPECT_DOUBLE_EQ(k(i, i), 1.0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(k);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-12);
    EXPECT_NEAR(k(0, 1), std::exp(-0.8 * (x.row(0) - x.row(1)).squaredNorm()), 1e-14);
}

TEST(Model, JsonRoundTrip) {
    const Matrix x = random_matrix(30, 3, 81);
    const Vector y = labels_from(x, 82);
    const Matrix xt = random_matrix(10, 3, 83);
    for (auto kernel : {KernelKind::linear, KernelKind::gaussian}) {
        const auto m = train_csvc(x, y, {1.0, 0.1, 0.5}, kernel);
        const auto back = model_from_json(nlohmann::json::parse(to_json(m).dump()));
        EXPECT_EQ(decision_values(m, xt), decision_values(back, xt));
    }
    EXPECT_THROW(model_from_json(nlohmann::json{{"task", "csvc"}}), ConfigError);
}

TEST(Svm, RejectsBadInput) {
    const Matrix x = random_matrix(5, 2, 91);
    EXPECT_THROW(train_csvc(x, Vector::Ones(5), {}), DataError);
    EXPECT_THROW(train_csvc(x, Vector::Ones(4), {}), ConfigError);
    EXPECT_THROW(train_csvc(x, labels_from(x, 1), {-1.0, 0.1, 1.0}), ConfigError);
    EXPECT_THROW(train_esvr(x, Vector::Ones(5), {1.0, -0.1, 1.0}), ConfigError);
    Matrix asym = Matrix::Identity(5, 5);
    asym(0, 1) = 1.0;
    EXPECT_THROW(train_csvc_precomputed(asym, labels_from(x, 1), {}), ConfigError);
    const auto m = train_csvc(x, labels_from(x, 1), {});
    EXPECT_THROW(decision_values(m, random_matrix(2, 3, 1)), ConfigError);
    const auto p = train_csvc_precomputed(linear_gram(x, x), labels_from(x, 1), {});
    const Matrix bad = Matrix::Zero(2, 4);
    EXPECT_THROW(predict_precomputed(p, bad), ConfigError);
}

TEST(Smo, IterationCapThrows) {
    const Matrix x = random_matrix(50, 3, 95);
    Vector y = labels_from(x, 96);
    y(7) = -y(7);
    SolverOptions opt;
    opt.method = SolverMethod::smo;
    opt.max_iterations = 2;
    EXPECT_THROW(train_csvc(x, y, {10.0, 0.1, 1.0}, KernelKind::linear, opt), NumericalError);
}

TEST(Smo, AutomaticFallsBackWhenCapped) {
    const Matrix x = random_matrix(50, 3, 95);
    Vector y = labels_from(x, 96);
    y(7) = -y(7);
    SolverOptions capped;
    capped.max_iterations = 2;
    SolverOptions smo;
    smo.method = SolverMethod::smo;
    const auto a = train_csvc(x, y, {10.0, 0.1, 1.0}, KernelKind::linear, capped);
    const auto b = train_csvc(x, y, {10.0, 0.1, 1.0}, KernelKind::linear, smo);
    EXPECT_NEAR(a.machines[0].objective, b.machines[0].objective, 1e-5 * std::abs(b.machines[0].objective));
}

class IpmOracle : public ::testing::TestWithParam<std::tuple<int, double>> {};

TEST_P(IpmOracle, DenseAndLowRankMatchEnumeratedQp) {
    const auto [seed, C] = GetParam();
    const Matrix x = random_matrix(7, 3, static_cast<std::uint64_t>(seed));
    Vector y = labels_from(x, static_cast<std::uint64_t>(seed) + 100);
    y(3) = -y(3);
    std::vector<signed char> ys(7);
    Matrix g(7, 3);
    for (Eigen::Index i = 0; i < 7; ++i) {
        ys[static_cast<std::size_t>(i)] = y(i) > 0 ? 1 : -1;
        g.row(i) = y(i) * x.row(i);
    }
    const Matrix q = g * g.transpose();
    const std::vector<double> p(7, -1.0);
    const double oracle = brute_force_dual(q, -Vector::Ones(7), y, C);
    DenseQ dense(q);
    LowRankQ low(g);
    const auto sd = interior_point_solve(dense, p, ys, C);
    const auto sl = interior_point_solve(low, p, ys, C);
    const double tol = 1e-7 * std::max(1.0, std::abs(oracle));
    EXPECT_NEAR(sd.objective, oracle, tol);
    EXPECT_NEAR(sl.objective, oracle, tol);
    double ya = 0.0;
    for (std::size_t t = 0; t < 7; ++t) {
        EXPECT_GE(sl.alpha[t], 0.0);
        EXPECT_LE(sl.alpha[t], C);
        ya += ys[t] * sl.alpha[t];
    }
    EXPECT_NEAR(ya, 0.0, 1e-7 * C);
}

INSTANTIATE_TEST_SUITE_P(Grid, IpmOracle,
                         ::testing::Combine(::testing::Values(1, 2, 3, 4), ::testing::Values(0.1, 1.0, 10.0, 100.0)));

TEST(Ipm, AgreesWithSmoOnLargerProblems) {
    SolverOptions smo, ipm;
    smo.method = SolverMethod::smo;
    smo.tolerance = 1e-8;
    ipm.method = SolverMethod::interior_point;
    const Matrix x = random_matrix(300, 6, 41);
    Vector y = labels_from(x, 42);
    for (Eigen::Index i = 0; i < 300; i += 7) y(i) = -y(i);
    for (double C : {0.1, 10.0}) {
        const auto a = train_csvc(x, y, {C, 0.1, 1.0}, KernelKind::linear, smo);
        const auto b = train_csvc(x, y, {C, 0.1, 1.0}, KernelKind::linear, ipm);
        EXPECT_NEAR(a.machines[0].objective, b.machines[0].objective, 1e-6 * std::abs(a.machines[0].objective));
        EXPECT_LT((a.machines[0].w - b.machines[0].w).norm(), 1e-3 * a.machines[0].w.norm());
        const Vector fa = decision_values(a, x).col(0), fb = decision_values(b, x).col(0);
        EXPECT_LT((fa - fb).cwiseAbs().maxCoeff(), 1e-3);
    }
    const Vector z = (x.col(0) + 0.5 * x.col(1)).array().sin().matrix() + 0.05 * random_matrix(300, 1, 43).col(0);
    for (double C : {0.1, 10.0}) {
        const Hyperparams h{C, 0.01, 1.0};
        const auto a = train_esvr(x, z, h, KernelKind::linear, smo);
        const auto b = train_esvr(x, z, h, KernelKind::linear, ipm);
        EXPECT_NEAR(a.machines[0].objective, b.machines[0].objective, 1e-6 * std::abs(a.machines[0].objective));
        EXPECT_LT((predict(a, x) - predict(b, x)).cwiseAbs().maxCoeff(), 1e-3);
        const auto c = train_esvr(x, z, h, KernelKind::gaussian, ipm);
        const auto d = train_esvr(x, z, h, KernelKind::gaussian, smo);
        EXPECT_NEAR(c.machines[0].objective, d.machines[0].objective, 1e-6 * std::abs(d.machines[0].objective));
    }
}

TEST(Ipm, SolverMethodNames) {
    for (auto m : {SolverMethod::automatic, SolverMethod::smo, SolverMethod::interior_point}) {
        EXPECT_EQ(solver_method_from_string(to_string(m)), m);
    }
    EXPECT_THROW(solver_method_from_string("newton"), ConfigError);
}

}  // namespace
}  // namespace qrc
