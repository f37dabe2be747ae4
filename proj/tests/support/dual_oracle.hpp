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

// Brute-force SVM dual oracle shared by the unit and acceptance tests.

#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "qrc/learners.hpp"

namespace qrc::testing_support {

// Minimum of 1/2 a^T Q a + p^T a over y^T a = 0, 0 <= a <= C by enumerating
// every (lower, upper, free) assignment and solving the KKT system on the
// free set.
inline double brute_force_dual(const Matrix& q, const Vector& p, const Vector& y, double C) {
    const auto l = q.rows();
    std::size_t combos = 1;
    for (Eigen::Index i = 0; i < l; ++i) combos *= 3;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t code = 0; code < combos; ++code) {
        std::vector<int> state(static_cast<std::size_t>(l));
        std::size_t c = code;
        std::vector<Eigen::Index> free;
        Vector a = Vector::Zero(l);
        for (Eigen::Index i = 0; i < l; ++i) {
            state[static_cast<std::size_t>(i)] = static_cast<int>(c % 3);
            c /= 3;
            if (state[static_cast<std::size_t>(i)] == 1) a(i) = C;
            if (state[static_cast<std::size_t>(i)] == 2) free.push_back(i);
        }
        const auto f = static_cast<Eigen::Index>(free.size());
        if (f > 0) {
            Matrix kkt = Matrix::Zero(f + 1, f + 1);
            Vector rhs(f + 1);
            for (Eigen::Index r = 0; r < f; ++r) {
                for (Eigen::Index s = 0; s < f; ++s) kkt(r, s) = q(free[r], free[s]);
                kkt(r, f) = y(free[r]);
                kkt(f, r) = y(free[r]);
                rhs(r) = -p(free[r]) - q.row(free[r]).dot(a);
            }
            rhs(f) = -y.dot(a);
            const Vector sol = kkt.completeOrthogonalDecomposition().solve(rhs);
            if ((kkt * sol - rhs).norm() > 1e-9) continue;
            for (Eigen::Index r = 0; r < f; ++r) a(free[r]) = sol(r);
        }
        if (std::abs(y.dot(a)) > 1e-9) continue;
        if ((a.array() < -1e-12).any() || (a.array() > C + 1e-12).any()) continue;
        best = std::min(best, 0.5 * a.dot(q * a) + p.dot(a));
    }
    return best;
}

}  // namespace qrc::testing_support
