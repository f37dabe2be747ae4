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

// Support vector machines trained by SMO with second-order working-set
// selection, on the dual
//
//   min_a  1/2 a^T Q a + p^T a   s.t.  y^T a = 0,  0 <= a_i <= C
//
//   C-SVC:  Q_ij = y_i y_j K_ij,  p = -1
//   e-SVR:  2n variables (a, a*), y = (+1.., -1..),
//           p = (eps - z, eps + z), Q_ij = y_i y_j K_{i mod n, j mod n}
//
// Decision value f(x) = sum_i coef_i K(x_i, x) - rho.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qrc/core_model.hpp"
#include "qrc/rng.hpp"

namespace qrc {

enum class Task { csvc, esvr };
enum class KernelKind { linear, precomputed, gaussian };

inline std::string to_string(Task t) { return t == Task::csvc ? "csvc" : "esvr"; }

inline std::string to_string(KernelKind k) {
    switch (k) {
        case KernelKind::linear: return "linear";
        case KernelKind::precomputed: return "precomputed";
        case KernelKind::gaussian: return "gaussian";
    }
    return "unknown";
}

inline KernelKind kernel_kind_from_string(const std::string& s) {
    if (s == "linear") return KernelKind::linear;
    if (s == "precomputed") return KernelKind::precomputed;
    if (s == "gaussian" || s == "rbf") return KernelKind::gaussian;
    throw ConfigError("unknown kernel '" + s + "'");
}

struct Hyperparams {
    double C = 1.0;
    double epsilon = 0.1;
    double gamma = 1.0;

    void validate() const {
        if (!(C > 0.0) || !(epsilon >= 0.0) || !(gamma > 0.0)) {
            throw ConfigError("hyperparameters must be positive (epsilon nonnegative)");
        }
    }

    friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

enum class SolverMethod { automatic, smo, interior_point };

/// `automatic` uses the interior point for linear kernels with many samples
/// and SMO otherwise, retrying with the interior point when SMO stalls.
struct SolverOptions {
    SolverMethod method = SolverMethod::automatic;
    double tolerance = 1e-5;
    std::size_t max_iterations = 50'000'000;
    bool shrinking = true;
    double ipm_tolerance = 1e-9;
    std::size_t ipm_max_iterations = 200;
};

inline std::string to_string(SolverMethod m) {
    switch (m) {
        case SolverMethod::automatic: return "auto";
        case SolverMethod::smo: return "smo";
        case SolverMethod::interior_point: return "interior-point";
    }
    return "unknown";
}

inline SolverMethod solver_method_from_string(const std::string& s) {
    if (s == "auto") return SolverMethod::automatic;
    if (s == "smo") return SolverMethod::smo;
    if (s == "interior-point" || s == "ipm") return SolverMethod::interior_point;
    throw ConfigError("unknown solver method '" + s + "'");
}

/// Dual solution of one binary problem.
struct DualSolution {
    std::vector<double> alpha;
    double rho = 0.0;
    double objective = 0.0;
    std::size_t iterations = 0;
    double kkt_gap = 0.0;  // m(a) - M(a) at exit
};

namespace detail {

/// rho, objective and KKT gap from the final gradient, libsvm rules.
inline void finish_dual(DualSolution& s, const std::vector<double>& g, const std::vector<double>& p,
                        const std::vector<signed char>& y, double C) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const std::size_t l = g.size();
    double ub = inf;
    double lb = -inf;
    double sum_free = 0.0;
    std::size_t n_free = 0;
    double m_up = -inf, m_low = -inf;
    for (std::size_t t = 0; t < l; ++t) {
        const double a = s.alpha[t];
        const double yg = y[t] * g[t];
        const bool up = y[t] > 0 ? a < C : a > 0.0;
        const bool low = y[t] > 0 ? a > 0.0 : a < C;
        if (up) m_up = std::max(m_up, -yg);
        if (low) m_low = std::max(m_low, yg);
        if (a >= C) {
            if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else if (a <= 0.0) {
            if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    s.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
    s.kkt_gap = std::max(0.0, m_up + m_low);
    double obj = 0.0;
    for (std::size_t t = 0; t < l; ++t) obj += s.alpha[t] * (g[t] + p[t]);
    s.objective = 0.5 * obj;
}

}  // namespace detail

/**
 * SMO for the dual above with libsvm's second-order working-set rule and
 * shrinking. `q(i, j)` returns Q_ij; `diag[i]` = Q_ii.
 */
template <class QFn>
DualSolution smo_solve(std::size_t l, QFn&& q, const std::vector<double>& diag, const std::vector<double>& p,
                       const std::vector<signed char>& y, double C, const SolverOptions& opt = {}) {
    constexpr double tau = 1e-12;
    constexpr double inf = std::numeric_limits<double>::infinity();
    DualSolution s;
    std::vector<double>& alpha = s.alpha;
    alpha.assign(l, 0.0);
    std::vector<double> g(p), g_bar(l, 0.0);
    std::vector<double> qi(l), qj(l);
    std::vector<std::size_t> active(l);
    for (std::size_t t = 0; t < l; ++t) active[t] = t;
    std::size_t n_active = l;
    bool unshrunk = false;

    auto upper = [&](std::size_t t) { return alpha[t] >= C; };
    auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };
    auto in_up = [&](std::size_t t) { return y[t] > 0 ? !upper(t) : !lower(t); };
    auto in_low = [&](std::size_t t) { return y[t] > 0 ? !lower(t) : !upper(t); };

    auto reconstruct = [&] {
        if (n_active == l) return;
        for (std::size_t k = n_active; k < l; ++k) g[active[k]] = g_bar[active[k]] + p[active[k]];
        for (std::size_t a = 0; a < n_active; ++a) {
            const std::size_t j = active[a];
            if (lower(j) || upper(j)) continue;
            for (std::size_t k = n_active; k < l; ++k) g[active[k]] += alpha[j] * q(active[k], j);
        }
        n_active = l;
    };

    auto shrink = [&] {
        double gmax1 = -inf, gmax2 = -inf;
        for (std::size_t k = 0; k < n_active; ++k) {
            const std::size_t t = active[k];
            if (in_up(t)) gmax1 = std::max(gmax1, -y[t] * g[t]);
            if (in_low(t)) gmax2 = std::max(gmax2, y[t] * g[t]);
        }
        if (!unshrunk && gmax1 + gmax2 <= 10.0 * opt.tolerance) {
            unshrunk = true;
            reconstruct();
        }
        auto removable = [&](std::size_t t) {
            if (upper(t)) return y[t] > 0 ? -g[t] > gmax1 : -g[t] > gmax2;
            if (lower(t)) return y[t] > 0 ? g[t] > gmax2 : g[t] > gmax1;
            return false;
        };
        for (std::size_t k = 0; k < n_active;) {
            if (removable(active[k])) {
                std::swap(active[k], active[--n_active]);
            } else {
                ++k;
            }
        }
    };

    const std::size_t shrink_period = std::min<std::size_t>(l, 1000);
    std::size_t countdown = shrink_period + 1;
    std::size_t iter = 0;
    bool full_check = false;  // set after reconstruct: select once over all variables
    for (; iter < opt.max_iterations; ++iter) {
        if (full_check) {
            full_check = false;
        } else if (opt.shrinking && --countdown == 0) {
            countdown = shrink_period;
            shrink();
        }
        double gmax = -inf;
        std::size_t i = l;
        for (std::size_t k = 0; k < n_active; ++k) {
            const std::size_t t = active[k];
            if (in_up(t) && -y[t] * g[t] >= gmax) {
                gmax = -y[t] * g[t];
                i = t;
            }
        }
        double gmax2 = -inf;
        std::size_t j = l;
        double best = inf;
        if (i < l) {
            for (std::size_t k = 0; k < n_active; ++k) qi[k] = q(i, active[k]);
        }
        for (std::size_t k = 0; k < n_active; ++k) {
            const std::size_t t = active[k];
            if (!in_low(t)) continue;
            gmax2 = std::max(gmax2, static_cast<double>(y[t]) * g[t]);
            if (i == l) continue;
            const double b = gmax + y[t] * g[t];
            if (b > 0.0) {
                double a = diag[i] + diag[t] - 2.0 * y[i] * y[t] * qi[k];
                if (a <= 0.0) a = tau;
                const double v = -(b * b) / a;
                if (v <= best) {
                    best = v;
                    j = t;
                }
            }
        }
        s.kkt_gap = gmax + gmax2;
        if (i == l || j == l || gmax + gmax2 < opt.tolerance) {
            if (n_active < l) {
                reconstruct();
                full_check = true;
                countdown = 1;
                continue;
            }
            break;
        }

        const double qij = q(i, j);
        for (std::size_t k = 0; k < n_active; ++k) qj[k] = q(j, active[k]);
        const double ai_old = alpha[i];
        const double aj_old = alpha[j];
        const bool ui = upper(i), uj = upper(j);
        double& ai = alpha[i];
        double& aj = alpha[j];
        if (y[i] != y[j]) {
            double quad = diag[i] + diag[j] + 2.0 * qij;
            if (quad <= 0.0) quad = tau;
            const double delta = (-g[i] - g[j]) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0.0) {
                if (aj < 0.0) {
                    aj = 0.0;
                    ai = diff;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = -diff;
            }
            if (diff > 0.0) {
                if (ai > C) {
                    ai = C;
                    aj = C - diff;
                }
            } else if (aj > C) {
                aj = C;
                ai = C + diff;
            }
        } else {
            double quad = diag[i] + diag[j] - 2.0 * qij;
            if (quad <= 0.0) quad = tau;
            const double delta = (g[i] - g[j]) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > C) {
                if (ai > C) {
                    ai = C;
                    aj = sum - C;
                }
            } else if (aj < 0.0) {
                aj = 0.0;
                ai = sum;
            }
            if (sum > C) {
                if (aj > C) {
                    aj = C;
                    ai = sum - C;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = sum;
            }
        }
        const double dai = ai - ai_old;
        const double daj = aj - aj_old;
        for (std::size_t k = 0; k < n_active; ++k) g[active[k]] += qi[k] * dai + qj[k] * daj;
        if (ui != upper(i)) {
            const double sgn = ui ? -C : C;
            for (std::size_t t = 0; t < l; ++t) g_bar[t] += sgn * q(i, t);
        }
        if (uj != upper(j)) {
            const double sgn = uj ? -C : C;
            for (std::size_t t = 0; t < l; ++t) g_bar[t] += sgn * q(j, t);
        }
    }
    if (iter >= opt.max_iterations) {
        throw NumericalError("SMO did not converge within " + std::to_string(opt.max_iterations) +
                             " iterations (KKT gap " + std::to_string(s.kkt_gap) + ")");
    }
    reconstruct();
    s.iterations = iter;
    detail::finish_dual(s, g, p, y, C);
    return s;
}

/// Linear operator Q (dense or Q = G G^T) with solves against Q + diag(d).
class DenseQ {
public:
    explicit DenseQ(Matrix q) : q_(std::move(q)) {}
    [[nodiscard]] Vector apply(const Vector& v) const { return q_ * v; }
    void factor(const Vector& d) {
        Matrix m = q_;
        m.diagonal() += d.cwiseMax(1e-10);
        llt_.compute(m);
        if (llt_.info() != Eigen::Success) throw NumericalError("interior point: factorization failed");
    }
    [[nodiscard]] Vector solve(const Vector& r) const { return llt_.solve(r); }

private:
    Matrix q_;
    Eigen::LLT<Matrix> llt_;
};

/// Q = G G^T; solves by the Woodbury identity in O(l r^2).
class LowRankQ {
public:
    explicit LowRankQ(Matrix g) : g_(std::move(g)) {}
    [[nodiscard]] Vector apply(const Vector& v) const { return g_ * (g_.transpose() * v); }
    void factor(const Vector& d) {
        dinv_ = d.cwiseMax(1e-10).cwiseInverse();
        Matrix s = g_.transpose() * dinv_.asDiagonal() * g_;
        s.diagonal().array() += 1.0;
        ldlt_.compute(s);
        if (ldlt_.info() != Eigen::Success) throw NumericalError("interior point: factorization failed");
    }
    [[nodiscard]] Vector solve(const Vector& r) const {
        const Vector u = dinv_.cwiseProduct(r);
        return u - dinv_.cwiseProduct(g_ * ldlt_.solve(g_.transpose() * u));
    }

private:
    Matrix g_;
    Vector dinv_;
    Eigen::LDLT<Matrix> ldlt_;
};

/**
 * Primal-dual interior point (Mehrotra predictor-corrector) for the same
 * dual. Alphas within a relative 1e-8 of a bound are snapped to it before
 * rho and the objective are formed as in `smo_solve`.
 */
template <class QOp>
DualSolution interior_point_solve(QOp& q, const std::vector<double>& p_in, const std::vector<signed char>& y_in,
                                  double C, const SolverOptions& opt = {}) {
    const auto l = static_cast<Eigen::Index>(p_in.size());
    const Vector p = Eigen::Map<const Vector>(p_in.data(), l);
    Vector y(l);
    for (Eigen::Index t = 0; t < l; ++t) y(t) = y_in[static_cast<std::size_t>(t)];
    Vector a = Vector::Constant(l, 0.5 * C);
    Vector z = Vector::Ones(l), w = Vector::Ones(l);
    double lambda = 0.0;
    const double pscale = 1.0 + p.cwiseAbs().maxCoeff();
    const double n2 = 2.0 * static_cast<double>(l);

    auto step_to_boundary = [](const Vector& v, const Vector& dv) {
        double s = 1.0;
        for (Eigen::Index t = 0; t < v.size(); ++t) {
            if (dv(t) < 0.0) s = std::min(s, -v(t) / dv(t));
        }
        return s;
    };

    DualSolution sol;
    std::size_t iter = 0;
    Vector best = a;
    double best_merit = std::numeric_limits<double>::infinity();
    bool converged = false;
    for (; iter < opt.ipm_max_iterations; ++iter) {
        const Vector qa = q.apply(a);
        const Vector s = (C - a.array()).matrix();
        const Vector rd = qa + p + lambda * y - z + w;
        const double rp = y.dot(a);
        const double mu = (a.dot(z) + s.dot(w)) / n2;
        const double dscale = pscale + qa.cwiseAbs().maxCoeff();
        const double merit = std::max({rd.cwiseAbs().maxCoeff() / dscale, std::abs(rp) / std::max(1.0, C),
                                       1e3 * mu / (dscale * std::max(1.0, C))}) /
                             opt.ipm_tolerance;
        if (!std::isfinite(merit)) break;
        if (merit < best_merit) {
            best_merit = merit;
            best = a;
        }
        if (merit <= 1.0) {
            converged = true;
            break;
        }
        const Vector d = z.cwiseQuotient(a) + w.cwiseQuotient(s);
        q.factor(d);
        auto solve_refined = [&](const Vector& r) {
            Vector x = q.solve(r);
            const Vector res = r - q.apply(x) - d.cwiseProduct(x);
            x += q.solve(res);
            return x;
        };
        const Vector my = solve_refined(y);
        const double ymy = y.dot(my);
        struct Dir { Vector da, dz, dw; double dl; };
        auto direction = [&](const Vector& raz, const Vector& rsw) {
            const Vector r = -rd + raz.cwiseQuotient(a) - rsw.cwiseQuotient(s);
            const Vector mr = solve_refined(r);
            Dir dir;
            dir.dl = (y.dot(mr) + rp) / ymy;
            dir.da = mr - dir.dl * my;
            dir.dz = (raz - z.cwiseProduct(dir.da)).cwiseQuotient(a);
            dir.dw = (rsw + w.cwiseProduct(dir.da)).cwiseQuotient(s);
            return dir;
        };
        auto max_step = [&](const Dir& dir) {
            const double sp = std::min(step_to_boundary(a, dir.da), step_to_boundary(s, (-dir.da).eval()));
            const double sd = std::min(step_to_boundary(z, dir.dz), step_to_boundary(w, dir.dw));
            return std::min(sp, sd);
        };
        const Vector az = a.cwiseProduct(z), sw = s.cwiseProduct(w);
        const Dir aff = direction(-az, -sw);
        const double sa = max_step(aff);
        const double mu_aff = ((a + sa * aff.da).dot(z + sa * aff.dz) + (s - sa * aff.da).dot(w + sa * aff.dw)) / n2;
        const double sigma = std::pow(mu_aff / mu, 3.0);
        const Vector target = Vector::Constant(l, sigma * mu);
        const Dir dir = direction(target - az - aff.da.cwiseProduct(aff.dz), target - sw + aff.da.cwiseProduct(aff.dw));
        const double st = std::min(1.0, 0.995 * max_step(dir));
        a += st * dir.da;
        z += st * dir.dz;
        w += st * dir.dw;
        lambda += st * dir.dl;
    }
    // Stalls near the optimum from roundoff are accepted within 1e3 x tolerance.
    if (!converged) {
        if (!(best_merit <= 1e3)) {
            throw NumericalError("interior point did not converge within " + std::to_string(iter) + " iterations");
        }
        a = best;
    }
    sol.iterations = iter;
    sol.alpha.resize(static_cast<std::size_t>(l));
    for (Eigen::Index t = 0; t < l; ++t) {
        double v = a(t);
        if (v <= 1e-8 * C) v = 0.0;
        if (v >= C * (1.0 - 1e-8)) v = C;
        a(t) = v;
        sol.alpha[static_cast<std::size_t>(t)] = v;
    }
    const Vector g = q.apply(a) + p;
    const std::vector<double> gv(g.data(), g.data() + l);
    detail::finish_dual(sol, gv, p_in, y_in, C);
    return sol;
}

/// One binary decision function over training rows `support`.
struct BinaryModel {
    double positive_class = 1.0;  // C-SVC: f > 0 votes for this (the larger) class
    double negative_class = -1.0;
    std::vector<std::size_t> support;  // indices into the training set
    std::vector<double> coef;          // y_i a_i (C-SVC) or a_i - a*_i (e-SVR)
    double rho = 0.0;
    double objective = 0.0;
    std::size_t iterations = 0;
    Vector w;  // linear kernel only
};

struct SvmModel {
    Task task = Task::csvc;
    KernelKind kernel = KernelKind::linear;
    Hyperparams hyper;
    std::vector<double> classes;  // ascending, C-SVC only
    std::vector<BinaryModel> machines;
    Matrix support_vectors;   // rows = training samples referenced by any machine (linear/gaussian)
    std::vector<std::size_t> support_rows;  // training index of each support_vectors row
    std::size_t n_train = 0;
    std::size_t n_features = 0;
    std::string layout_hash;
};

inline Matrix linear_gram(const Matrix& a, const Matrix& b) { return a * b.transpose(); }

/// K_nm = exp(-gamma |a_n - b_m|^2).
inline Matrix gaussian_gram(const Matrix& a, const Matrix& b, double gamma) {
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    const Vector na = a.rowwise().squaredNorm();
    const Vector nb = b.rowwise().squaredNorm();
    Matrix d = (-2.0 * a * b.transpose()).colwise() + na;
    d.rowwise() += nb.transpose();
    return (-gamma * d.cwiseMax(0.0)).array().exp().matrix();
}

inline Matrix gaussian_gram(const Matrix& x, double gamma) {
    Matrix k = gaussian_gram(x, x, gamma);
    k.diagonal().setOnes();
    return k;
}

namespace detail {

inline void check_gram(const Matrix& k) {
    if (k.rows() != k.cols()) throw ConfigError("Gram matrix must be square");
    const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
    if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
        throw ConfigError("Gram matrix is not symmetric");
    }
}

/// Dispatch on `opt.method`. `factor`, when given, returns G with Q = G G^T.
template <class QFn>
DualSolution solve_dual(std::size_t l, QFn&& q, const std::vector<double>& diag, const std::vector<double>& p,
                        const std::vector<signed char>& y, double C, const SolverOptions& opt,
                        const std::function<Matrix()>& factor = {}) {
    auto ipm = [&] {
        if (factor) {
            Matrix g = factor();
            if (static_cast<std::size_t>(g.cols()) < l) {
                LowRankQ op(std::move(g));
                return interior_point_solve(op, p, y, C, opt);
            }
            DenseQ op(g * g.transpose());
            return interior_point_solve(op, p, y, C, opt);
        }
        Matrix dense(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(l));
        for (std::size_t j = 0; j < l; ++j) {
            for (std::size_t i = 0; i < l; ++i) dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = q(i, j);
        }
        DenseQ op(std::move(dense));
        return interior_point_solve(op, p, y, C, opt);
    };
    switch (opt.method) {
        case SolverMethod::smo: return smo_solve(l, q, diag, p, y, C, opt);
        case SolverMethod::interior_point: return ipm();
        case SolverMethod::automatic: break;
    }
    if (factor && l >= 256) return ipm();
    SolverOptions capped = opt;
    capped.max_iterations = std::min<std::size_t>(opt.max_iterations, std::max<std::size_t>(100'000, 2000 * l));
    try {
        return smo_solve(l, q, diag, p, y, C, capped);
    } catch (const NumericalError&) {
        return ipm();
    }
}

inline BinaryModel binary_csvc(const Matrix& k, const std::vector<std::size_t>& rows, const std::vector<signed char>& y,
                               double C, const SolverOptions& opt, const Matrix* x = nullptr) {
    const std::size_t l = rows.size();
    std::vector<double> diag(l), p(l, -1.0);
    for (std::size_t t = 0; t < l; ++t) {
        diag[t] = k(static_cast<Eigen::Index>(rows[t]), static_cast<Eigen::Index>(rows[t]));
    }
    auto q = [&](std::size_t a, std::size_t b) {
        return y[a] * y[b] * k(static_cast<Eigen::Index>(rows[b]), static_cast<Eigen::Index>(rows[a]));
    };
    std::function<Matrix()> factor;
    if (x != nullptr) {
        factor = [&] {
            Matrix g(static_cast<Eigen::Index>(l), x->cols());
            for (std::size_t t = 0; t < l; ++t) {
                g.row(static_cast<Eigen::Index>(t)) = y[t] * x->row(static_cast<Eigen::Index>(rows[t]));
            }
            return g;
        };
    }
    const auto sol = solve_dual(l, q, diag, p, y, C, opt, factor);
    BinaryModel m;
    m.rho = sol.rho;
    m.objective = sol.objective;
    m.iterations = sol.iterations;
    for (std::size_t t = 0; t < l; ++t) {
        if (sol.alpha[t] > 0.0) {
            m.support.push_back(rows[t]);
            m.coef.push_back(y[t] * sol.alpha[t]);
        }
    }
    return m;
}

inline BinaryModel binary_esvr(const Matrix& k, const Vector& z, double C, double eps, const SolverOptions& opt,
                               const Matrix* x = nullptr) {
    const auto n = static_cast<std::size_t>(z.size());
    const std::size_t l = 2 * n;
    std::vector<double> diag(l), p(l);
    std::vector<signed char> y(l);
    for (std::size_t t = 0; t < n; ++t) {
        const auto ti = static_cast<Eigen::Index>(t);
        diag[t] = diag[t + n] = k(ti, ti);
        p[t] = eps - z(ti);
        p[t + n] = eps + z(ti);
        y[t] = 1;
        y[t + n] = -1;
    }
    auto q = [&](std::size_t a, std::size_t b) {
        return y[a] * y[b] * k(static_cast<Eigen::Index>(b % n), static_cast<Eigen::Index>(a % n));
    };
    std::function<Matrix()> factor;
    if (x != nullptr) {
        factor = [&] {
            Matrix g(static_cast<Eigen::Index>(l), x->cols());
            g.topRows(x->rows()) = *x;
            g.bottomRows(x->rows()) = -*x;
            return g;
        };
    }
    const auto sol = solve_dual(l, q, diag, p, y, C, opt, factor);
    BinaryModel m;
    m.rho = sol.rho;
    m.objective = sol.objective;
    m.iterations = sol.iterations;
    for (std::size_t t = 0; t < n; ++t) {
        const double beta = sol.alpha[t] - sol.alpha[t + n];
        if (beta != 0.0) {
            m.support.push_back(t);
            m.coef.push_back(beta);
        }
    }
    return m;
}

inline void attach_support(SvmModel& model, const Matrix* x) {
    std::vector<std::size_t> rows;
    for (const auto& m : model.machines) rows.insert(rows.end(), m.support.begin(), m.support.end());
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    model.support_rows = rows;
    if (x == nullptr) return;
    model.support_vectors.resize(static_cast<Eigen::Index>(rows.size()), x->cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        model.support_vectors.row(static_cast<Eigen::Index>(r)) = x->row(static_cast<Eigen::Index>(rows[r]));
    }
    if (model.kernel == KernelKind::linear) {
        for (auto& m : model.machines) {
            m.w = Vector::Zero(x->cols());
            for (std::size_t s = 0; s < m.support.size(); ++s) {
                m.w += m.coef[s] * x->row(static_cast<Eigen::Index>(m.support[s])).transpose();
            }
        }
    }
}

inline SvmModel csvc_from_gram(const Matrix& k, const Vector& y, const Hyperparams& h, const SolverOptions& opt,
                               const Matrix* x = nullptr) {
    check_gram(k);
    if (k.rows() != y.size()) throw ConfigError("label count does not match the Gram matrix");
    h.validate();
    SvmModel model;
    model.task = Task::csvc;
    model.hyper = h;
    model.n_train = static_cast<std::size_t>(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) model.classes.push_back(y(i));
    std::sort(model.classes.begin(), model.classes.end());
    model.classes.erase(std::unique(model.classes.begin(), model.classes.end()), model.classes.end());
    if (model.classes.size() < 2) throw DataError("C-SVC needs at least two classes");
    for (std::size_t a = 0; a < model.classes.size(); ++a) {
        for (std::size_t b = a + 1; b < model.classes.size(); ++b) {
            std::vector<std::size_t> rows;
            std::vector<signed char> yy;
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                if (y(i) == model.classes[a] || y(i) == model.classes[b]) {
                    rows.push_back(static_cast<std::size_t>(i));
                    yy.push_back(y(i) == model.classes[b] ? 1 : -1);
                }
            }
            auto m = binary_csvc(k, rows, yy, h.C, opt, x);
            m.positive_class = model.classes[b];
            m.negative_class = model.classes[a];
            model.machines.push_back(std::move(m));
        }
    }
    return model;
}

}  // namespace detail

inline SvmModel train_csvc(const Matrix& x, const Vector& y, const Hyperparams& h,
                           KernelKind kernel = KernelKind::linear, const SolverOptions& opt = {}) {
    if (kernel == KernelKind::precomputed) throw ConfigError("use train_csvc_precomputed for Gram input");
    const Matrix k = kernel == KernelKind::linear ? linear_gram(x, x) : gaussian_gram(x, h.gamma);
    auto model = detail::csvc_from_gram(k, y, h, opt, kernel == KernelKind::linear ? &x : nullptr);
    model.kernel = kernel;
    model.n_features = static_cast<std::size_t>(x.cols());
    detail::attach_support(model, &x);
    return model;
}

inline SvmModel train_csvc_precomputed(const Matrix& gram, const Vector& y, const Hyperparams& h,
                                       const SolverOptions& opt = {}) {
    auto model = detail::csvc_from_gram(gram, y, h, opt);
    model.kernel = KernelKind::precomputed;
    detail::attach_support(model, nullptr);
    return model;
}

inline SvmModel train_esvr(const Matrix& x, const Vector& z, const Hyperparams& h,
                           KernelKind kernel = KernelKind::linear, const SolverOptions& opt = {}) {
    h.validate();
    if (x.rows() != z.size()) throw ConfigError("target count does not match the samples");
    if (z.size() < 2) throw DataError("e-SVR needs at least two samples");
    if (kernel == KernelKind::precomputed) throw ConfigError("use train_esvr_precomputed for Gram input");
    const Matrix k = kernel == KernelKind::linear ? linear_gram(x, x) : gaussian_gram(x, h.gamma);
    SvmModel model;
    model.task = Task::esvr;
    model.kernel = kernel;
    model.hyper = h;
    model.n_train = static_cast<std::size_t>(z.size());
    model.n_features = static_cast<std::size_t>(x.cols());
    model.machines.push_back(detail::binary_esvr(k, z, h.C, h.epsilon, opt, kernel == KernelKind::linear ? &x : nullptr));
    detail::attach_support(model, &x);
    return model;
}

inline SvmModel train_esvr_precomputed(const Matrix& gram, const Vector& z, const Hyperparams& h,
                                       const SolverOptions& opt = {}) {
    h.validate();
    detail::check_gram(gram);
    if (gram.rows() != z.size()) throw ConfigError("target count does not match the Gram matrix");
    SvmModel model;
    model.task = Task::esvr;
    model.kernel = KernelKind::precomputed;
    model.hyper = h;
    model.n_train = static_cast<std::size_t>(z.size());
    model.machines.push_back(detail::binary_esvr(gram, z, h.C, h.epsilon, opt));
    detail::attach_support(model, nullptr);
    return model;
}

/**
 * Decision values, one column per machine. `kernel_block` is K(test, train)
 * for precomputed models (n_test x n_train) and ignored otherwise.
 */
inline Matrix decision_values(const SvmModel& model, const Matrix& x, const Matrix* kernel_block = nullptr) {
    const std::size_t n_machines = model.machines.size();
    Eigen::Index n = 0;
    Matrix k;  // n x |support_rows| for gaussian
    if (model.kernel == KernelKind::precomputed) {
        if (kernel_block == nullptr || static_cast<std::size_t>(kernel_block->cols()) != model.n_train) {
            throw ConfigError("precomputed model needs a kernel block with one column per training sample");
        }
        n = kernel_block->rows();
    } else {
        if (static_cast<std::size_t>(x.cols()) != model.n_features) {
            throw ConfigError("feature count " + std::to_string(x.cols()) + " does not match the model (" +
                              std::to_string(model.n_features) + ")");
        }
        n = x.rows();
        if (model.kernel == KernelKind::gaussian) k = gaussian_gram(x, model.support_vectors, model.hyper.gamma);
    }
    std::map<std::size_t, Eigen::Index> col_of;
    for (std::size_t r = 0; r < model.support_rows.size(); ++r) col_of[model.support_rows[r]] = static_cast<Eigen::Index>(r);
    Matrix out(n, static_cast<Eigen::Index>(n_machines));
    const Matrix& kmat = model.kernel == KernelKind::precomputed ? *kernel_block : k;
    for (std::size_t m = 0; m < n_machines; ++m) {
        const auto& bm = model.machines[m];
        Vector f;
        if (model.kernel == KernelKind::linear) {
            f = x * bm.w;
        } else {
            f = Vector::Zero(n);
            for (std::size_t s = 0; s < bm.support.size(); ++s) {
                const auto c = model.kernel == KernelKind::precomputed ? static_cast<Eigen::Index>(bm.support[s])
                                                                       : col_of.at(bm.support[s]);
                f += bm.coef[s] * kmat.col(c);
            }
        }
        out.col(static_cast<Eigen::Index>(m)) = f.array() - bm.rho;
    }
    return out;
}

/// One-vs-one votes per sample and class (C-SVC).
inline Eigen::MatrixXi vote_counts(const SvmModel& model, const Matrix& decisions) {
    Eigen::MatrixXi votes = Eigen::MatrixXi::Zero(decisions.rows(), static_cast<Eigen::Index>(model.classes.size()));
    auto idx = [&](double c) {
        return static_cast<Eigen::Index>(std::lower_bound(model.classes.begin(), model.classes.end(), c) -
                                         model.classes.begin());
    };
    for (Eigen::Index r = 0; r < decisions.rows(); ++r) {
        for (std::size_t m = 0; m < model.machines.size(); ++m) {
            const auto& bm = model.machines[m];
            votes(r, idx(decisions(r, static_cast<Eigen::Index>(m)) > 0.0 ? bm.positive_class : bm.negative_class)) += 1;
        }
    }
    return votes;
}

/// Labels (C-SVC, ties to the lowest class) or regression values (e-SVR).
inline Vector predict(const SvmModel& model, const Matrix& x, const Matrix* kernel_block = nullptr) {
    const Matrix d = decision_values(model, x, kernel_block);
    if (model.task == Task::esvr) return d.col(0);
    const auto votes = vote_counts(model, d);
    Vector out(d.rows());
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < votes.cols(); ++c) {
            if (votes(r, c) > votes(r, best)) best = c;
        }
        out(r) = model.classes[static_cast<std::size_t>(best)];
    }
    return out;
}

inline Vector predict_precomputed(const SvmModel& model, const Matrix& kernel_block) {
    return predict(model, Matrix(), &kernel_block);
}

inline double accuracy(const Vector& pred, const Vector& truth) {
    if (pred.size() != truth.size() || pred.size() == 0) throw DataError("accuracy needs equal, non-empty vectors");
    return static_cast<double>((pred.array() == truth.array()).count()) / static_cast<double>(pred.size());
}

/// Mean squared error over the (population) variance of the targets.
inline double nmse(const Vector& pred, const Vector& truth) {
    if (pred.size() != truth.size() || pred.size() == 0) throw DataError("nmse needs equal, non-empty vectors");
    const double var = (truth.array() - truth.mean()).square().mean();
    if (!(var > 0.0)) throw DataError("nmse undefined for constant targets");
    return (pred - truth).squaredNorm() / static_cast<double>(pred.size()) / var;
}

struct Grids {
    std::vector<double> C{1e-2, 1e-1, 1.0, 1e1, 1e2};
    std::vector<double> epsilon{1e-3, 1e-2, 1e-1};
    std::vector<double> gamma{};  // default filled by default_gamma_grid() when a Gaussian kernel is searched

    static std::vector<double> default_gamma_grid() {
        std::vector<double> g;
        for (int e = -6; e <= 6; ++e) g.push_back(std::ldexp(1.0, e));
        return g;
    }
};

struct GridResult {
    Hyperparams best;
    double score = 0.0;  // accuracy (C-SVC) or NMSE (e-SVR) on the validation split
    std::vector<std::pair<Hyperparams, double>> table;
};

/// Train/validation index split of [0, n): a seeded permutation, first 80 % train.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> validation_split(std::size_t n, double train_fraction,
                                                                                    std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    SequentialRng rng(CounterRng(seed).derive(0x76616c));
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    return {std::vector<std::size_t>(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train)),
            std::vector<std::size_t>(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end())};
}

/**
 * Exhaustive search on one train/validation split. C-SVC maximizes
 * accuracy, e-SVR minimizes NMSE; ties go to the smallest C, then epsilon,
 * then gamma.
 */
inline GridResult grid_search(const Matrix& x, const Vector& y, Task task, KernelKind kernel, const Grids& grids,
                              std::uint64_t split_seed, double train_fraction = 0.8, const SolverOptions& opt = {}) {
    if (grids.C.empty()) throw ConfigError("C grid is empty");
    if (kernel == KernelKind::precomputed) throw ConfigError("grid_search works on features");
    std::vector<double> cs = grids.C, eps = grids.epsilon, gs = grids.gamma;
    std::sort(cs.begin(), cs.end());
    std::sort(eps.begin(), eps.end());
    std::sort(gs.begin(), gs.end());
    if (task == Task::csvc || eps.empty()) eps = {Hyperparams{}.epsilon};
    if (kernel != KernelKind::gaussian) gs = {Hyperparams{}.gamma};
    if (gs.empty()) gs = Grids::default_gamma_grid();
    const auto [tr, va] = validation_split(static_cast<std::size_t>(x.rows()), train_fraction, split_seed);
    if (tr.empty() || va.empty()) throw DataError("grid search split leaves an empty part");
    auto rows = [&](const std::vector<std::size_t>& idx) {
        Matrix m(static_cast<Eigen::Index>(idx.size()), x.cols());
        Vector v(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t r = 0; r < idx.size(); ++r) {
            m.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(idx[r]));
            v(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(idx[r]));
        }
        return std::pair{m, v};
    };
    const auto [xt, yt] = rows(tr);
    const auto [xv, yv] = rows(va);
    GridResult out;
    bool have = false;
    for (double c : cs) {
        for (double e : eps) {
            for (double g : gs) {
                const Hyperparams h{c, e, g};
                double score;
                if (task == Task::csvc) {
                    score = accuracy(predict(train_csvc(xt, yt, h, kernel, opt), xv), yv);
                } else {
                    score = nmse(predict(train_esvr(xt, yt, h, kernel, opt), xv), yv);
                }
                out.table.emplace_back(h, score);
                const bool better = task == Task::csvc ? score > out.score : score < out.score;
                if (!have || better) {
                    out.best = h;
                    out.score = score;
                    have = true;
                }
            }
        }
    }
    return out;
}

/// Grid search over C (and epsilon) for a precomputed Gram matrix; same split and tie rules.
inline GridResult grid_search_precomputed(const Matrix& gram, const Vector& y, Task task, const Grids& grids,
                                          std::uint64_t split_seed, double train_fraction = 0.8,
                                          const SolverOptions& opt = {}) {
    if (grids.C.empty()) throw ConfigError("C grid is empty");
    std::vector<double> cs = grids.C, eps = grids.epsilon;
    std::sort(cs.begin(), cs.end());
    std::sort(eps.begin(), eps.end());
    if (task == Task::csvc || eps.empty()) eps = {Hyperparams{}.epsilon};
    const auto [tr, va] = validation_split(static_cast<std::size_t>(gram.rows()), train_fraction, split_seed);
    if (tr.empty() || va.empty()) throw DataError("grid search split leaves an empty part");
    auto block = [&](const std::vector<std::size_t>& r, const std::vector<std::size_t>& c) {
        Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size()));
        for (std::size_t i = 0; i < r.size(); ++i)
            for (std::size_t j = 0; j < c.size(); ++j)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    gram(static_cast<Eigen::Index>(r[i]), static_cast<Eigen::Index>(c[j]));
        return m;
    };
    auto entries = [&](const std::vector<std::size_t>& r) {
        Vector v(static_cast<Eigen::Index>(r.size()));
        for (std::size_t i = 0; i < r.size(); ++i) v(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(r[i]));
        return v;
    };
    const Matrix ktt = block(tr, tr), kvt = block(va, tr);
    const Vector yt = entries(tr), yv = entries(va);
    GridResult out;
    bool have = false;
    for (double c : cs) {
        for (double e : eps) {
            const Hyperparams h{c, e, Hyperparams{}.gamma};
            const double score = task == Task::csvc
                                     ? accuracy(predict_precomputed(train_csvc_precomputed(ktt, yt, h, opt), kvt), yv)
                                     : nmse(predict_precomputed(train_esvr_precomputed(ktt, yt, h, opt), kvt), yv);
            out.table.emplace_back(h, score);
            const bool better = task == Task::csvc ? score > out.score : score < out.score;
            if (!have || better) {
                out.best = h;
                out.score = score;
                have = true;
            }
        }
    }
    return out;
}

inline nlohmann::json to_json(const SvmModel& m) {
    nlohmann::json machines = nlohmann::json::array();
    for (const auto& b : m.machines) {
        nlohmann::json j = {{"positive_class", b.positive_class},
                            {"negative_class", b.negative_class},
                            {"support", b.support},
                            {"coef", b.coef},
                            {"rho", b.rho},
                            {"objective", b.objective}};
        if (b.w.size()) j["w"] = std::vector<double>(b.w.data(), b.w.data() + b.w.size());
        machines.push_back(std::move(j));
    }
    nlohmann::json sv = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.support_vectors.rows(); ++r) {
        const Vector row = m.support_vectors.row(r).transpose();
        sv.push_back(std::vector<double>(row.data(), row.data() + row.size()));
    }
    return {{"task", to_string(m.task)},
            {"kernel", to_string(m.kernel)},
            {"hyperparameters", {{"C", m.hyper.C}, {"epsilon", m.hyper.epsilon}, {"gamma", m.hyper.gamma}}},
            {"classes", m.classes},
            {"machines", machines},
            {"support_rows", m.support_rows},
            {"support_vectors", sv},
            {"n_train", m.n_train},
            {"n_features", m.n_features},
            {"layout_hash", m.layout_hash}};
}

inline SvmModel model_from_json(const nlohmann::json& j) {
    try {
        SvmModel m;
        m.task = j.at("task").get<std::string>() == "csvc" ? Task::csvc : Task::esvr;
        m.kernel = kernel_kind_from_string(j.at("kernel").get<std::string>());
        const auto& h = j.at("hyperparameters");
        m.hyper = {h.at("C").get<double>(), h.at("epsilon").get<double>(), h.at("gamma").get<double>()};
        m.classes = j.at("classes").get<std::vector<double>>();
        for (const auto& b : j.at("machines")) {
            BinaryModel bm;
            bm.positive_class = b.at("positive_class").get<double>();
            bm.negative_class = b.at("negative_class").get<double>();
            bm.support = b.at("support").get<std::vector<std::size_t>>();
            bm.coef = b.at("coef").get<std::vector<double>>();
            bm.rho = b.at("rho").get<double>();
            bm.objective = b.value("objective", 0.0);
            if (b.contains("w")) {
                const auto w = b["w"].get<std::vector<double>>();
                bm.w = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
            }
            m.machines.push_back(std::move(bm));
        }
        m.support_rows = j.at("support_rows").get<std::vector<std::size_t>>();
        const auto sv = j.at("support_vectors").get<std::vector<std::vector<double>>>();
        m.n_features = j.at("n_features").get<std::size_t>();
        m.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), static_cast<Eigen::Index>(m.n_features));
        for (std::size_t r = 0; r < sv.size(); ++r) {
            if (sv[r].size() != m.n_features) throw ConfigError("support vector width mismatch");
            for (std::size_t c = 0; c < sv[r].size(); ++c) {
                m.support_vectors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = sv[r][c];
            }
        }
        m.n_train = j.at("n_train").get<std::size_t>();
        m.layout_hash = j.value("layout_hash", std::string());
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed model JSON: ") + e.what());
    }
}

}  // namespace qrc
