#pragma once

// Reference implementations used only by tests. They are deliberately naive
// and share no code with the library beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "unweaver/index.hpp"
#include "unweaver/linalg.hpp"

namespace unweaver::oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense to_dense(const Matrix& m) {
    Dense d(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            d[i][j] = m(i, j);
        }
    }
    return d;
}

// Determinant by cofactor expansion; fine for n <= 5.
inline double determinant(const Dense& a) {
    const auto n = a.size();
    if (n == 1) return a[0][0];
    if (n == 2) return a[0][0] * a[1][1] - a[0][1] * a[1][0];
    double det = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        Dense minor;
        for (std::size_t i = 1; i < n; ++i) {
            std::vector<double> row;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != c) row.push_back(a[i][j]);
            }
            minor.push_back(row);
        }
        det += (c % 2 == 0 ? 1.0 : -1.0) * a[0][c] * determinant(minor);
    }
    return det;
}

inline std::vector<double> cramer_solve(const Dense& a, const std::vector<double>& b) {
    const double det = determinant(a);
    std::vector<double> x(a.size());
    for (std::size_t c = 0; c < a.size(); ++c) {
        Dense ac = a;
        for (std::size_t i = 0; i < a.size(); ++i) ac[i][c] = b[i];
        x[c] = determinant(ac) / det;
    }
    return x;
}

// Gauss-Jordan with full pivoting on a copy; returns the solution of a x = b.
inline std::vector<double> gauss_jordan(Dense a, std::vector<double> b) {
    const auto n = a.size();
    std::vector<std::size_t> col_of(n);
    std::iota(col_of.begin(), col_of.end(), 0);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t pr = k, pc = k;
        for (std::size_t i = k; i < n; ++i) {
            for (std::size_t j = k; j < n; ++j) {
                if (std::abs(a[i][j]) > std::abs(a[pr][pc])) {
                    pr = i;
                    pc = j;
                }
            }
        }
        std::swap(a[k], a[pr]);
        std::swap(b[k], b[pr]);
        for (auto& row : a) std::swap(row[k], row[pc]);
        std::swap(col_of[k], col_of[pc]);
        const double p = a[k][k];
        for (std::size_t j = 0; j < n; ++j) a[k][j] /= p;
        b[k] /= p;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == k || a[i][k] == 0.0) continue;
            const double f = a[i][k];
            for (std::size_t j = 0; j < n; ++j) a[i][j] -= f * a[k][j];
            b[i] -= f * b[k];
        }
    }
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) x[col_of[k]] = b[k];
    return x;
}

inline std::size_t rank(Dense a, double tol = 1e-9) {
    std::size_t r = 0;
    const auto rows = a.size();
    const auto cols = rows == 0 ? 0 : a[0].size();
    for (std::size_t c = 0; c < cols && r < rows; ++c) {
        std::size_t best = r;
        for (std::size_t i = r; i < rows; ++i) {
            if (std::abs(a[i][c]) > std::abs(a[best][c])) best = i;
        }
        if (std::abs(a[best][c]) < tol) continue;
        std::swap(a[r], a[best]);
        for (std::size_t i = r + 1; i < rows; ++i) {
            const double f = a[i][c] / a[r][c];
            for (std::size_t j = c; j < cols; ++j) a[i][j] -= f * a[r][j];
        }
        ++r;
    }
    return r;
}

// Solution of min ½‖Vx − q‖² s.t. Cx = f from the KKT system assembled here.
struct KktSolution {
    std::vector<double> x;
    std::vector<double> lambda;
};

inline KktSolution cls_oracle(const Dense& C, const Dense& V, const std::vector<double>& q,
                              const std::vector<double>& f) {
    const auto K = C.size();
    const auto S = V[0].size();
    const auto P = V.size();
    Dense a(S + K, std::vector<double>(S + K, 0.0));
    std::vector<double> b(S + K, 0.0);
    for (std::size_t i = 0; i < S; ++i) {
        for (std::size_t j = 0; j < S; ++j) {
            for (std::size_t p = 0; p < P; ++p) a[i][j] += V[p][i] * V[p][j];
        }
        for (std::size_t p = 0; p < P; ++p) b[i] += V[p][i] * q[p];
        for (std::size_t k = 0; k < K; ++k) {
            a[i][S + k] = C[k][i];
            a[S + k][i] = C[k][i];
        }
    }
    for (std::size_t k = 0; k < K; ++k) b[S + k] = f[k];
    const auto z = gauss_jordan(a, b);
    return {{z.begin(), z.begin() + static_cast<std::ptrdiff_t>(S)},
            {z.begin() + static_cast<std::ptrdiff_t>(S), z.end()}};
}

// Minimizes the dual of max Σ γ_s log x_s s.t. Cx = f,
//   D(λ) = Σ γ_s log(γ_s / c_sᵀλ) − Σ γ_s + λᵀf,   λ ≥ 0,
// by projected gradient with Armijo backtracking. Returns x(λ).
struct DualResult {
    std::vector<double> x;
    std::vector<double> lambda;
    bool converged = false;
};

inline DualResult utility_oracle(const Dense& C, const std::vector<double>& gamma,
                                 const std::vector<double>& f, double tol = 1e-10,
                                 int max_iter = 200000) {
    const auto K = C.size();
    const auto S = gamma.size();
    auto prices = [&](const std::vector<double>& lam, std::size_t s) {
        double p = 0.0;
        for (std::size_t k = 0; k < K; ++k) p += C[k][s] * lam[k];
        return p;
    };
    auto value = [&](const std::vector<double>& lam) {
        double v = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            const double p = prices(lam, s);
            if (p <= 0.0) return std::numeric_limits<double>::infinity();
            v += gamma[s] * std::log(gamma[s] / p) - gamma[s];
        }
        for (std::size_t k = 0; k < K; ++k) v += lam[k] * f[k];
        return v;
    };
    auto gradient = [&](const std::vector<double>& lam) {
        std::vector<double> g(f);
        for (std::size_t s = 0; s < S; ++s) {
            const double xs = gamma[s] / prices(lam, s);
            for (std::size_t k = 0; k < K; ++k) g[k] -= C[k][s] * xs;
        }
        return g;
    };

    // Spectral projected gradient: BB step lengths, nonmonotone Armijo over the last 10 values.
    DualResult out;
    std::vector<double> lam(K, 1.0);
    auto g = gradient(lam);
    std::vector<double> recent{value(lam)};
    double alpha = 1.0;
    for (int it = 0; it < max_iter; ++it) {
        double pg = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            pg = std::max(pg, std::abs(lam[k] - std::max(0.0, lam[k] - g[k])));
        }
        if (pg < tol) {
            out.converged = true;
            break;
        }
        std::vector<double> d(K);
        double slope = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            d[k] = std::max(0.0, lam[k] - alpha * g[k]) - lam[k];
            slope += g[k] * d[k];
        }
        const double ref = *std::max_element(recent.begin(), recent.end());
        std::vector<double> next(K);
        double t = 1.0, v = 0.0;
        while (true) {
            for (std::size_t k = 0; k < K; ++k) next[k] = lam[k] + t * d[k];
            v = value(next);
            if (v <= ref + 1e-4 * t * slope || t < 1e-20) break;
            t *= 0.5;
        }
        const auto g_next = gradient(next);
        double ss = 0.0, sy = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double sk = next[k] - lam[k];
            ss += sk * sk;
            sy += sk * (g_next[k] - g[k]);
        }
        alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e12) : 1e6;
        lam = next;
        g = g_next;
        recent.push_back(v);
        if (recent.size() > 10) recent.erase(recent.begin());
    }
    out.lambda = lam;
    out.x.resize(S);
    for (std::size_t s = 0; s < S; ++s) out.x[s] = gamma[s] / prices(lam, s);
    return out;
}

// Exhaustive committee search. Scores are kept as integers: PAV scaled by
// lcm(1..n) so sums of harmonic numbers are exact.
inline std::int64_t lcm_upto(std::size_t n) {
    std::int64_t l = 1;
    for (std::size_t i = 2; i <= n; ++i) l = std::lcm(l, static_cast<std::int64_t>(i));
    return l;
}

enum class Objective { kPav, kCc };

inline std::int64_t scaled_score(const BinaryMatrix& ballots,
                                 const std::vector<std::size_t>& committee, Objective obj,
                                 std::int64_t scale) {
    std::int64_t total = 0;
    for (std::size_t v = 0; v < ballots.rows(); ++v) {
        std::int64_t hits = 0;
        for (auto c : committee) hits += ballots.at(v, c) ? 1 : 0;
        if (obj == Objective::kCc) {
            total += hits > 0 ? scale : 0;
        } else {
            for (std::int64_t j = 1; j <= hits; ++j) total += scale / j;
        }
    }
    return total;
}

inline std::int64_t best_scaled_score(const BinaryMatrix& ballots, std::size_t r, Objective obj,
                                      std::int64_t scale) {
    const auto n = ballots.cols();
    std::int64_t best = -1;
    std::vector<std::size_t> pick;
    std::function<void(std::size_t)> rec = [&](std::size_t from) {
        if (pick.size() == r) {
            best = std::max(best, scaled_score(ballots, pick, obj, scale));
            return;
        }
        for (std::size_t c = from; c < n; ++c) {
            pick.push_back(c);
            rec(c + 1);
            pick.pop_back();
        }
    };
    rec(0);
    return best;
}

inline BinaryMatrix random_ballots(std::mt19937_64& rng, std::size_t voters,
                                   std::size_t candidates, double p = 0.4) {
    std::bernoulli_distribution coin(p);
    BinaryMatrix b(voters, candidates);
    for (std::size_t v = 0; v < voters; ++v) {
        for (std::size_t c = 0; c < candidates; ++c) b.set(v, c, coin(rng));
    }
    return b;
}

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                            double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = u(rng);
    }
    return m;
}

inline Vector random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0,
                            double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vector v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

// Random K×S routing matrix with no empty row or column.
inline BinaryMatrix random_routing(std::mt19937_64& rng, std::size_t K, std::size_t S) {
    BinaryMatrix c(K, S);
    std::bernoulli_distribution coin(0.5);
    std::uniform_int_distribution<std::size_t> pick_row(0, K - 1), pick_col(0, S - 1);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t k = 0; k < K; ++k) c.set(k, s, coin(rng));
        if (c.col_sum(s) == 0) c.set(pick_row(rng), s);
    }
    for (std::size_t k = 0; k < K; ++k) {
        if (c.row_sum(k) == 0) c.set(k, pick_col(rng));
    }
    return c;
}

inline Dense dense(const BinaryMatrix& b) {
    Dense d(b.rows(), std::vector<double>(b.cols()));
    for (std::size_t i = 0; i < b.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) d[i][j] = b.at(i, j) ? 1.0 : 0.0;
    }
    return d;
}

// A utility instance whose optimum is known: pick x* and λ* > 0, then set
// γ_s = x*_s · c_sᵀλ* and f = C x*, so every constraint is active.
struct PlantedUtility {
    BinaryMatrix routing;
    Vector x_star;
    Vector lambda_star;
    Vector gamma;
    Vector budget;
};

inline PlantedUtility planted_utility(std::mt19937_64& rng, std::size_t K, std::size_t S) {
    PlantedUtility p;
    p.routing = random_routing(rng, K, S);
    p.x_star = random_vector(rng, S, 0.2, 1.0);
    p.lambda_star = random_vector(rng, K, 0.5, 2.0);
    p.gamma.assign(S, 0.0);
    p.budget.assign(K, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
        double price = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            if (p.routing.at(k, s)) {
                price += p.lambda_star[k];
                p.budget[k] += p.x_star[s];
            }
        }
        p.gamma[s] = p.x_star[s] * price;
    }
    return p;
}

}  // namespace unweaver::oracle
