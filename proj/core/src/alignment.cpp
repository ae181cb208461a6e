#include "unweaver/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "unweaver/errors.hpp"

namespace unweaver {

AlignmentProblem AlignmentProblem::make(BinaryMatrix routing, Matrix embeddings, Vector query,
                                        Vector budget) {
    if (embeddings.rows() != query.size()) {
        throw DimensionMismatch("query has dimension " + std::to_string(query.size()) +
                                ", embeddings have " + std::to_string(embeddings.rows()));
    }
    AlignmentProblem p;
    p.gamma = matvec_transposed(embeddings, query);
    p.routing = std::move(routing);
    p.embeddings = std::move(embeddings);
    p.query = std::move(query);
    p.budget = std::move(budget);
    p.validate();
    return p;
}

void AlignmentProblem::validate() const {
    const auto k = num_chunks();
    const auto s = num_classes();
    if (embeddings.cols() != s) {
        throw DimensionMismatch("embeddings have " + std::to_string(embeddings.cols()) +
                                " columns for " + std::to_string(s) + " classes");
    }
    if (query.size() != embeddings.rows()) {
        throw DimensionMismatch("query dimension differs from embedding dimension");
    }
    if (budget.size() != k) {
        throw DimensionMismatch("budget has " + std::to_string(budget.size()) + " entries for " +
                                std::to_string(k) + " chunks");
    }
    if (gamma.size() != s) {
        throw DimensionMismatch("gamma has wrong length");
    }
    for (const double f : budget) {
        if (!std::isfinite(f) || f <= 0.0) {
            throw InvalidArgument("budget entries must be finite and positive");
        }
    }
    for (const double g : gamma) {
        if (!std::isfinite(g)) {
            throw InvalidArgument("gamma entries must be finite");
        }
    }
    for (std::size_t c = 0; c < s; ++c) {
        if (routing.col_sum(c) == 0) {
            throw InvalidArgument("class " + std::to_string(c) + " is not routed to any chunk");
        }
    }
}

AlignmentSolution solve_utility(const AlignmentProblem& problem, const UtilityOptions& options) {
    problem.validate();
    if (options.eps <= 0.0 || options.t_max < 1 || options.step0 <= 0.0 ||
        options.lambda_min <= 0.0) {
        throw InvalidArgument("invalid utility solver options");
    }
    const auto& c = problem.routing;
    const std::size_t k_count = problem.num_chunks();
    const std::size_t s_count = problem.num_classes();

    // Classes with non-positive relevance receive no mass.
    Vector weight(s_count, 0.0);
    std::vector<bool> participates(s_count, false);
    for (std::size_t s = 0; s < s_count; ++s) {
        if (problem.gamma[s] > 0.0) {
            participates[s] = true;
            weight[s] = std::max(problem.gamma[s], options.gamma_min);
        }
    }
    // A row without participating classes carries a vacuous constraint.
    std::vector<bool> active(k_count, false);
    std::size_t active_count = 0;
    for (std::size_t k = 0; k < k_count; ++k) {
        for (std::size_t s = 0; s < s_count && !active[k]; ++s) {
            active[k] = participates[s] && c.at(k, s);
        }
        active_count += active[k] ? 1 : 0;
    }

    AlignmentSolution best;
    best.x.assign(s_count, 0.0);
    best.lambda.assign(k_count, 0.0);
    if (active_count == 0) {
        return best;
    }

    Vector lambda(k_count, 0.0);
    for (std::size_t k = 0; k < k_count; ++k) {
        if (active[k]) {
            lambda[k] = 1.0 / static_cast<double>(k_count);
        }
    }
    Vector x(s_count, 0.0);
    Vector rho(k_count, 0.0);
    double best_residual = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> free_rows;

    for (int t = 1; t <= options.t_max; ++t) {
        // Primal: x_s = γ_s / C(:,s)ᵀλ.
        for (std::size_t s = 0; s < s_count; ++s) {
            if (!participates[s]) {
                continue;
            }
            double price = 0.0;
            for (std::size_t k = 0; k < k_count; ++k) {
                if (c.at(k, s)) {
                    price += lambda[k];
                }
            }
            x[s] = weight[s] / price;
        }

        double residual = 0.0;
        for (std::size_t k = 0; k < k_count; ++k) {
            if (!active[k]) {
                continue;
            }
            double load = 0.0;
            for (std::size_t s = 0; s < s_count; ++s) {
                if (c.at(k, s)) {
                    load += x[s];
                }
            }
            rho[k] = load;
            const double gap = load - problem.budget[k];
            // A price resting on its floor only needs the constraint to hold.
            residual = std::max(residual, lambda[k] > options.lambda_min ? std::abs(gap)
                                                                          : std::max(gap, 0.0));
        }

        if (residual < best_residual) {
            best_residual = residual;
            best.x = x;
            best.lambda = lambda;
            best.iterations = t;
            best.feasibility_residual = residual;
        }
        if (residual < options.eps) {
            best.status = SolveStatus::kConverged;
            break;
        }
        best.status = SolveStatus::kMaxIter;

        // Dual: projected price step with diminishing step size.
        const double step = options.step0 / std::sqrt(static_cast<double>(t));
        if (options.price_update == PriceUpdate::kGradient) {
            for (std::size_t k = 0; k < k_count; ++k) {
                if (active[k]) {
                    lambda[k] = std::max(options.lambda_min,
                                         lambda[k] + step * (rho[k] - problem.budget[k]));
                }
            }
            continue;
        }

        // Newton direction H⁻¹(ρ − f) over the rows not pinned at the floor,
        // with H = C diag(x²/γ) Cᵀ the Hessian of the dual.
        free_rows.clear();
        for (std::size_t k = 0; k < k_count; ++k) {
            if (active[k] &&
                (lambda[k] > options.lambda_min || rho[k] > problem.budget[k])) {
                free_rows.push_back(k);
            }
        }
        const std::size_t m = free_rows.size();
        Matrix hessian(m, m);
        Vector gap(m);
        for (std::size_t i = 0; i < m; ++i) {
            const auto ki = free_rows[i];
            gap[i] = rho[ki] - problem.budget[ki];
            for (std::size_t j = i; j < m; ++j) {
                const auto kj = free_rows[j];
                double h = 0.0;
                for (std::size_t s = 0; s < s_count; ++s) {
                    if (participates[s] && c.at(ki, s) && c.at(kj, s)) {
                        h += x[s] * x[s] / weight[s];
                    }
                }
                hessian(i, j) = h;
                hessian(j, i) = h;
            }
        }
        // Rows with identical class sets make H singular; a relative ridge
        // keeps the direction defined without moving the fixed point.
        for (std::size_t i = 0; i < m; ++i) {
            hessian(i, i) *= 1.0 + 1e-10;
        }
        Vector direction;
        try {
            direction = LuDecomposition(hessian, 1e-14).solve(gap);
        } catch (const SingularSystem&) {
            direction.resize(m);
            for (std::size_t i = 0; i < m; ++i) {
                direction[i] = gap[i] / hessian(i, i);
            }
        }
        for (std::size_t i = 0; i < m; ++i) {
            const auto k = free_rows[i];
            lambda[k] = std::max(options.lambda_min, lambda[k] + step * direction[i]);
        }
    }
    if (best.status == SolveStatus::kMaxIter) {
        best.iterations = options.t_max;
    }

    double stationarity = 0.0;
    for (std::size_t s = 0; s < s_count; ++s) {
        if (!participates[s] || best.x[s] <= 0.0) {
            continue;
        }
        double price = 0.0;
        for (std::size_t k = 0; k < k_count; ++k) {
            if (c.at(k, s)) {
                price += best.lambda[k];
            }
        }
        stationarity = std::max(stationarity, std::abs(weight[s] / best.x[s] - price));
    }
    best.kkt_residual = stationarity;
    return best;
}

AlignmentSolution solve_cls(const AlignmentProblem& problem, const ClsOptions& options) {
    problem.validate();
    const std::size_t k_count = problem.num_chunks();
    const std::size_t s_count = problem.num_classes();
    const std::size_t n = k_count + s_count;
    if (n > options.max_dim) {
        throw InvalidArgument("KKT system of size " + std::to_string(n) + " exceeds max_dim " +
                              std::to_string(options.max_dim));
    }

    const Matrix vtv = gram(problem.embeddings);
    Matrix kkt(n, n);
    for (std::size_t i = 0; i < s_count; ++i) {
        for (std::size_t j = 0; j < s_count; ++j) {
            kkt(i, j) = vtv(i, j);
        }
    }
    for (std::size_t k = 0; k < k_count; ++k) {
        for (std::size_t s = 0; s < s_count; ++s) {
            const double v = problem.routing.at(k, s) ? 1.0 : 0.0;
            kkt(s, s_count + k) = v;  // Cᵀ
            kkt(s_count + k, s) = v;  // C
        }
    }
    Vector rhs(n, 0.0);
    const Vector vtq = matvec_transposed(problem.embeddings, problem.query);
    std::copy(vtq.begin(), vtq.end(), rhs.begin());
    std::copy(problem.budget.begin(), problem.budget.end(),
              rhs.begin() + static_cast<std::ptrdiff_t>(s_count));

    const Vector sol = lu_solve(kkt, rhs);

    AlignmentSolution out;
    out.x.assign(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(s_count));
    out.lambda.assign(sol.begin() + static_cast<std::ptrdiff_t>(s_count), sol.end());
    out.iterations = 1;

    const Matrix c = problem.routing.to_matrix();
    out.feasibility_residual = norm_inf(subtract(matvec(c, out.x), problem.budget));
    Vector stationarity = matvec(vtv, out.x);
    const Vector ct_lambda = matvec_transposed(c, out.lambda);
    for (std::size_t s = 0; s < s_count; ++s) {
        stationarity[s] += ct_lambda[s] - vtq[s];
    }
    out.kkt_residual = norm_inf(stationarity);
    out.status = out.feasibility_residual < options.tolerance && out.kkt_residual < options.tolerance
                     ? SolveStatus::kConverged
                     : SolveStatus::kSingular;
    return out;
}

namespace {

// Quantized so that solver noise below 1e-9 does not reorder ties.
double rank_key(double v) { return std::round(v * 1e9); }

}  // namespace

RetrievalResult aligned_retrieve(const Index& index, std::span<const double> query,
                                 AlignMethod method, const BudgetPolicy& budget, int k_prime,
                                 std::size_t candidate_pool) {
    if (k_prime < 1) {
        throw InvalidArgument("k_prime must be >= 1");
    }
    RetrievalResult result;
    if (index.num_classes() == 0 || index.num_chunks() == 0) {
        result.status = RetrievalStatus::kNoCandidates;
        return result;
    }
    if (query.size() != index.dim()) {
        throw DimensionMismatch("query has dimension " + std::to_string(query.size()) +
                                ", index has " + std::to_string(index.dim()));
    }

    // Columns taking part in the alignment, ascending class id.
    std::vector<std::size_t> pool;
    if (candidate_pool == 0 || candidate_pool >= index.num_classes()) {
        pool.resize(index.num_classes());
        std::iota(pool.begin(), pool.end(), 0);
    } else {
        const SimilarityConfig sim{Metric::kCosine, static_cast<int>(candidate_pool)};
        for (const auto& sc : top_k_classes(index.embeddings, query, sim)) {
            pool.push_back(static_cast<std::size_t>(sc.class_id));
        }
        std::sort(pool.begin(), pool.end());
    }
    // Rows incident to the pool.
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k < index.num_chunks(); ++k) {
        if (std::any_of(pool.begin(), pool.end(),
                        [&](std::size_t s) { return index.incidence.at(k, s); })) {
            rows.push_back(k);
        }
    }

    BinaryMatrix routing(rows.size(), pool.size());
    Matrix embeddings(index.dim(), pool.size());
    for (std::size_t j = 0; j < pool.size(); ++j) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            routing.set(i, j, index.incidence.at(rows[i], pool[j]));
        }
        for (std::size_t p = 0; p < index.dim(); ++p) {
            embeddings(p, j) = index.embeddings(p, pool[j]);
        }
    }
    const auto problem =
        AlignmentProblem::make(std::move(routing), std::move(embeddings),
                               Vector(query.begin(), query.end()),
                               Vector(rows.size(), budget.per_chunk));

    Vector strength = problem.gamma;
    if (method == AlignMethod::kUtility) {
        const auto sol = solve_utility(problem);
        if (sol.status == SolveStatus::kConverged) {
            strength = sol.x;
        } else {
            result.warnings.push_back(
                "utility alignment did not converge; ranking by relevance only");
        }
    } else if (method == AlignMethod::kCls) {
        const auto sol = solve_cls(problem);
        if (sol.status != SolveStatus::kConverged) {
            throw SingularSystem("constrained least squares solution failed its residual checks");
        }
        strength = sol.x;
    }

    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ka = rank_key(strength[a]);
        const double kb = rank_key(strength[b]);
        if (ka != kb) {
            return ka > kb;
        }
        return rank_key(problem.gamma[a]) > rank_key(problem.gamma[b]);
    });
    const std::size_t keep = std::min(pool.size(), static_cast<std::size_t>(k_prime));
    if (static_cast<std::size_t>(k_prime) > pool.size()) {
        result.warnings.push_back("k_prime clamped to the number of candidate classes (" +
                                  std::to_string(pool.size()) + ")");
    }
    std::vector<double> class_strength(index.num_classes(), 0.0);
    for (std::size_t i = 0; i < keep; ++i) {
        const auto s = pool[order[i]];
        class_strength[s] = strength[order[i]];
        result.selected_classes.push_back({static_cast<ClassId>(s), strength[order[i]]});
        result.ballot_class_ids.push_back(static_cast<ClassId>(s));
    }
    std::sort(result.ballot_class_ids.begin(), result.ballot_class_ids.end());
    result.filtered_ballots = filter_ballots(index.incidence, result.ballot_class_ids);

    std::vector<std::pair<ChunkId, double>> chunks;
    for (std::size_t k = 0; k < index.num_chunks(); ++k) {
        bool hit = false;
        double mass = 0.0;
        for (const auto s : result.ballot_class_ids) {
            if (index.incidence.at(k, static_cast<std::size_t>(s))) {
                hit = true;
                mass += class_strength[static_cast<std::size_t>(s)];
            }
        }
        if (hit) {
            chunks.emplace_back(static_cast<ChunkId>(k), mass);
        }
    }
    std::stable_sort(chunks.begin(), chunks.end(), [](const auto& a, const auto& b) {
        return rank_key(a.second) > rank_key(b.second);
    });
    for (const auto& [id, mass] : chunks) {
        result.elected_chunks.push_back(id);
        result.rule_scores.push_back(mass);
    }
    return result;
}

RetrievalResult aligned_retrieve(const Index& index, std::string_view query_text,
                                 AlignMethod method, const BudgetPolicy& budget, int k_prime,
                                 Gateway* gateway, std::size_t candidate_pool) {
    if (index.num_classes() == 0) {
        RetrievalResult empty;
        empty.status = RetrievalStatus::kNoCandidates;
        return empty;
    }
    const auto q = embed_query(index, query_text, gateway);
    return aligned_retrieve(index, q, method, budget, k_prime, candidate_pool);
}

}  // namespace unweaver
