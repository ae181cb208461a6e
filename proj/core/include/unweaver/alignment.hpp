#pragma once

#include <cstddef>
#include <string_view>

#include "unweaver/index.hpp"
#include "unweaver/linalg.hpp"
#include "unweaver/retrieval.hpp"

namespace unweaver {

/// Retrieval alignment data: routing matrix C (K×S), embeddings V (P×S),
/// query q (P), per-chunk budgets f (K) and relevance γ = Vᵀq (S).
struct AlignmentProblem {
    BinaryMatrix routing;
    Matrix embeddings;
    Vector query;
    Vector budget;
    Vector gamma;

    std::size_t num_chunks() const noexcept { return routing.rows(); }
    std::size_t num_classes() const noexcept { return routing.cols(); }

    /// Computes γ = Vᵀq and checks shapes, budgets and column coverage.
    static AlignmentProblem make(BinaryMatrix routing, Matrix embeddings, Vector query,
                                 Vector budget);

    void validate() const;
};

enum class SolveStatus { kConverged, kMaxIter, kSingular };

struct AlignmentSolution {
    Vector x;       // idea strengths, one per class
    Vector lambda;  // chunk prices, one per chunk
    int iterations = 0;
    double kkt_residual = 0.0;
    double feasibility_residual = 0.0;
    SolveStatus status = SolveStatus::kConverged;
};

enum class PriceUpdate {
    kNewton,    // λ ← λ + step·H⁻¹(ρ − f) over rows not pinned at λ_min
    kGradient,  // λ ← λ + step·(ρ − f)
};

struct UtilityOptions {
    double eps = 1e-8;
    int t_max = 100000;
    double step0 = 0.1;
    double lambda_min = 1e-12;
    double gamma_min = 1e-9;
    PriceUpdate price_update = PriceUpdate::kNewton;
};

/// Maximizes Σ γ_s log x_s subject to Cx ≤ f by dual ascent: the primal step
/// x_s = γ_s / C(:,s)ᵀλ is followed by a projected price step of size
/// step0/√t, floored at λ_min (see PriceUpdate for the direction).
/// Stops once every row with a positive price has |ρ_k − f_k| < eps and every
/// row resting on the floor has ρ_k < f_k + eps.
///
/// Classes with γ_s ≤ 0 get x_s = 0 and take no part in the updates; rows with
/// no such participating class are skipped. On t_max the iterate with the
/// smallest residual is returned with status kMaxIter.
AlignmentSolution solve_utility(const AlignmentProblem& problem,
                                const UtilityOptions& options = {});

struct ClsOptions {
    std::size_t max_dim = 4096;
    double tolerance = 1e-8;
};

/// Minimizes ½‖Vx − q‖² subject to Cx = f through the KKT system
///   [VᵀV Cᵀ; C 0] [x; λ] = [Vᵀq; f].
/// Throws SingularSystem on a singular KKT matrix and InvalidArgument when
/// K + S exceeds max_dim. Status is kSingular if the residual checks fail.
AlignmentSolution solve_cls(const AlignmentProblem& problem, const ClsOptions& options = {});

enum class AlignMethod { kNone, kUtility, kCls };

struct BudgetPolicy {
    double per_chunk = 1.0;  // f = per_chunk · 1
};

/// Ranks classes (by γ for kNone, else by the solved x̄ with γ then id as
/// tie-breakers), keeps the best k', and returns every chunk incident to them,
/// ordered by the total x̄ (or γ) mass of selected classes in that chunk.
/// A utility solve that does not converge falls back to kNone with a warning.
///
/// `candidate_pool` > 0 restricts the problem to the most cosine-similar
/// classes and the chunks incident to them; 0 uses the whole index.
RetrievalResult aligned_retrieve(const Index& index, std::span<const double> query,
                                 AlignMethod method, const BudgetPolicy& budget, int k_prime,
                                 std::size_t candidate_pool = 0);

RetrievalResult aligned_retrieve(const Index& index, std::string_view query_text,
                                 AlignMethod method, const BudgetPolicy& budget, int k_prime,
                                 Gateway* gateway, std::size_t candidate_pool = 0);

}  // namespace unweaver
