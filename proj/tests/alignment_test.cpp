#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "test_fixtures.hpp"
#include "unweaver/alignment.hpp"
#include "unweaver/errors.hpp"

namespace unweaver {
namespace {

using testing::example_embeddings;
using testing::example_query;
using testing::example_routing;

AlignmentProblem example_problem() {
    return AlignmentProblem::make(example_routing(), example_embeddings(), example_query(),
                                  Vector{1, 1});
}

// Problem with γ overridden; V and q only need the right shapes.
AlignmentProblem with_gamma(BinaryMatrix c, Vector gamma, Vector f) {
    const auto S = c.cols();
    auto p = AlignmentProblem::make(std::move(c), Matrix(1, S, 1.0), Vector{1.0}, std::move(f));
    p.gamma = std::move(gamma);
    p.validate();
    return p;
}

std::set<ChunkId> as_set(const std::vector<ChunkId>& v) { return {v.begin(), v.end()}; }

TEST(AlignmentProblem, GammaIsVtq) {
    const auto p = example_problem();
    EXPECT_EQ(p.gamma, (Vector{1, 1, 1}));
}

TEST(AlignmentProblem, RejectsBadInput) {
    EXPECT_THROW(AlignmentProblem::make(example_routing(), example_embeddings(),
                                        example_query(), Vector{1, 0}),
                 InvalidArgument);
    EXPECT_THROW(AlignmentProblem::make(example_routing(), example_embeddings(), Vector{1},
                                        Vector{1, 1}),
                 DimensionMismatch);
    EXPECT_THROW(AlignmentProblem::make(BinaryMatrix{{1, 0}, {1, 0}}, Matrix(2, 2, 1.0),
                                        Vector{1, 1}, Vector{1, 1}),
                 InvalidArgument);
}

TEST(SolveUtility, NumericalExample) {
    const auto sol = solve_utility(example_problem());
    ASSERT_EQ(sol.status, SolveStatus::kConverged);
    ASSERT_EQ(sol.x.size(), 3u);
    ASSERT_EQ(sol.lambda.size(), 2u);
    EXPECT_NEAR(sol.x[0], 2.0 / 3.0, 1e-6);
    EXPECT_NEAR(sol.x[1], 2.0 / 3.0, 1e-6);
    EXPECT_NEAR(sol.x[2], 1.0 / 3.0, 1e-6);
    EXPECT_NEAR(sol.lambda[0], 1.5, 1e-6);
    EXPECT_NEAR(sol.lambda[1], 1.5, 1e-6);
}

TEST(SolveUtility, OneByOne) {
    const auto sol = solve_utility(with_gamma(BinaryMatrix{{1}}, {1.0}, {1.0}));
    ASSERT_EQ(sol.status, SolveStatus::kConverged);
    EXPECT_NEAR(sol.x[0], 1.0, 1e-8);
    EXPECT_NEAR(sol.lambda[0], 1.0, 1e-6);
}

TEST(SolveUtility, PlainGradientRuleStillAvailable) {
    UtilityOptions opts;
    opts.price_update = PriceUpdate::kGradient;
    const auto sol = solve_utility(example_problem(), opts);
    EXPECT_NEAR(sol.x[0], 2.0 / 3.0, 1e-5);
    EXPECT_NEAR(sol.x[2], 1.0 / 3.0, 1e-5);
}

TEST(SolveUtility, NonPositiveGammaGetsNothing) {
    const auto sol = solve_utility(with_gamma(BinaryMatrix{{1, 1}}, {1.0, -0.5}, {2.0}));
    ASSERT_EQ(sol.status, SolveStatus::kConverged);
    EXPECT_NEAR(sol.x[0], 2.0, 1e-8);
    EXPECT_EQ(sol.x[1], 0.0);
}

TEST(SolveUtility, RowWithoutParticipantsIsSkipped) {
    // Row 1 only hosts the negative class, so its budget cannot be met.
    const auto sol =
        solve_utility(with_gamma(BinaryMatrix{{1, 0}, {0, 1}}, {1.0, -1.0}, {1.0, 1.0}));
    ASSERT_EQ(sol.status, SolveStatus::kConverged);
    EXPECT_NEAR(sol.x[0], 1.0, 1e-8);
}

TEST(SolveUtility, SlackRowPriceFallsToFloor) {
    // Chunk 1 holds only class 0, which is already capped at 1 by chunk 0.
    const auto sol =
        solve_utility(with_gamma(BinaryMatrix{{1, 1}, {1, 0}}, {1.0, 1.0}, {2.0, 5.0}));
    ASSERT_EQ(sol.status, SolveStatus::kConverged);
    EXPECT_NEAR(sol.x[0], 1.0, 1e-7);
    EXPECT_NEAR(sol.x[1], 1.0, 1e-7);
    EXPECT_LT(sol.lambda[1], 1e-6);
}

TEST(SolveUtility, MaxIterReturnsBestIterate) {
    UtilityOptions opts;
    opts.t_max = 3;
    opts.price_update = PriceUpdate::kGradient;
    const auto sol = solve_utility(example_problem(), opts);
    EXPECT_EQ(sol.status, SolveStatus::kMaxIter);
    EXPECT_EQ(sol.x.size(), 3u);
    EXPECT_GT(sol.feasibility_residual, opts.eps);
    EXPECT_LE(sol.iterations, 3);
}

TEST(SolveUtility, StationarityOnRandomInstances) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto planted = oracle::planted_utility(rng, 3, 5);
        const auto p = with_gamma(planted.routing, planted.gamma, planted.budget);
        const auto sol = solve_utility(p);
        ASSERT_EQ(sol.status, SolveStatus::kConverged) << "trial " << trial;
        for (std::size_t s = 0; s < 5; ++s) {
            double price = 0.0;
            for (std::size_t k = 0; k < 3; ++k) {
                price += p.routing.at(k, s) ? sol.lambda[k] : 0.0;
            }
            EXPECT_LE(std::abs(p.gamma[s] / sol.x[s] - price), 1e-5 * p.gamma[s]);
        }
    }
}

TEST(SolveUtility, MatchesDualOracle) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const auto planted = oracle::planted_utility(rng, 3, 5);
        const auto sol =
            solve_utility(with_gamma(planted.routing, planted.gamma, planted.budget));
        const auto ref = oracle::utility_oracle(oracle::dense(planted.routing), planted.gamma,
                                                planted.budget);
        ASSERT_TRUE(ref.converged);
        for (std::size_t s = 0; s < 5; ++s) {
            EXPECT_NEAR(sol.x[s], ref.x[s], 1e-5);
            EXPECT_NEAR(sol.x[s], planted.x_star[s], 1e-5);
        }
    }
}

TEST(SolveUtility, ScalingGammaScalesPrices) {
    auto p = example_problem();
    const auto base = solve_utility(p);
    for (auto& g : p.gamma) g *= 3.5;
    const auto scaled = solve_utility(p);
    ASSERT_EQ(scaled.status, SolveStatus::kConverged);
    for (std::size_t s = 0; s < 3; ++s) EXPECT_NEAR(scaled.x[s], base.x[s], 1e-6);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(scaled.lambda[k], 3.5 * base.lambda[k], 1e-6);
}

TEST(SolveCls, TwoClassesOneChunk) {
    // x = q already satisfies x0 + x1 = 1, so the constraint is inactive.
    const auto p = AlignmentProblem::make(BinaryMatrix{{1, 1}}, Matrix::identity(2),
                                          Vector{1, 0}, Vector{1});
    const auto sol = solve_cls(p);
    ASSERT_EQ(sol.status, SolveStatus::kConverged);
    EXPECT_NEAR(sol.x[0], 1.0, 1e-12);
    EXPECT_NEAR(sol.x[1], 0.0, 1e-12);
    EXPECT_NEAR(sol.lambda[0], 0.0, 1e-12);
}

TEST(SolveCls, IdentityRoutingPinsX) {
    const auto p = AlignmentProblem::make(BinaryMatrix{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}},
                                          Matrix{{1, 2, 0}, {0, 1, 3}}, Vector{0.3, -1},
                                          Vector{0.5, 2, 7});
    const auto sol = solve_cls(p);
    ASSERT_EQ(sol.status, SolveStatus::kConverged);
    EXPECT_NEAR(sol.x[0], 0.5, 1e-10);
    EXPECT_NEAR(sol.x[1], 2.0, 1e-10);
    EXPECT_NEAR(sol.x[2], 7.0, 1e-10);
}

TEST(SolveCls, NumericalExampleMatchesKktOracle) {
    const auto sol = solve_cls(example_problem());
    const auto ref =
        oracle::cls_oracle(oracle::dense(example_routing()),
                           oracle::to_dense(example_embeddings()), example_query(), {1, 1});
    for (std::size_t s = 0; s < 3; ++s) EXPECT_NEAR(sol.x[s], ref.x[s], 1e-10);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(sol.lambda[k], ref.lambda[k], 1e-10);
    EXPECT_NEAR(sol.x[0], 1.0, 1e-10);
    EXPECT_NEAR(sol.x[1], 1.0, 1e-10);
    EXPECT_NEAR(sol.x[2], 0.0, 1e-10);
}

TEST(SolveCls, DuplicatedRowIsSingular) {
    const auto p = AlignmentProblem::make(BinaryMatrix{{1, 1}, {1, 1}}, Matrix::identity(2),
                                          Vector{1, 0}, Vector{1, 1});
    EXPECT_THROW(solve_cls(p), SingularSystem);
}

TEST(SolveCls, SizeLimit) {
    ClsOptions opts;
    opts.max_dim = 4;
    EXPECT_THROW(solve_cls(example_problem(), opts), InvalidArgument);
}

TEST(SolveCls, ObjectiveGradientFiniteDifference) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix V = oracle::random_matrix(rng, 4, 3);
        const Vector q = oracle::random_vector(rng, 4);
        const Vector x = oracle::random_vector(rng, 3);
        const auto objective = [&](const Vector& z) {
            const auto r = subtract(matvec(V, z), q);
            return 0.5 * dot(r, r);
        };
        const Vector grad = matvec_transposed(V, subtract(matvec(V, x), q));
        const Vector dir = oracle::random_vector(rng, 3);
        const double h = 1e-6;
        Vector xp = x, xm = x;
        for (std::size_t i = 0; i < 3; ++i) {
            xp[i] += h * dir[i];
            xm[i] -= h * dir[i];
        }
        const double fd = (objective(xp) - objective(xm)) / (2 * h);
        const double analytic = dot(grad, dir);
        EXPECT_NEAR(fd, analytic, 1e-5 * std::max(1.0, std::abs(analytic)));
    }
}

TEST(AlignedRetrieve, UtilityOnNumericalExample) {
    const auto index = testing::example_index();
    const auto r =
        aligned_retrieve(index, example_query(), AlignMethod::kUtility, BudgetPolicy{}, 2);
    ASSERT_EQ(r.selected_classes.size(), 2u);
    EXPECT_EQ(r.selected_classes[0].class_id, 0);
    EXPECT_EQ(r.selected_classes[1].class_id, 1);
    EXPECT_EQ(as_set(r.elected_chunks), (std::set<ChunkId>{0, 1}));
    EXPECT_TRUE(r.warnings.empty());
}

TEST(AlignedRetrieve, NoneWithAllClassesTakesEveryChunk) {
    const auto index = testing::example_index();
    const auto r =
        aligned_retrieve(index, example_query(), AlignMethod::kNone, BudgetPolicy{}, 3);
    EXPECT_EQ(as_set(r.elected_chunks), (std::set<ChunkId>{0, 1}));
}

TEST(AlignedRetrieve, NoneKeepsBestGammaFirst) {
    const auto index = testing::example_index();
    const auto r = aligned_retrieve(index, Vector{1, 0}, AlignMethod::kNone, BudgetPolicy{}, 1);
    ASSERT_EQ(r.selected_classes.size(), 1u);
    EXPECT_EQ(r.selected_classes[0].class_id, 0);
    EXPECT_EQ(r.elected_chunks, (std::vector<ChunkId>{0}));
}

TEST(AlignedRetrieve, ClsFollowsOracleStrengths) {
    const auto index = testing::example_index();
    const auto ref =
        oracle::cls_oracle(oracle::dense(example_routing()),
                           oracle::to_dense(example_embeddings()), example_query(), {1, 1});
    // Top two classes by the oracle's x̄, then every chunk touching them.
    std::vector<std::size_t> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ref.x[a] > ref.x[b] + 1e-9; });
    std::set<ChunkId> expected;
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t k = 0; k < 2; ++k) {
            if (example_routing().at(k, order[i])) expected.insert(static_cast<ChunkId>(k));
        }
    }
    const auto r =
        aligned_retrieve(index, example_query(), AlignMethod::kCls, BudgetPolicy{}, 2);
    EXPECT_EQ(as_set(r.elected_chunks), expected);
}

TEST(AlignedRetrieve, CandidatePoolRestrictsClasses) {
    const auto index = testing::example_index();
    const auto r =
        aligned_retrieve(index, Vector{1, 0}, AlignMethod::kUtility, BudgetPolicy{}, 3, 1);
    ASSERT_EQ(r.selected_classes.size(), 1u);
    EXPECT_EQ(r.selected_classes[0].class_id, 0);
    EXPECT_FALSE(r.warnings.empty());  // k' clamped to the pool
}

TEST(AlignedRetrieve, RejectsZeroKPrime) {
    const auto index = testing::example_index();
    EXPECT_THROW(
        aligned_retrieve(index, example_query(), AlignMethod::kNone, BudgetPolicy{}, 0),
        InvalidArgument);
}

}  // namespace
}  // namespace unweaver
