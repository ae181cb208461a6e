#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "unweaver/errors.hpp"
#include "unweaver/linalg.hpp"

namespace unweaver {
namespace {

TEST(Linalg, TransposeAndMatmul) {
    const Matrix a{{1, 2, 3}, {4, 5, 6}};
    const Matrix at = transpose(a);
    ASSERT_EQ(at.rows(), 3u);
    EXPECT_EQ(at(2, 1), 6.0);
    const Matrix g = matmul(at, a);
    EXPECT_EQ(g, gram(a));
    EXPECT_EQ(g(0, 0), 17.0);
    EXPECT_EQ(g(1, 2), 2.0 * 3 + 5.0 * 6);
}

TEST(Linalg, MatvecBothWays) {
    const Matrix a{{1, 2}, {3, 4}, {5, 6}};
    const Vector x{1, -1};
    EXPECT_EQ(matvec(a, x), (Vector{-1, -1, -1}));
    const Vector y{1, 0, 1};
    EXPECT_EQ(matvec_transposed(a, y), (Vector{6, 8}));
}

TEST(Linalg, FromColumns) {
    const std::vector<Vector> cols{{1, 2}, {3, 4}, {5, 6}};
    const Matrix m = Matrix::from_columns(cols);
    EXPECT_EQ(m.rows(), 2u);
    EXPECT_EQ(m.cols(), 3u);
    EXPECT_EQ(m.col(1), (Vector{3, 4}));
}

TEST(Linalg, Norms) {
    const Vector v{3, -4};
    EXPECT_DOUBLE_EQ(norm2(v), 5.0);
    EXPECT_DOUBLE_EQ(norm_inf(v), 4.0);
    EXPECT_DOUBLE_EQ(dot(v, v), 25.0);
}

TEST(Linalg, LuSolveIdentity) {
    const Vector b{1.5, -2.0, 7.25};
    EXPECT_EQ(lu_solve(Matrix::identity(3), b), b);
}

TEST(Linalg, LuSolveMatchesCramer) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + trial % 3;
        Matrix a = oracle::random_matrix(rng, n, n);
        for (std::size_t i = 0; i < n; ++i) a(i, i) += 3.0;  // keep it well conditioned
        const Vector b = oracle::random_vector(rng, n);
        const Vector x = lu_solve(a, b);
        const auto expected = oracle::cramer_solve(oracle::to_dense(a), b);
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_NEAR(x[i], expected[i], 1e-8);
        }
        const Vector r = subtract(matvec(a, x), b);
        EXPECT_LT(norm_inf(r), 1e-9 * (1.0 + norm_inf(b)));
    }
}

TEST(Linalg, LuNeedsPivoting) {
    const Matrix a{{0, 1}, {1, 0}};
    EXPECT_EQ(lu_solve(a, Vector{2, 3}), (Vector{3, 2}));
}

TEST(Linalg, SingularThrows) {
    const Matrix a{{1, 2}, {2, 4}};
    EXPECT_THROW(lu_solve(a, Vector{1, 1}), SingularSystem);
    EXPECT_THROW(LuDecomposition(Matrix(2, 2)), SingularSystem);
}

TEST(Linalg, PseudoinverseOfOrthonormalColumns) {
    const double h = std::sqrt(0.5);
    const Matrix v{{h, 0}, {h, 0}, {0, 1}};
    const Matrix pinv = pseudoinverse(v);
    const Matrix id = matmul(pinv, v);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            EXPECT_NEAR(id(i, j), i == j ? 1.0 : 0.0, 1e-10);
        }
    }
}

TEST(Linalg, PseudoinverseRankDeficient) {
    const Matrix v{{1, 2}, {2, 4}, {3, 6}};
    EXPECT_THROW(pseudoinverse(v), SingularSystem);
}

}  // namespace
}  // namespace unweaver
