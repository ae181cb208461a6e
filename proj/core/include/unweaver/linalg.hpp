#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace unweaver {

using Vector = std::vector<double>;

/// Small dense row-major matrix. Sized for the alignment problems (a few
/// thousand rows at most), not for general numerical work.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    /// Builds a matrix whose columns are the given vectors (all the same length).
    static Matrix from_columns(std::span<const Vector> columns);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }
    Vector col(std::size_t c) const;

    std::span<const double> data() const noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix transpose(const Matrix& a);
Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, std::span<const double> x);
/// AᵀA.
Matrix gram(const Matrix& a);
/// Aᵀx.
Vector matvec_transposed(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);
Vector subtract(std::span<const double> a, std::span<const double> b);

/// LU factorization with partial pivoting, PA = LU.
class LuDecomposition {
public:
    /// Throws SingularSystem when a pivot falls below
    /// `relative_tolerance * max|A|`.
    explicit LuDecomposition(Matrix a, double relative_tolerance = 1e-12);

    Vector solve(std::span<const double> b) const;
    std::size_t size() const noexcept { return lu_.rows(); }

private:
    Matrix lu_;
    std::vector<std::size_t> perm_;
};

/// Solves Ax = b with one round of iterative refinement.
Vector lu_solve(const Matrix& a, std::span<const double> b);

/// Moore-Penrose pseudoinverse for full-column-rank A, computed as
/// (AᵀA)⁻¹Aᵀ. Throws SingularSystem when A is column-rank deficient.
Matrix pseudoinverse(const Matrix& a);

}  // namespace unweaver
