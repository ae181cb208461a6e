#include "unweaver/linalg.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>

#include "unweaver/errors.hpp"

namespace unweaver {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw InvalidArgument("ragged matrix initializer");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Matrix Matrix::from_columns(std::span<const Vector> columns) {
    if (columns.empty()) {
        return {};
    }
    const std::size_t rows = columns.front().size();
    Matrix m(rows, columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c].size() != rows) {
            throw InvalidArgument("columns differ in length");
        }
        for (std::size_t r = 0; r < rows; ++r) {
            m(r, c) = columns[c][r];
        }
    }
    return m;
}

Vector Matrix::col(std::size_t c) const {
    Vector v(rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        v[r] = (*this)(r, c);
    }
    return v;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            t(c, r) = a(r, c);
        }
    }
    return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw InvalidArgument("matmul: inner dimensions differ");
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out(i, j) += aik * b(k, j);
            }
        }
    }
    return out;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) {
        throw InvalidArgument("matvec: dimension mismatch");
    }
    Vector y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        y[i] = dot(a.row(i), x);
    }
    return y;
}

Vector matvec_transposed(const Matrix& a, std::span<const double> x) {
    if (a.rows() != x.size()) {
        throw InvalidArgument("matvec_transposed: dimension mismatch");
    }
    Vector y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            y[j] += a(i, j) * x[i];
        }
    }
    return y;
}

Matrix gram(const Matrix& a) {
    Matrix g(a.cols(), a.cols());
    for (std::size_t i = 0; i < a.cols(); ++i) {
        for (std::size_t j = i; j < a.cols(); ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < a.rows(); ++r) {
                s += a(r, i) * a(r, j);
            }
            g(i, j) = s;
            g(j, i) = s;
        }
    }
    return g;
}

double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

Vector subtract(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    Vector d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        d[i] = a[i] - b[i];
    }
    return d;
}

LuDecomposition::LuDecomposition(Matrix a, double relative_tolerance)
    : lu_(std::move(a)), perm_(lu_.rows()) {
    const std::size_t n = lu_.rows();
    if (lu_.cols() != n) {
        throw InvalidArgument("LU requires a square matrix");
    }
    std::iota(perm_.begin(), perm_.end(), 0);
    const double scale = std::max(norm_inf(lu_.data()), 1e-300);
    const double tol = relative_tolerance * scale;

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t pivot = k;
        double best = std::abs(lu_(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::abs(lu_(i, k)) > best) {
                best = std::abs(lu_(i, k));
                pivot = i;
            }
        }
        if (best <= tol) {
            throw SingularSystem("matrix is singular to working precision (pivot " +
                                 std::to_string(k) + ")");
        }
        if (pivot != k) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(lu_(k, j), lu_(pivot, j));
            }
            std::swap(perm_[k], perm_[pivot]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double factor = lu_(i, k) / lu_(k, k);
            lu_(i, k) = factor;
            if (factor == 0.0) {
                continue;
            }
            for (std::size_t j = k + 1; j < n; ++j) {
                lu_(i, j) -= factor * lu_(k, j);
            }
        }
    }
}

Vector LuDecomposition::solve(std::span<const double> b) const {
    const std::size_t n = lu_.rows();
    if (b.size() != n) {
        throw InvalidArgument("LU solve: right-hand side has wrong length");
    }
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[perm_[i]];
        for (std::size_t j = 0; j < i; ++j) {
            s -= lu_(i, j) * y[j];
        }
        y[i] = s;
    }
    Vector x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = y[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            s -= lu_(i, j) * x[j];
        }
        x[i] = s / lu_(i, i);
    }
    return x;
}

Vector lu_solve(const Matrix& a, std::span<const double> b) {
    const LuDecomposition lu(a);
    Vector x = lu.solve(b);
    const Vector residual = subtract(b, matvec(a, x));
    const Vector correction = lu.solve(residual);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] += correction[i];
    }
    return x;
}

Matrix pseudoinverse(const Matrix& a) {
    const LuDecomposition lu(gram(a));
    Matrix pinv(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const Vector col = lu.solve(a.row(r));  // (AᵀA)⁻¹ Aᵀ e_r
        for (std::size_t c = 0; c < a.cols(); ++c) {
            pinv(c, r) = col[c];
        }
    }
    return pinv;
}

}  // namespace unweaver
