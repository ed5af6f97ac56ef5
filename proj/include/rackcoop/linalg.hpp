#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rackcoop/error.hpp"
#include "rackcoop/field.hpp"
#include "rackcoop/util.hpp"

namespace rackcoop {

// Dense row-major matrix over a runtime-selected field.
class Matrix {
public:
    Matrix(FieldPtr field, std::size_t rows, std::size_t cols)
        : field_(std::move(field)), rows_(rows), cols_(cols), data_(rows * cols, 0) {}

    Matrix(FieldPtr field, std::size_t rows, std::size_t cols, std::vector<Symbol> entries)
        : field_(std::move(field)), rows_(rows), cols_(cols), data_(std::move(entries)) {
        if (data_.size() != rows_ * cols_)
            throw DimensionError("matrix " + shape() + " given " + std::to_string(data_.size()) + " entries");
        for (Symbol s : data_)
            if (!field_->contains(s)) throw FieldError("matrix entry outside " + field_->spec().name());
    }

    static Matrix identity(FieldPtr field, std::size_t n) {
        Matrix id(std::move(field), n, n);
        for (std::size_t i = 0; i < n; ++i) id(i, i) = 1;
        return id;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    const FieldPtr& field() const noexcept { return field_; }
    const Field& f() const noexcept { return *field_; }
    std::span<const Symbol> data() const noexcept { return data_; }

    Symbol& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    Symbol operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<Symbol> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const Symbol> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::vector<Symbol> column(std::size_t j) const {
        std::vector<Symbol> out(rows_);
        for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
        return out;
    }

    Matrix select_columns(std::span<const std::size_t> cols) const {
        Matrix out(field_, rows_, cols.size());
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = (*this)(i, cols[j]);
        return out;
    }

    Matrix select_rows(std::span<const std::size_t> rows) const {
        Matrix out(field_, rows.size(), cols_);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < cols_; ++j) out(i, j) = (*this)(rows[i], j);
        return out;
    }

    Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
        if (r0 + nr > rows_ || c0 + nc > cols_) throw DimensionError("block outside " + shape());
        Matrix out(field_, nr, nc);
        for (std::size_t i = 0; i < nr; ++i)
            for (std::size_t j = 0; j < nc; ++j) out(i, j) = (*this)(r0 + i, c0 + j);
        return out;
    }

    bool is_zero() const {
        for (Symbol s : data_)
            if (s != 0) return false;
        return true;
    }

    std::string shape() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return same_field(*a.field_, *b.field_) && a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    FieldPtr field_;
    std::size_t rows_;
    std::size_t cols_;
    std::vector<Symbol> data_;
};

namespace detail {

inline void require_same_field(const Matrix& a, const Matrix& b) {
    if (!same_field(a.f(), b.f()))
        throw FieldError("mixed-field matrices: " + a.f().spec().name() + " and " + b.f().spec().name());
}

// Row-reduces m in place to reduced echelon form; returns the pivot columns.
inline std::vector<std::size_t> row_reduce(Matrix& m, std::size_t col_limit) {
    const Field& f = m.f();
    std::vector<std::size_t> pivots;
    std::size_t row = 0;
    for (std::size_t col = 0; col < col_limit && row < m.rows(); ++col) {
        std::size_t pivot = row;
        while (pivot < m.rows() && m(pivot, col) == 0) ++pivot;
        if (pivot == m.rows()) continue;
        if (pivot != row)
            for (std::size_t j = 0; j < m.cols(); ++j) std::swap(m(pivot, j), m(row, j));
        const Symbol scale = f.inv(m(row, col));
        for (std::size_t j = col; j < m.cols(); ++j) m(row, j) = f.mul(m(row, j), scale);
        for (std::size_t i = 0; i < m.rows(); ++i) {
            if (i == row || m(i, col) == 0) continue;
            const Symbol factor = f.neg(m(i, col));
            for (std::size_t j = col; j < m.cols(); ++j) m(i, j) = f.fma(m(i, j), factor, m(row, j));
        }
        pivots.push_back(col);
        ++row;
    }
    return pivots;
}

}  // namespace detail

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    detail::require_same_field(a, b);
    if (a.cols() != b.rows()) throw DimensionError("matmul " + a.shape() + " * " + b.shape());
    const Field& f = a.f();
    Matrix out(a.field(), a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t t = 0; t < a.cols(); ++t) {
            const Symbol x = a(i, t);
            if (x == 0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) = f.fma(out(i, j), x, b(t, j));
        }
    return out;
}

inline std::vector<Symbol> matvec(const Matrix& a, std::span<const Symbol> x) {
    if (a.cols() != x.size()) throw DimensionError("matvec " + a.shape() + " * vector of " + std::to_string(x.size()));
    const Field& f = a.f();
    std::vector<Symbol> out(a.rows(), 0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out[i] = f.fma(out[i], a(i, j), x[j]);
    return out;
}

// x^T a, i.e. a row vector times a matrix.
inline std::vector<Symbol> vecmat(std::span<const Symbol> x, const Matrix& a) {
    if (a.rows() != x.size()) throw DimensionError("vecmat vector of " + std::to_string(x.size()) + " * " + a.shape());
    const Field& f = a.f();
    std::vector<Symbol> out(a.cols(), 0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        if (x[i] == 0) continue;
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] = f.fma(out[j], x[i], a(i, j));
    }
    return out;
}

inline Symbol dot(const Field& f, std::span<const Symbol> a, std::span<const Symbol> b) {
    if (a.size() != b.size()) throw DimensionError("dot of lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    Symbol acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc = f.fma(acc, a[i], b[i]);
    return acc;
}

inline Matrix transpose(const Matrix& a) {
    Matrix out(a.field(), a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

inline std::size_t rank(Matrix a) { return detail::row_reduce(a, a.cols()).size(); }

inline bool is_invertible(const Matrix& a) { return a.rows() == a.cols() && rank(a) == a.rows(); }

// Solves A x = b for square invertible A.
inline std::vector<Symbol> solve(const Matrix& a, std::span<const Symbol> b) {
    if (a.rows() != a.cols()) throw DimensionError("solve needs a square matrix, got " + a.shape());
    if (b.size() != a.rows()) throw DimensionError("solve " + a.shape() + " with rhs of " + std::to_string(b.size()));
    const std::size_t n = a.rows();
    Matrix aug(a.field(), n, n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) aug(i, j) = a(i, j);
        aug(i, n) = b[i];
    }
    if (detail::row_reduce(aug, n).size() != n) throw SingularMatrixError("singular " + a.shape() + " system");
    return aug.column(n);
}

// Solves a consistent overdetermined system A x = b where A has full column
// rank. Throws SingularMatrixError on rank deficiency and IntegrityError when
// b is inconsistent with A.
inline std::vector<Symbol> solve_full_column_rank(const Matrix& a, std::span<const Symbol> b) {
    if (b.size() != a.rows()) throw DimensionError("solve " + a.shape() + " with rhs of " + std::to_string(b.size()));
    const std::size_t n = a.cols();
    Matrix aug(a.field(), a.rows(), n + 1);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < n; ++j) aug(i, j) = a(i, j);
        aug(i, n) = b[i];
    }
    const auto pivots = detail::row_reduce(aug, n);
    if (pivots.size() != n)
        throw SingularMatrixError("rank " + std::to_string(pivots.size()) + " < " + std::to_string(n) + " in " + a.shape() + " system");
    for (std::size_t i = n; i < a.rows(); ++i)
        if (aug(i, n) != 0) throw IntegrityError("inconsistent linear system: data does not match the code");
    std::vector<Symbol> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = aug(i, n);
    return x;
}

inline Matrix inverse(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("inverse needs a square matrix, got " + a.shape());
    const std::size_t n = a.rows();
    Matrix aug(a.field(), n, 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) aug(i, j) = a(i, j);
        aug(i, n + i) = 1;
    }
    if (detail::row_reduce(aug, n).size() != n) throw SingularMatrixError("singular " + a.shape() + " matrix");
    return aug.block(0, n, n, n);
}

// Entry (i, j) = points[j]^i.
inline Matrix vandermonde(const FieldPtr& field, std::size_t rows, std::span<const Symbol> points) {
    if (rows > field->order()) throw DimensionError("vandermonde with more rows than field elements");
    for (std::size_t a = 0; a < points.size(); ++a) {
        if (!field->contains(points[a])) throw FieldError("vandermonde point outside field");
        for (std::size_t b = a + 1; b < points.size(); ++b)
            if (points[a] == points[b]) throw ValidationError("vandermonde points must be distinct");
    }
    Matrix out(field, rows, points.size());
    for (std::size_t j = 0; j < points.size(); ++j) {
        Symbol p = 1;
        for (std::size_t i = 0; i < rows; ++i) {
            out(i, j) = p;
            p = field->mul(p, points[j]);
        }
    }
    return out;
}

// Cauchy matrix 1/(x_i - y_j); stacked under an identity it is a systematic
// MDS generator. xs and ys must be pairwise distinct as one set.
inline Matrix cauchy(const FieldPtr& field, std::span<const Symbol> xs, std::span<const Symbol> ys) {
    Matrix out(field, xs.size(), ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < ys.size(); ++j) {
            const Symbol diff = field->sub(xs[i], ys[j]);
            if (diff == 0) throw ValidationError("cauchy points must be distinct");
            out(i, j) = field->inv(diff);
        }
    return out;
}

// Largest code length mds_generator supports: one distinct nonzero point per column.
inline std::size_t max_mds_length(const Field& f) { return f.order() - 1; }

// B_dim x N generator in which every B_dim-column submatrix is invertible:
// a Vandermonde matrix on the nonzero points 1..N.
inline Matrix mds_generator(const FieldPtr& field, std::size_t b_dim, std::size_t n) {
    if (b_dim == 0 || b_dim > n) throw DimensionError("mds_generator needs 0 < B <= N");
    if (n > max_mds_length(*field))
        throw ValidationError("code length " + std::to_string(n) + " too large for " + field->spec().name() +
                              " (max " + std::to_string(max_mds_length(*field)) + ")");
    std::vector<Symbol> points(n);
    for (std::size_t j = 0; j < n; ++j) points[j] = static_cast<Symbol>(j + 1);
    return vandermonde(field, b_dim, points);
}

namespace detail {

constexpr std::size_t kExhaustiveColumnLimit = 10;
constexpr std::size_t kSampledSubsets = 2000;
constexpr std::uint64_t kSubsetSampleSeed = 0x5eed'c01u;

// True iff every `size`-column submatrix of rows_block is invertible
// (rows_block must have `size` rows). Exhaustive for small column counts.
inline bool all_column_subsets_invertible(const Matrix& rows_block, std::size_t size) {
    const std::size_t r = rows_block.cols();
    if (size > r) return false;
    auto check = [&](const std::vector<std::size_t>& cols) { return is_invertible(rows_block.select_columns(cols)); };
    if (r <= kExhaustiveColumnLimit) return for_each_combination(r, size, check);
    Rng rng(kSubsetSampleSeed);
    for (std::size_t s = 0; s < kSampledSubsets; ++s)
        if (!check(rng.subset(r, size))) return false;
    return true;
}

inline bool submatrix_property(const Matrix& x, std::size_t m, std::size_t full) {
    if (m > x.rows()) return false;
    return all_column_subsets_invertible(x.block(0, 0, m, x.cols()), m) && all_column_subsets_invertible(x, full);
}

}  // namespace detail

// U is d x r: every m x m column-submatrix of its top m rows and every d x d
// column-submatrix must be invertible.
inline bool check_U_property(const Matrix& u, std::size_t m, std::size_t d) {
    if (u.rows() != d) throw DimensionError("U must have d = " + std::to_string(d) + " rows, got " + u.shape());
    return detail::submatrix_property(u, m, d);
}

// V is (d+f) x r, same requirement with (d+f) x (d+f) full submatrices.
inline bool check_V_property(const Matrix& v, std::size_t m, std::size_t d, std::size_t f) {
    if (v.rows() != d + f) throw DimensionError("V must have d+f = " + std::to_string(d + f) + " rows, got " + v.shape());
    return detail::submatrix_property(v, m, d + f);
}

}  // namespace rackcoop
