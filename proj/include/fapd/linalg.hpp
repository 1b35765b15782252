#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace fapd {

// Dense real vector.
class Vector {
public:
    Vector() = default;
    explicit Vector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
    Vector(std::initializer_list<double> values) : data_(values) {}
    explicit Vector(std::vector<double> values) : data_(std::move(values)) {}
    explicit Vector(std::span<const double> values) : data_(values.begin(), values.end()) {}

    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    std::span<double> span() noexcept { return data_; }
    std::span<const double> span() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    friend bool operator==(const Vector&, const Vector&) = default;

private:
    std::vector<double> data_;
};

// Dense real matrix, row-major.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> span() noexcept { return data_; }
    std::span<const double> span() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct EigenResult {
    std::vector<double> eigenvalues;  // non-increasing
    Matrix eigenvectors;              // column i pairs with eigenvalues[i]
};

bool all_finite(std::span<const double> values) noexcept;

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v) noexcept;

// Max absolute row sum.
double norm_inf(const Matrix& a) noexcept;

Matrix transpose(const Matrix& a);
Matrix multiply(const Matrix& a, const Matrix& b);

// Column means of an M x D sample matrix.
Vector column_mean(const Matrix& samples);

// Unbiased sample covariance (1/(M-1)) of the rows of `features`.
// Throws InsufficientSamples for M < 2 and InvalidInput on non-finite entries.
Matrix covariance(const Matrix& features);

// Symmetric eigendecomposition by cyclic Jacobi rotations.
//
// Eigenpairs come back sorted by descending eigenvalue. Each eigenvector is
// sign-fixed so its largest-magnitude component is positive (lowest index
// wins among magnitudes equal to within 1e-12 relative). Exactly tied
// eigenvalues are ordered by descending lexicographic order of the
// sign-fixed eigenvectors.
EigenResult eig_sym(const Matrix& a);

// P * z.
Vector project(const Matrix& p, const Vector& z);

// P^T * v, the adjoint of project().
Vector project_adjoint(const Matrix& p, const Vector& v);

// z / |z|_2, or the zero vector when |z|_2 <= 1e-12.
Vector l2_normalize(const Vector& z);

// Orthonormalizes the columns of `a` (rows >= cols) by twice-iterated
// modified Gram-Schmidt. Columns must be linearly independent.
Matrix orthonormalize_columns(Matrix a);

}  // namespace fapd
