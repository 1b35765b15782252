#include "fapd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fapd/error.hpp"

namespace fapd {

namespace {

constexpr double kNormalizeFloor = 1e-12;
constexpr double kJacobiTolerance = 1e-12;
constexpr double kSymmetryTolerance = 1e-10;
constexpr int kMaxSweeps = 100;

void fix_sign(std::span<double> v) {
    double largest = 0.0;
    for (double x : v) largest = std::max(largest, std::abs(x));
    if (largest == 0.0) return;
    // Lowest index whose magnitude ties the maximum.
    for (double x : v) {
        if (std::abs(x) >= largest * (1.0 - 1e-12)) {
            if (x < 0.0) {
                for (double& y : v) y = -y;
            }
            return;
        }
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, "matrix data length " + std::to_string(data_.size()) +
                                               " does not match " + std::to_string(rows_) + "x" +
                                               std::to_string(cols_));
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        require(row.size() == c, "ragged matrix rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool all_finite(std::span<const double> values) noexcept {
    return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "dot: dimension mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

double norm2(std::span<const double> v) noexcept {
    double sum = 0.0;
    for (double x : v) sum += x * x;
    return std::sqrt(sum);
}

double norm_inf(const Matrix& a) noexcept {
    double best = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double sum = 0.0;
        for (double x : a.row(r)) sum += std::abs(x);
        best = std::max(best, sum);
    }
    return best;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
    return t;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.rows(), "multiply: inner dimension mismatch");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto src = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
        }
    }
    return out;
}

Vector column_mean(const Matrix& samples) {
    Vector mean(samples.cols());
    if (samples.rows() == 0) return mean;
    for (std::size_t r = 0; r < samples.rows(); ++r) {
        auto row = samples.row(r);
        for (std::size_t c = 0; c < samples.cols(); ++c) mean[c] += row[c];
    }
    const double inv = 1.0 / static_cast<double>(samples.rows());
    for (double& m : mean) m *= inv;
    return mean;
}

Matrix covariance(const Matrix& features) {
    const std::size_t m = features.rows();
    const std::size_t d = features.cols();
    if (m < 2) fail(ErrorKind::InsufficientSamples, "covariance needs at least 2 samples, got " + std::to_string(m));
    if (!all_finite(features.span())) fail(ErrorKind::InvalidInput, "covariance: non-finite feature entry");

    const Vector mean = column_mean(features);
    Matrix centered(m, d);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < d; ++c) centered(r, c) = features(r, c) - mean[c];

    Matrix cov(d, d);
    const double scale = 1.0 / static_cast<double>(m - 1);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            double sum = 0.0;
            for (std::size_t r = 0; r < m; ++r) sum += centered(r, i) * centered(r, j);
            cov(i, j) = sum * scale;
            cov(j, i) = cov(i, j);
        }
        cov(i, i) = std::max(cov(i, i), 0.0);
    }
    return cov;
}

EigenResult eig_sym(const Matrix& input) {
    const std::size_t n = input.rows();
    require(n >= 1, "eig_sym: empty matrix");
    require(input.cols() == n, "eig_sym: matrix is not square");
    if (!all_finite(input.span())) fail(ErrorKind::InvalidInput, "eig_sym: non-finite entry");

    const double scale = norm_inf(input);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(input(i, j) - input(j, i)) > kSymmetryTolerance * scale)
                fail(ErrorKind::InvalidInput, "eig_sym: matrix is not symmetric at (" + std::to_string(i) + "," +
                                                  std::to_string(j) + ")");

    Matrix a = input;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (input(i, j) + input(j, i));

    // Rows of `basis` accumulate the eigenvectors.
    Matrix basis = Matrix::identity(n);
    const double threshold = kJacobiTolerance * scale;

    auto max_off_diagonal = [&] {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off = std::max(off, std::abs(a(i, j)));
        return off;
    };

    bool converged = false;
    for (int sweep = 0; sweep <= kMaxSweeps; ++sweep) {
        if (max_off_diagonal() <= threshold) {
            converged = true;
            break;
        }
        if (sweep == kMaxSweeps) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= threshold) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t = 0.0;
                if (std::abs(theta) > 1e150) {
                    t = 0.5 / theta;
                } else {
                    t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a(p, k);
                    const double akq = a(q, k);
                    const double new_p = c * akp - s * akq;
                    const double new_q = s * akp + c * akq;
                    a(p, k) = a(k, p) = new_p;
                    a(q, k) = a(k, q) = new_q;
                }
                a(p, p) -= t * apq;
                a(q, q) += t * apq;
                a(p, q) = a(q, p) = 0.0;

                auto row_p = basis.row(p);
                auto row_q = basis.row(q);
                for (std::size_t k = 0; k < n; ++k) {
                    const double vp = row_p[k];
                    const double vq = row_q[k];
                    row_p[k] = c * vp - s * vq;
                    row_q[k] = s * vp + c * vq;
                }
            }
        }
    }
    if (!converged)
        fail(ErrorKind::ConvergenceFailure,
             "eig_sym: Jacobi did not converge in " + std::to_string(kMaxSweeps) + " sweeps");

    for (std::size_t i = 0; i < n; ++i) fix_sign(basis.row(i));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (a(x, x) != a(y, y)) return a(x, x) > a(y, y);
        auto vx = basis.row(x);
        auto vy = basis.row(y);
        return std::lexicographical_compare(vy.begin(), vy.end(), vx.begin(), vx.end());
    });

    EigenResult result;
    result.eigenvalues.resize(n);
    result.eigenvectors = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        result.eigenvalues[i] = a(order[i], order[i]);
        auto v = basis.row(order[i]);
        for (std::size_t k = 0; k < n; ++k) result.eigenvectors(k, i) = v[k];
    }
    return result;
}

Vector project(const Matrix& p, const Vector& z) {
    require(p.cols() == z.size(), "project: matrix has " + std::to_string(p.cols()) + " columns but vector has " +
                                      std::to_string(z.size()) + " entries");
    Vector out(p.rows());
    for (std::size_t r = 0; r < p.rows(); ++r) {
        auto row = p.row(r);
        double sum = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) sum += row[c] * z[c];
        out[r] = sum;
    }
    return out;
}

Vector project_adjoint(const Matrix& p, const Vector& v) {
    require(p.rows() == v.size(), "project_adjoint: dimension mismatch");
    Vector out(p.cols());
    for (std::size_t r = 0; r < p.rows(); ++r) {
        const double vr = v[r];
        if (vr == 0.0) continue;
        auto row = p.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c] * vr;
    }
    return out;
}

Vector l2_normalize(const Vector& z) {
    const double norm = norm2(z.span());
    Vector out(z.size());
    if (norm <= kNormalizeFloor) return out;
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] / norm;
    return out;
}

Matrix orthonormalize_columns(Matrix a) {
    const std::size_t rows = a.rows();
    const std::size_t cols = a.cols();
    require(rows >= cols, "orthonormalize_columns: more columns than rows");
    for (std::size_t j = 0; j < cols; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t i = 0; i < j; ++i) {
                double proj = 0.0;
                for (std::size_t r = 0; r < rows; ++r) proj += a(r, i) * a(r, j);
                for (std::size_t r = 0; r < rows; ++r) a(r, j) -= proj * a(r, i);
            }
        }
        double norm = 0.0;
        for (std::size_t r = 0; r < rows; ++r) norm += a(r, j) * a(r, j);
        norm = std::sqrt(norm);
        if (norm < 1e-12) fail(ErrorKind::Numeric, "orthonormalize_columns: columns are linearly dependent");
        for (std::size_t r = 0; r < rows; ++r) a(r, j) /= norm;
    }
    return a;
}

}  // namespace fapd
