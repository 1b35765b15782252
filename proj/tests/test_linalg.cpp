#include <cmath>

#include "doctest.h"

#include "fapd/error.hpp"
#include "fapd/linalg.hpp"
#include "oracles.hpp"

using namespace fapd;

namespace {

double reconstruction_error(const Matrix& a, const EigenResult& eig) {
    const std::size_t n = a.rows();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += eig.eigenvectors(i, k) * eig.eigenvalues[k] * eig.eigenvectors(j, k);
            worst = std::max(worst, std::abs(s - a(i, j)));
        }
    return worst;
}

double orthonormality_error(const Matrix& v) {
    const std::size_t n = v.cols();
    double worst = 0.0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            double s = 0.0;
            for (std::size_t r = 0; r < v.rows(); ++r) s += v(r, a) * v(r, b);
            worst = std::max(worst, std::abs(s - (a == b ? 1.0 : 0.0)));
        }
    return worst;
}

}  // namespace

TEST_CASE("covariance: two-sample hand case") {
    const Matrix cov = covariance(Matrix::from_rows({{1.0}, {-1.0}}));
    CHECK(cov.rows() == 1);
    CHECK(cov(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("covariance: identical rows give the zero matrix") {
    Matrix rows(6, 3);
    for (std::size_t r = 0; r < 6; ++r) {
        rows(r, 0) = 1.5;
        rows(r, 1) = -2.0;
        rows(r, 2) = 7.25;
    }
    const Matrix cov = covariance(rows);
    for (double v : cov.span()) CHECK(v == 0.0);
}

TEST_CASE("covariance: matches brute-force double loop") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const std::size_t m = 2 + seed % 63;
        const std::size_t d = 1 + seed % 16;
        const Matrix x = oracle::random_matrix(m, d, 10.0, seed);
        const Matrix fast = covariance(x);
        const Matrix slow = oracle::brute_covariance(x);
        for (std::size_t i = 0; i < d; ++i) {
            CHECK(fast(i, i) >= 0.0);
            for (std::size_t j = 0; j < d; ++j) {
                CHECK(std::abs(fast(i, j) - slow(i, j)) < 1e-12);
                CHECK(fast(i, j) == fast(j, i));
            }
        }
    }
    // The 5x3 example.
    const Matrix x = oracle::random_matrix(5, 3, 1.0, 99);
    const Matrix slow = oracle::brute_covariance(x);
    const Matrix fast = covariance(x);
    for (std::size_t i = 0; i < 9; ++i) CHECK(std::abs(fast.span()[i] - slow.span()[i]) < 1e-12);
}

TEST_CASE("covariance: error paths") {
    try {
        (void)covariance(Matrix(1, 3));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InsufficientSamples);
    }
    Matrix bad(3, 2, 1.0);
    bad(1, 1) = std::nan("");
    try {
        (void)covariance(bad);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidInput);
    }
}

TEST_CASE("eig_sym: diagonal matrix") {
    const auto eig = eig_sym(Matrix::from_rows({{3.0, 0.0}, {0.0, 1.0}}));
    CHECK(eig.eigenvalues[0] == 3.0);
    CHECK(eig.eigenvalues[1] == 1.0);
    CHECK(eig.eigenvectors(0, 0) == 1.0);
    CHECK(eig.eigenvectors(1, 0) == 0.0);
    CHECK(eig.eigenvectors(0, 1) == 0.0);
    CHECK(eig.eigenvectors(1, 1) == 1.0);
}

TEST_CASE("eig_sym: 2x2 coupled matrix matches the characteristic polynomial") {
    // lambda^2 - 4 lambda + 3 = 0 -> {3, 1}
    const auto eig = eig_sym(Matrix::from_rows({{2.0, 1.0}, {1.0, 2.0}}));
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(eig.eigenvalues[0] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(eig.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(eig.eigenvectors(0, 0) - r) < 1e-12);
    CHECK(std::abs(eig.eigenvectors(1, 0) - r) < 1e-12);
    CHECK(std::abs(eig.eigenvectors(0, 1) - r) < 1e-12);
    CHECK(std::abs(eig.eigenvectors(1, 1) + r) < 1e-12);
}

TEST_CASE("eig_sym: identity keeps an orthonormal basis") {
    const auto eig = eig_sym(Matrix::identity(4));
    for (double v : eig.eigenvalues) CHECK(v == 1.0);
    CHECK(orthonormality_error(eig.eigenvectors) < 1e-12);
    // Ties ordered by descending lexicographic eigenvector: e1, e2, e3, e4.
    CHECK(eig.eigenvectors == Matrix::identity(4));
}

TEST_CASE("eig_sym: random symmetric matrices") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const std::size_t n = 1 + seed % 24;
        const Matrix a = oracle::random_symmetric(n, 5.0, 1000 + seed);
        const auto eig = eig_sym(a);
        const double scale = std::max(1.0, norm_inf(a));
        CHECK(std::is_sorted(eig.eigenvalues.rbegin(), eig.eigenvalues.rend()));
        CHECK(orthonormality_error(eig.eigenvectors) < 1e-8);
        CHECK(reconstruction_error(a, eig) < 1e-8 * scale);
        for (std::size_t i = 0; i < n; ++i) {
            // Residual |A v - lambda v|_inf and the sign convention.
            double largest = 0.0;
            double signed_largest = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                double av = 0.0;
                for (std::size_t c = 0; c < n; ++c) av += a(r, c) * eig.eigenvectors(c, i);
                CHECK(std::abs(av - eig.eigenvalues[i] * eig.eigenvectors(r, i)) < 1e-8 * scale);
                if (std::abs(eig.eigenvectors(r, i)) > largest + 1e-12) {
                    largest = std::abs(eig.eigenvectors(r, i));
                    signed_largest = eig.eigenvectors(r, i);
                }
            }
            CHECK(signed_largest > 0.0);
        }
    }
}

TEST_CASE("eig_sym: small matrices agree with the high-precision reference") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t n = 1 + seed % 6;
        const Matrix a = oracle::random_symmetric(n, 3.0, 77 + seed);
        const auto eig = eig_sym(a);
        const auto ref = oracle::reference_eigenvalues(a);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(eig.eigenvalues[i] - ref[i]) < 1e-8);
    }
}

TEST_CASE("eig_sym: PSD covariance reconstructs") {
    const Matrix x = oracle::random_matrix(40, 12, 2.0, 5);
    const Matrix cov = covariance(x);
    const auto eig = eig_sym(cov);
    CHECK(reconstruction_error(cov, eig) < 1e-8 * std::max(1.0, norm_inf(cov)));
}

TEST_CASE("eig_sym: rejects asymmetric input") {
    try {
        (void)eig_sym(Matrix::from_rows({{1.0, 2.0}, {0.0, 1.0}}));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidInput);
    }
    CHECK_THROWS_AS((void)eig_sym(Matrix(2, 3)), Error);
}

TEST_CASE("eig_sym: zero matrix") {
    const auto eig = eig_sym(Matrix(3, 3));
    for (double v : eig.eigenvalues) CHECK(v == 0.0);
    CHECK(orthonormality_error(eig.eigenvectors) < 1e-15);
}

TEST_CASE("project: coordinate selection and rotation") {
    const Matrix select = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}});
    CHECK(project(select, Vector{5, 6, 7}) == Vector{5, 6});

    const Matrix rot = Matrix::from_rows({{0, 1}, {-1, 0}});
    const Vector out = project(rot, Vector{1, 0});
    CHECK(out[0] == 0.0);
    CHECK(out[1] == -1.0);
    // Counter-clockwise quarter turn maps e1 to e2.
    const Matrix ccw = Matrix::from_rows({{0, -1}, {1, 0}});
    CHECK(project(ccw, Vector{1, 0}) == Vector{0, 1});

    Matrix wide(8, 512);
    for (std::size_t i = 0; i < 8; ++i) wide(i, i) = 1.0;
    CHECK(project(wide, Vector(512, 1.0)).size() == 8);

    CHECK_THROWS_AS((void)project(select, Vector{1, 2}), Error);
}

TEST_CASE("project_adjoint is the transpose of project") {
    const Matrix p = oracle::random_matrix(3, 5, 1.0, 3);
    const Vector z = oracle::random_vector(5, 1.0, 4);
    const Vector v = oracle::random_vector(3, 1.0, 5);
    CHECK(dot(project(p, z).span(), v.span()) == doctest::Approx(dot(z.span(), project_adjoint(p, v).span())));
}

TEST_CASE("l2_normalize") {
    const Vector u = l2_normalize(Vector{3, 4});
    CHECK(u[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(u[1] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(l2_normalize(Vector{0, 1, 0}) == Vector{0, 1, 0});
    CHECK(l2_normalize(Vector{0, 0, 0}) == Vector{0, 0, 0});
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const Vector z = oracle::random_vector(1 + seed % 9, std::pow(10.0, static_cast<double>(seed % 7) - 3.0), seed);
        if (norm2(z.span()) > 1e-12) CHECK(std::abs(norm2(l2_normalize(z).span()) - 1.0) < 1e-12);
    }
}

TEST_CASE("orthonormalize_columns") {
    const Matrix q = orthonormalize_columns(oracle::random_matrix(7, 4, 1.0, 11));
    CHECK(orthonormality_error(q) < 1e-13);
}
