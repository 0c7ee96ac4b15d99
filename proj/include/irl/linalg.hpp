#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace irl {

/// Minimal dense matrix (row-major) for the solver-side linear algebra. Sizes
/// here are at most a few hundred, so plain Gaussian elimination is enough.
struct DenseMatrix {
    std::size_t n = 0;
    std::vector<double> a;  // n x n, row-major

    DenseMatrix() = default;
    explicit DenseMatrix(std::size_t size) : n(size), a(size * size, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return a[r * n + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * n + c]; }
};

/// Solves A x = b by Gaussian elimination with partial pivoting. A and b are
/// taken by value and consumed.
inline std::vector<double> solve_linear(DenseMatrix a, std::vector<double> b) {
    const std::size_t n = a.n;
    if (b.size() != n) throw std::invalid_argument("solve_linear: size mismatch");
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        if (std::abs(a(pivot, col)) < 1e-12)
            throw std::runtime_error("solve_linear: singular matrix");
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a(pivot, c), a(col, c));
            std::swap(b[pivot], b[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t ri = n; ri-- > 0;) {
        double s = b[ri];
        for (std::size_t c = ri + 1; c < n; ++c) s -= a(ri, c) * x[c];
        x[ri] = s / a(ri, ri);
    }
    return x;
}

/// Inverse via Gauss-Jordan with partial pivoting.
inline DenseMatrix invert(const DenseMatrix& m) {
    const std::size_t n = m.n;
    DenseMatrix a = m;
    DenseMatrix inv(n);
    for (std::size_t i = 0; i < n; ++i) inv(i, i) = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        if (std::abs(a(pivot, col)) < 1e-12) throw std::runtime_error("invert: singular matrix");
        if (pivot != col)
            for (std::size_t c = 0; c < n; ++c) {
                std::swap(a(pivot, c), a(col, c));
                std::swap(inv(pivot, c), inv(col, c));
            }
        const double d = a(col, col);
        for (std::size_t c = 0; c < n; ++c) {
            a(col, c) /= d;
            inv(col, c) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a(r, col);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c) {
                a(r, c) -= f * a(col, c);
                inv(r, c) -= f * inv(col, c);
            }
        }
    }
    return inv;
}

}  // namespace irl
