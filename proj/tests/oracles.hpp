#pragma once

// Test-only oracles, kept independent of the implementation paths they
// verify: naive matmul, Gaussian elimination, a characteristic-root scan for
// the largest eigenvalue, and a brute-force 1-D prox minimizer.

#include <cmath>
#include <vector>

#include "csat/matrix.hpp"

namespace oracle {

// plain i-j-k dot-product form (the library kernel uses i-k-j accumulation)
inline csat::Matrix naive_matmul(const csat::Matrix& a, const csat::Matrix& b) {
    csat::Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    }
    return c;
}

// dense solve by Gaussian elimination with partial pivoting
inline csat::Vec gauss_solve(csat::Matrix a, csat::Vec b) {
    const std::size_t n = a.rows;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(piv, c));
            std::swap(b[col], b[piv]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
            b[r] -= f * b[col];
        }
    }
    csat::Vec x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
        x[i] = s / a(i, i);
    }
    return x;
}

inline double determinant(csat::Matrix a) {
    const std::size_t n = a.rows;
    double det = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (a(piv, col) == 0.0) return 0.0;
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(piv, c));
            det = -det;
        }
        det *= a(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
        }
    }
    return det;
}

// Largest eigenvalue of a symmetric matrix by brute force on the
// characteristic polynomial: scan det(A - t I) downward from the Gershgorin
// bound until the sign flips, then bisect.
inline double largest_eigenvalue_scan(const csat::Matrix& a) {
    const std::size_t n = a.rows;
    double upper = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double radius = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) radius += std::abs(a(i, j));
        upper = std::max(upper, a(i, i) + radius);
    }
    upper += 1.0;
    const auto char_poly = [&](double t) {
        csat::Matrix shifted = a;
        for (std::size_t i = 0; i < n; ++i) shifted(i, i) -= t;
        return determinant(shifted);
    };
    // above all eigenvalues the polynomial has sign (-1)^n
    const double step = upper / 4096.0;
    double hi = upper;
    double hi_val = char_poly(hi);
    double lo = hi;
    bool found = false;
    for (double t = upper - step; t > -step; t -= step) {
        const double v = char_poly(t);
        if ((v < 0.0) != (hi_val < 0.0) || v == 0.0) {
            lo = t;
            found = true;
            break;
        }
        hi = t;
        hi_val = v;
    }
    if (!found) return 0.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double v = char_poly(mid);
        if (v == 0.0) return mid;
        if ((v < 0.0) == (hi_val < 0.0)) {
            hi = mid;
            hi_val = v;
        } else {
            lo = mid;
        }
        if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) break;
    }
    return 0.5 * (lo + hi);
}

// argmin over a grid of 0.5*(a - x)^2 + theta*|a|
inline double prox_grid_argmin(double x, double theta, double grid_step = 1e-4) {
    const double span = std::abs(x) + theta + 1.0;
    double best_a = -span, best_val = 0.5 * (best_a - x) * (best_a - x) + theta * std::abs(best_a);
    for (double a = -span; a <= span; a += grid_step) {
        const double val = 0.5 * (a - x) * (a - x) + theta * std::abs(a);
        if (val < best_val) {
            best_val = val;
            best_a = a;
        }
    }
    return best_a;
}

}  // namespace oracle
