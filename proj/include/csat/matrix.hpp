#pragma once

// Dense row-major matrix substrate: products, row softmax, norms, spectral
// estimation, CSV export. All arithmetic is double precision.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace csat {

class shape_error : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class value_error : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class numerical_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class io_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace memory {

// Deterministic memory model: every double routed through Matrix storage is
// counted here. Peak is over the live count, not OS pages.
inline std::atomic<std::int64_t>& live_counter() {
    static std::atomic<std::int64_t> c{0};
    return c;
}

inline std::atomic<std::int64_t>& peak_counter() {
    static std::atomic<std::int64_t> c{0};
    return c;
}

inline std::int64_t live_elements() { return live_counter().load(); }
inline std::int64_t peak_elements() { return peak_counter().load(); }

inline void reset_peak() { peak_counter().store(live_counter().load()); }

inline void on_allocate(std::int64_t n) {
    const std::int64_t live = live_counter().fetch_add(n) + n;
    std::int64_t peak = peak_counter().load();
    while (live > peak && !peak_counter().compare_exchange_weak(peak, live)) {
    }
}

inline void on_deallocate(std::int64_t n) { live_counter().fetch_sub(n); }

}  // namespace memory

template <typename T>
struct TrackingAllocator {
    using value_type = T;
    using is_always_equal = std::true_type;

    TrackingAllocator() = default;
    template <typename U>
    TrackingAllocator(const TrackingAllocator<U>&) {}

    T* allocate(std::size_t n) {
        memory::on_allocate(static_cast<std::int64_t>(n));
        return static_cast<T*>(::operator new(n * sizeof(T)));
    }

    void deallocate(T* p, std::size_t n) {
        memory::on_deallocate(static_cast<std::int64_t>(n));
        ::operator delete(p);
    }

    friend bool operator==(const TrackingAllocator&, const TrackingAllocator&) { return true; }
};

using Vec = std::vector<double>;

struct Matrix {
    using Storage = std::vector<double, TrackingAllocator<double>>;

    std::size_t rows = 0;
    std::size_t cols = 0;
    Storage data;  // row-major, rows*cols entries

    Matrix() = default;

    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {
        if (r == 0 || c == 0) throw value_error("Matrix: dimensions must be positive");
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rws) {
        const std::size_t r = rws.size();
        if (r == 0) throw value_error("Matrix::from_rows: empty");
        const std::size_t c = rws.begin()->size();
        Matrix m(r, c);
        std::size_t i = 0;
        for (const auto& row : rws) {
            if (row.size() != c) throw shape_error("Matrix::from_rows: ragged rows");
            std::size_t j = 0;
            for (double v : row) m(i, j++) = v;
            ++i;
        }
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    const double* row_ptr(std::size_t i) const { return data.data() + i * cols; }
    double* row_ptr(std::size_t i) { return data.data() + i * cols; }

    Vec row(std::size_t i) const { return Vec(row_ptr(i), row_ptr(i) + cols); }

    void set_row(std::size_t i, const Vec& v) {
        if (v.size() != cols) throw shape_error("Matrix::set_row: length mismatch");
        for (std::size_t j = 0; j < cols; ++j) (*this)(i, j) = v[j];
    }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

inline std::string shape_string(const Matrix& m) {
    return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

inline bool all_finite(const Matrix& m) {
    for (double v : m.data)
        if (!std::isfinite(v)) return false;
    return true;
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Products
// ---------------------------------------------------------------------------

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw shape_error("matmul: inner dimensions differ, a is " + shape_string(a) + ", b is " +
                          shape_string(b));
    Matrix c(a.rows, b.cols);
    // i-k-j order keeps both streams row-major contiguous
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* crow = c.row_ptr(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const double* brow = b.row_ptr(k);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

// a * b^T without materializing the transpose
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols)
        throw shape_error("matmul_nt: column counts differ, a is " + shape_string(a) + ", b is " +
                          shape_string(b));
    Matrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* crow = c.row_ptr(i);
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.row_ptr(j);
            double sum = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) sum += arow[k] * brow[k];
            crow[j] = sum;
        }
    }
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

inline Vec matvec(const Matrix& a, const Vec& x) {
    if (a.cols != x.size())
        throw shape_error("matvec: a is " + shape_string(a) + ", x has length " +
                          std::to_string(x.size()));
    Vec y(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double sum = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) sum += arow[j] * x[j];
        y[i] = sum;
    }
    return y;
}

// a^T * x without materializing the transpose
inline Vec matvec_t(const Matrix& a, const Vec& x) {
    if (a.rows != x.size())
        throw shape_error("matvec_t: a is " + shape_string(a) + ", x has length " +
                          std::to_string(x.size()));
    Vec y(a.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        const double xi = x[i];
        for (std::size_t j = 0; j < a.cols; ++j) y[j] += arow[j] * xi;
    }
    return y;
}

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw shape_error("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

// ---------------------------------------------------------------------------
// Softmax, norms, spectral estimate
// ---------------------------------------------------------------------------

// Row-wise softmax with per-row max subtraction; stable for logits of
// magnitude well beyond 1e3.
inline Matrix softmax_rows(const Matrix& a) {
    Matrix out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* in = a.row_ptr(i);
        double* o = out.row_ptr(i);
        double mx = in[0];
        for (std::size_t j = 1; j < a.cols; ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (std::size_t j = 0; j < a.cols; ++j) o[j] /= sum;
    }
    return out;
}

inline double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return std::sqrt(s);
}

// Frobenius relative error ||a-b||_F / ||b||_F; falls back to ||a||_F when b
// is identically zero.
inline double rel_error(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b))
        throw shape_error("rel_error: a is " + shape_string(a) + ", b is " + shape_string(b));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        num += d * d;
        den += b.data[i] * b.data[i];
    }
    if (den == 0.0) return std::sqrt(num);
    return std::sqrt(num / den);
}

// Largest-eigenvalue estimate for a symmetric PSD matrix. Deterministic:
// starts from the normalized all-ones vector and stops when the Rayleigh
// quotient moves by less than tol relatively.
inline double power_iteration(const Matrix& a, std::size_t max_iter = 200, double tol = 1e-10) {
    if (a.rows != a.cols) throw shape_error("power_iteration: matrix is " + shape_string(a));
    const std::size_t n = a.rows;
    Vec v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    double lambda = 0.0;
    for (std::size_t it = 0; it < max_iter; ++it) {
        Vec w = matvec(a, v);
        const double wn = norm2(w);
        if (wn == 0.0) return 0.0;  // v in the null space; PSD with A*ones=0 treated as 0
        const double next = dot(v, w);
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / wn;
        if (it > 0 && std::abs(next - lambda) <= tol * std::max(std::abs(next), 1e-300)) {
            return next;
        }
        lambda = next;
    }
    return lambda;
}

// ---------------------------------------------------------------------------
// CSV export (one row per line, %.17g, comma separated)
// ---------------------------------------------------------------------------

inline std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_csv(const Matrix& m, std::ostream& os) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (j) os << ',';
            os << format_g17(m(i, j));
        }
        os << '\n';
    }
}

}  // namespace csat
