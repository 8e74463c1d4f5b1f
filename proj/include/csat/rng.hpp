#pragma once

// Seeded deterministic sampling. The generator is pinned down exactly so that
// every experiment is reproducible from its seed:
//   * engine: std::mt19937_64 (bit-exact across platforms by the standard)
//   * uniform doubles: (x >> 11) * 2^-53, giving [0, 1)
//   * normals: Marsaglia polar method (a spare value is cached, so draws come
//     in the same order on every run)
//   * bounded indices: rejection sampling on the high bits (unbiased)
// std::normal_distribution is avoided on purpose: its algorithm is
// implementation-defined and would break seed-stability across toolchains.

#include <cstdint>
#include <random>

#include "csat/matrix.hpp"

namespace csat {

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform double in [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // standard normal via the Marsaglia polar transform
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    // uniform index in [0, bound), rejection sampled
    std::size_t uniform_index(std::size_t bound) {
        if (bound == 0) throw value_error("Rng::uniform_index: bound must be positive");
        const std::uint64_t b = bound;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % b;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % b);
    }

    // k distinct indices from [0, n), in draw order (partial Fisher-Yates)
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        if (k > n) throw value_error("Rng::sample_without_replacement: k > n");
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + uniform_index(n - i);
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        return pool;
    }

  private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// i.i.d. N(0, std^2) entries, filled in row-major order
inline Matrix sample_gaussian(Rng& rng, std::size_t rows, std::size_t cols, double std_dev) {
    if (!(std_dev > 0.0)) throw value_error("sample_gaussian: std must be > 0");
    Matrix m(rows, cols);
    for (double& v : m.data) v = std_dev * rng.normal();
    return m;
}

inline Vec sample_gaussian_vec(Rng& rng, std::size_t n, double std_dev) {
    if (!(std_dev > 0.0)) throw value_error("sample_gaussian_vec: std must be > 0");
    Vec v(n);
    for (double& x : v) x = std_dev * rng.normal();
    return v;
}

}  // namespace csat
