#pragma once

// Measurement-matrix ensembles and empirical compressive-sensing diagnostics.
//
// Normalizations are chosen so that E||Phi x||^2 = ||x||^2 for unit x:
//   gaussian          entries ~ N(0, 1/m)
//   rademacher        entries in {+1/sqrt(m), -1/sqrt(m)}
//   partial_hadamard  m distinct rows of the Sylvester Hadamard matrix,
//                     entries +-1/sqrt(m); rows stay exactly orthogonal
//   identity          I_n (requires m == n)

#include <bit>
#include <cstdint>
#include <string>

#include "csat/matrix.hpp"
#include "csat/rng.hpp"

namespace csat {

enum class Ensemble { gaussian, rademacher, partial_hadamard, identity };

inline std::string to_string(Ensemble e) {
    switch (e) {
        case Ensemble::gaussian: return "gaussian";
        case Ensemble::rademacher: return "rademacher";
        case Ensemble::partial_hadamard: return "partial_hadamard";
        case Ensemble::identity: return "identity";
    }
    return "?";
}

inline Ensemble ensemble_from_string(const std::string& s) {
    if (s == "gaussian") return Ensemble::gaussian;
    if (s == "rademacher") return Ensemble::rademacher;
    if (s == "partial_hadamard") return Ensemble::partial_hadamard;
    if (s == "identity") return Ensemble::identity;
    throw value_error("unknown ensemble '" + s + "'");
}

struct MeasurementMatrix {
    Matrix phi;  // m x n
    Ensemble ensemble = Ensemble::gaussian;
    std::uint64_t seed = 0;
    std::size_t m = 0;
    std::size_t n = 0;
};

inline MeasurementMatrix make_measurement(Ensemble ensemble, std::size_t m, std::size_t n,
                                          std::uint64_t seed) {
    if (m < 1 || m > n)
        throw value_error("make_measurement: need 1 <= m <= n, got m=" + std::to_string(m) +
                          ", n=" + std::to_string(n));
    MeasurementMatrix mm;
    mm.ensemble = ensemble;
    mm.seed = seed;
    mm.m = m;
    mm.n = n;
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    switch (ensemble) {
        case Ensemble::gaussian:
            mm.phi = sample_gaussian(rng, m, n, scale);
            break;
        case Ensemble::rademacher: {
            mm.phi = Matrix(m, n);
            for (double& v : mm.phi.data) v = rng.uniform() < 0.5 ? -scale : scale;
            break;
        }
        case Ensemble::partial_hadamard: {
            if (!std::has_single_bit(n))
                throw value_error("make_measurement: partial_hadamard needs n a power of two, got n=" +
                                  std::to_string(n));
            const auto rows = rng.sample_without_replacement(n, m);
            mm.phi = Matrix(m, n);
            for (std::size_t i = 0; i < m; ++i) {
                const std::uint64_t r = rows[i];
                for (std::size_t j = 0; j < n; ++j) {
                    // Sylvester: H[r][j] = (-1)^popcount(r & j)
                    const bool neg = std::popcount(r & static_cast<std::uint64_t>(j)) & 1;
                    mm.phi(i, j) = neg ? -scale : scale;
                }
            }
            break;
        }
        case Ensemble::identity:
            if (m != n)
                throw value_error("make_measurement: identity ensemble requires m == n, got m=" +
                                  std::to_string(m) + ", n=" + std::to_string(n));
            mm.phi = Matrix::identity(n);
            break;
    }
    return mm;
}

struct RipEstimate {
    std::size_t s = 0;
    double delta_hat = 0.0;  // Monte Carlo lower bound on delta_s
    std::size_t trials = 0;
    std::uint64_t seed = 0;
};

// Draws `trials` unit-norm s-sparse vectors (random support, Gaussian
// coefficients) and returns the worst observed |  ||Phi x||^2 - 1 |. This is
// a lower bound on the true restricted isometry constant; certifying delta_s
// exactly is NP-hard.
inline RipEstimate estimate_rip(const MeasurementMatrix& mm, std::size_t s, std::size_t trials,
                                std::uint64_t seed, std::vector<double>* deviations = nullptr) {
    if (s < 1 || s > mm.n)
        throw value_error("estimate_rip: need 1 <= s <= n, got s=" + std::to_string(s));
    if (trials < 1) throw value_error("estimate_rip: trials must be >= 1");
    Rng rng(seed);
    RipEstimate est{s, 0.0, trials, seed};
    if (deviations) deviations->clear();
    for (std::size_t t = 0; t < trials; ++t) {
        const auto support = rng.sample_without_replacement(mm.n, s);
        Vec coef(s);
        double nrm = 0.0;
        for (std::size_t i = 0; i < s; ++i) {
            coef[i] = rng.normal();
            nrm += coef[i] * coef[i];
        }
        nrm = std::sqrt(nrm);
        if (nrm == 0.0) continue;  // measure-zero draw; skip rather than divide by zero
        double energy = 0.0;
        for (std::size_t i = 0; i < mm.m; ++i) {
            const double* row = mm.phi.row_ptr(i);
            double acc = 0.0;
            for (std::size_t k = 0; k < s; ++k) acc += row[support[k]] * coef[k] / nrm;
            energy += acc * acc;
        }
        const double dev = std::abs(energy - 1.0);
        if (deviations) deviations->push_back(dev);
        est.delta_hat = std::max(est.delta_hat, dev);
    }
    return est;
}

// max_{i != j} |<a_i, a_j>| / (||a_i|| ||a_j||) over columns of a
inline double mutual_coherence(const Matrix& a) {
    const std::size_t p = a.cols;
    Vec norms(p, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* row = a.row_ptr(i);
        for (std::size_t j = 0; j < p; ++j) norms[j] += row[j] * row[j];
    }
    for (std::size_t j = 0; j < p; ++j) {
        if (norms[j] == 0.0)
            throw value_error("mutual_coherence: column " + std::to_string(j) + " is zero");
        norms[j] = std::sqrt(norms[j]);
    }
    double best = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = j + 1; k < p; ++k) {
            double ip = 0.0;
            for (std::size_t i = 0; i < a.rows; ++i) ip += a(i, j) * a(i, k);
            best = std::max(best, std::abs(ip) / (norms[j] * norms[k]));
        }
    }
    return std::min(best, 1.0);
}

}  // namespace csat
