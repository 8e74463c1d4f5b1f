#pragma once

// Compressed-sensing attention pipeline: Q/K/V projection, key/value
// compression along the sequence axis, attention in the compressed domain,
// and row-wise sparse decoding of the context against a dictionary.
//
// Decoding model: the compressed context row Z_i is treated as a noisy
// observation of the true context C_i with identity feature-space
// measurement, so each row solves min 0.5||Z_i - Psi alpha||^2 + lambda
// ||alpha||_1 (sensing operator A = Psi). The general q x p sensing path
// lives in recovery.hpp.

#include <chrono>
#include <cstdint>
#include <thread>
#include <utility>

#include "csat/matrix.hpp"
#include "csat/recovery.hpp"
#include "csat/sensing.hpp"

namespace csat {

struct AttentionWeights {
    Matrix w_q, w_k, w_v;  // each d x d_k
};

enum class DictionaryKind { identity, dct };

struct Dictionary {
    Matrix psi;  // d_k x p, atoms as columns
    DictionaryKind kind = DictionaryKind::identity;
    std::size_t p = 0;

    static Dictionary identity(std::size_t d_k) {
        return {Matrix::identity(d_k), DictionaryKind::identity, d_k};
    }

    // Orthonormal DCT-II basis: atom k has entries
    // c_k cos(pi (2j+1) k / (2 d_k)), c_0 = sqrt(1/d_k), c_k = sqrt(2/d_k).
    static Dictionary dct(std::size_t d_k) {
        Matrix psi(d_k, d_k);
        const double n = static_cast<double>(d_k);
        for (std::size_t k = 0; k < d_k; ++k) {
            const double c = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
            for (std::size_t j = 0; j < d_k; ++j)
                psi(j, k) = c * std::cos(M_PI * (2.0 * j + 1.0) * k / (2.0 * n));
        }
        return {std::move(psi), DictionaryKind::dct, d_k};
    }
};

struct DecoderConfig {
    enum class Kind { none, ista, omp, lista };
    Kind kind = Kind::none;
    IstaConfig ista;
    double lambda_ratio = 0.05;  // per-row lambda = ratio * ||Psi^T Z_i||_inf
    std::size_t omp_sparsity = 4;
    ListaParams lista;

    static DecoderConfig none() { return {}; }
    static DecoderConfig make_ista(double ratio = 0.05, IstaConfig cfg = {}) {
        DecoderConfig d;
        d.kind = Kind::ista;
        d.lambda_ratio = ratio;
        d.ista = cfg;
        return d;
    }
    static DecoderConfig make_omp(std::size_t s) {
        DecoderConfig d;
        d.kind = Kind::omp;
        d.omp_sparsity = s;
        return d;
    }
    static DecoderConfig make_lista(ListaParams params) {
        DecoderConfig d;
        d.kind = Kind::lista;
        d.lista = std::move(params);
        return d;
    }
};

struct CsatOutput {
    Matrix z;      // n x d_k compressed context
    Matrix c_hat;  // n x d_k reconstructed context (== z when decoder is none)
    std::vector<SparseCode> alphas;
    std::vector<std::size_t> decode_iters;  // per row
    std::vector<double> decode_residuals;   // per row, ||Psi alpha - z_i||
    std::uint64_t decode_ns = 0;
};

struct Qkv {
    Matrix q, k, v;
};

inline Qkv project_qkv(const Matrix& x, const AttentionWeights& w) {
    if (x.cols != w.w_q.rows || !w.w_q.same_shape(w.w_k) || !w.w_q.same_shape(w.w_v))
        throw shape_error("project_qkv: x is " + shape_string(x) + ", w_q is " +
                          shape_string(w.w_q) + ", w_k is " + shape_string(w.w_k) +
                          ", w_v is " + shape_string(w.w_v));
    return {matmul(x, w.w_q), matmul(x, w.w_k), matmul(x, w.w_v)};
}

// softmax(Q K^T / sqrt(d_k)) V — the exact reference the compressed path is
// measured against.
inline Matrix full_attention(const Matrix& q, const Matrix& k, const Matrix& v) {
    if (q.cols != k.cols || k.rows != v.rows)
        throw shape_error("full_attention: q is " + shape_string(q) + ", k is " +
                          shape_string(k) + ", v is " + shape_string(v));
    Matrix scores = matmul_nt(q, k);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.cols));
    for (double& s : scores.data) s *= inv_sqrt;
    return matmul(softmax_rows(scores), v);
}

inline std::pair<Matrix, Matrix> compress_kv(const Matrix& k, const Matrix& v,
                                             const MeasurementMatrix& phi_k,
                                             const MeasurementMatrix& phi_v) {
    if (phi_k.n != k.rows || phi_v.n != v.rows)
        throw shape_error("compress_kv: phi_k is " + shape_string(phi_k.phi) + ", phi_v is " +
                          shape_string(phi_v.phi) + ", k is " + shape_string(k) + ", v is " +
                          shape_string(v));
    return {matmul(phi_k.phi, k), matmul(phi_v.phi, v)};
}

// softmax(Q Kt^T / sqrt(d_k)) Vt over the m compressed keys; rows of the
// attention matrix still sum to 1.
inline Matrix compressed_attention(const Matrix& q, const Matrix& k_t, const Matrix& v_t) {
    if (q.cols != k_t.cols || k_t.rows != v_t.rows)
        throw shape_error("compressed_attention: q is " + shape_string(q) + ", k_t is " +
                          shape_string(k_t) + ", v_t is " + shape_string(v_t));
    Matrix scores = matmul_nt(q, k_t);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.cols));
    for (double& s : scores.data) s *= inv_sqrt;
    return matmul(softmax_rows(scores), v_t);
}

namespace detail {

inline SparseCode decode_one_row(const Vec& z_row, const Dictionary& dict,
                                 const DecoderConfig& decoder, double lipschitz) {
    switch (decoder.kind) {
        case DecoderConfig::Kind::ista: {
            const Vec corr = matvec_t(dict.psi, z_row);
            double lam = 0.0;
            for (double c : corr) lam = std::max(lam, std::abs(c));
            lam *= decoder.lambda_ratio;
            return ista_with_lipschitz({dict.psi, z_row, lam}, decoder.ista, lipschitz);
        }
        case DecoderConfig::Kind::omp:
            return omp(dict.psi, z_row, decoder.omp_sparsity);
        case DecoderConfig::Kind::lista: {
            Vec alpha = lista_forward(decoder.lista, z_row);
            SparseCode code = finish_code(std::move(alpha), dict.psi, z_row);
            code.iterations = decoder.lista.depth;
            return code;
        }
        case DecoderConfig::Kind::none:
            break;
    }
    throw value_error("decode_one_row: decoder not configured");
}

}  // namespace detail

// Row-wise sparse decoding of Z against the dictionary. With parallel_rows
// the rows are split across threads; outputs are bit-identical to the
// sequential order because each row is independent.
inline CsatOutput decode_rows(const Matrix& z, const Dictionary& dict,
                              const DecoderConfig& decoder, bool parallel_rows = false) {
    CsatOutput out;
    out.z = z;
    if (decoder.kind == DecoderConfig::Kind::none) {
        out.c_hat = z;
        return out;
    }
    if (dict.psi.rows != z.cols)
        throw shape_error("decode_rows: psi is " + shape_string(dict.psi) + ", z is " +
                          shape_string(z));
    const std::size_t n = z.rows;
    out.c_hat = Matrix(n, z.cols);
    out.alphas.resize(n);
    out.decode_iters.resize(n);
    out.decode_residuals.resize(n);

    const double lipschitz = decoder.kind == DecoderConfig::Kind::ista
                                 ? estimated_lipschitz(dict.psi, decoder.ista.step_safety)
                                 : 0.0;

    const auto t0 = std::chrono::steady_clock::now();
    const auto decode_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            try {
                SparseCode code = detail::decode_one_row(z.row(i), dict, decoder, lipschitz);
                out.c_hat.set_row(i, matvec(dict.psi, code.alpha));
                out.decode_iters[i] = code.iterations;
                out.decode_residuals[i] = code.residual_norm;
                out.alphas[i] = std::move(code);
            } catch (const std::exception& e) {
                throw numerical_error("decode_rows: row " + std::to_string(i) + ": " + e.what());
            }
        }
    };
    if (!parallel_rows || n < 2) {
        decode_range(0, n);
    } else {
        const std::size_t workers =
            std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
        std::vector<std::thread> threads;
        std::vector<std::exception_ptr> errors(workers);
        const std::size_t chunk = (n + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            threads.emplace_back([&, w, lo, hi] {
                try {
                    decode_range(lo, hi);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : threads) t.join();
        for (const auto& err : errors)
            if (err) std::rethrow_exception(err);
    }
    out.decode_ns = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0)
            .count());
    return out;
}

struct CsatBlock {
    AttentionWeights weights;
    MeasurementMatrix phi_k, phi_v;  // both m x n over the sequence axis
    Dictionary dict;
    DecoderConfig decoder;
};

// Full pipeline: project -> compress -> compressed attention -> decode.
// Errors carry the failing stage's name.
inline CsatOutput csat_forward(const Matrix& x, const CsatBlock& block,
                               bool parallel_rows = false) {
    if (block.phi_k.n != x.rows || block.phi_v.n != x.rows || block.phi_k.m != block.phi_v.m)
        throw shape_error("csat_forward: phi_k is " + shape_string(block.phi_k.phi) +
                          ", phi_v is " + shape_string(block.phi_v.phi) + ", x is " +
                          shape_string(x));
    const auto staged = [](const char* stage, auto&& fn) {
        try {
            return fn();
        } catch (const shape_error& e) {
            throw shape_error(std::string(stage) + ": " + e.what());
        } catch (const value_error& e) {
            throw value_error(std::string(stage) + ": " + e.what());
        }
    };
    const Qkv qkv = staged("project_qkv", [&] { return project_qkv(x, block.weights); });
    const auto kv =
        staged("compress_kv", [&] { return compress_kv(qkv.k, qkv.v, block.phi_k, block.phi_v); });
    const Matrix z = staged("compressed_attention",
                            [&] { return compressed_attention(qkv.q, kv.first, kv.second); });
    return decode_rows(z, block.dict, block.decoder, parallel_rows);
}

// ---------------------------------------------------------------------------
// Analytic FLOP counters. Each softmax entry is charged 5 flops (max scan,
// subtract, exp, sum, divide) and each score entry 1 flop for the 1/sqrt(d_k)
// scale, so every term is exactly quadratic (full) or linear (compressed)
// in n and the doubling ratios are exact.
// ---------------------------------------------------------------------------

inline std::uint64_t full_attention_flops(std::uint64_t n, std::uint64_t d_k) {
    return n * n * (4 * d_k + 6);
}

inline std::uint64_t compressed_attention_flops(std::uint64_t n, std::uint64_t m,
                                                std::uint64_t d_k) {
    return n * m * (4 * d_k + 6);
}

inline std::uint64_t projection_flops(std::uint64_t n, std::uint64_t d, std::uint64_t d_k) {
    return 6 * n * d * d_k;  // three n x d by d x d_k products
}

inline std::uint64_t compress_flops(std::uint64_t n, std::uint64_t m, std::uint64_t d_k) {
    return 4 * n * m * d_k;  // two m x n by n x d_k products
}

inline std::uint64_t csat_pipeline_flops(std::uint64_t n, std::uint64_t d, std::uint64_t d_k,
                                         std::uint64_t m) {
    return projection_flops(n, d, d_k) + compress_flops(n, m, d_k) +
           compressed_attention_flops(n, m, d_k);
}

}  // namespace csat
