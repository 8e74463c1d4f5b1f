#pragma once

// Sparse recovery for y = A*alpha: soft-thresholding, ISTA (plain and
// lambda-annealed), orthogonal matching pursuit, and an unrolled LISTA
// decoder trained by manual reverse-mode differentiation.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "csat/matrix.hpp"
#include "csat/rng.hpp"

namespace csat {

struct RecoveryProblem {
    Matrix a;       // q x p sensing operator
    Vec y;          // observation, length q
    double lambda;  // l1 weight, >= 0
};

struct SparseCode {
    Vec alpha;
    std::vector<std::size_t> support;  // indices with alpha[i] != 0
    std::size_t s = 0;                 // |support|
    std::size_t iterations = 0;
    double residual_norm = 0.0;  // ||A alpha - y||_2
    bool degenerate = false;     // A was identically zero
    bool zero_residual = false;  // OMP hit a zero residual before s rounds
};

struct IstaConfig {
    std::size_t max_iter = 500;
    double tol = 1e-8;
    double step_safety = 1.01;  // multiplies the power-iteration estimate of L
};

inline Vec soft_threshold(const Vec& x, double theta) {
    if (theta < 0.0) throw value_error("soft_threshold: theta must be >= 0");
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double shrunk = std::abs(x[i]) - theta;
        out[i] = shrunk > 0.0 ? (x[i] > 0.0 ? shrunk : -shrunk) : 0.0;
    }
    return out;
}

inline double lasso_objective(const Matrix& a, const Vec& y, const Vec& alpha, double lambda) {
    const Vec r = matvec(a, alpha);
    double quad = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double d = r[i] - y[i];
        quad += d * d;
    }
    double l1 = 0.0;
    for (double v : alpha) l1 += std::abs(v);
    return 0.5 * quad + lambda * l1;
}

// step_safety * lambda_max(A^T A); the safety factor covers power iteration
// estimating L from below, which would otherwise break descent.
inline double estimated_lipschitz(const Matrix& a, double step_safety = 1.01) {
    const Matrix ata = matmul(transpose(a), a);
    return step_safety * power_iteration(ata);
}

namespace detail {

inline SparseCode finish_code(Vec alpha, const Matrix& a, const Vec& y) {
    SparseCode code;
    code.alpha = std::move(alpha);
    for (std::size_t i = 0; i < code.alpha.size(); ++i)
        if (code.alpha[i] != 0.0) code.support.push_back(i);
    code.s = code.support.size();
    Vec r = matvec(a, code.alpha);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
    code.residual_norm = norm2(r);
    return code;
}

}  // namespace detail

struct IstaTrace {
    std::vector<double> objectives;  // objective after each iterate
};

// ISTA with a precomputed Lipschitz estimate; used by decode paths that solve
// many observations against one operator.
inline SparseCode ista_with_lipschitz(const RecoveryProblem& pr, const IstaConfig& cfg,
                                      double lipschitz, IstaTrace* trace = nullptr) {
    if (pr.lambda < 0.0) throw value_error("ista: lambda must be >= 0");
    if (pr.a.rows != pr.y.size())
        throw shape_error("ista: a is " + shape_string(pr.a) + ", y has length " +
                          std::to_string(pr.y.size()));
    const std::size_t p = pr.a.cols;
    if (lipschitz <= 0.0) {
        SparseCode code = detail::finish_code(Vec(p, 0.0), pr.a, pr.y);
        code.degenerate = true;
        return code;
    }
    const double step = 1.0 / lipschitz;
    const double theta = pr.lambda / lipschitz;
    Vec alpha(p, 0.0);
    std::size_t it = 0;
    for (; it < cfg.max_iter; ++it) {
        Vec r = matvec(pr.a, alpha);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= pr.y[i];
        const Vec g = matvec_t(pr.a, r);
        Vec next(p);
        for (std::size_t i = 0; i < p; ++i) next[i] = alpha[i] - step * g[i];
        next = soft_threshold(next, theta);
        double diff = 0.0, base = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            const double d = next[i] - alpha[i];
            diff += d * d;
            base += alpha[i] * alpha[i];
        }
        alpha = std::move(next);
        if (trace) trace->objectives.push_back(lasso_objective(pr.a, pr.y, alpha, pr.lambda));
        if (std::sqrt(diff) / std::max(std::sqrt(base), 1e-12) < cfg.tol) {
            ++it;
            break;
        }
    }
    SparseCode code = detail::finish_code(std::move(alpha), pr.a, pr.y);
    code.iterations = it;
    return code;
}

inline SparseCode ista(const RecoveryProblem& pr, const IstaConfig& cfg = {},
                       IstaTrace* trace = nullptr) {
    return ista_with_lipschitz(pr, cfg, estimated_lipschitz(pr.a, cfg.step_safety), trace);
}

// Basis-pursuit surrogate: ISTA with lambda annealed over
// ratios * ||A^T y||_inf, warm-starting each stage from the previous one.
// An approximation to equality-constrained l1 minimization, not an exact
// BP solver.
inline SparseCode ista_annealed(const Matrix& a, const Vec& y,
                                const std::vector<double>& ratios = {1e-1, 1e-2, 1e-3, 1e-4},
                                const IstaConfig& cfg = {}) {
    if (ratios.empty()) throw value_error("ista_annealed: ratios must be nonempty");
    const double lipschitz = estimated_lipschitz(a, cfg.step_safety);
    if (lipschitz <= 0.0) {
        SparseCode code = detail::finish_code(Vec(a.cols, 0.0), a, y);
        code.degenerate = true;
        return code;
    }
    const Vec corr = matvec_t(a, y);
    double base = 0.0;
    for (double v : corr) base = std::max(base, std::abs(v));
    Vec alpha(a.cols, 0.0);
    std::size_t total_iters = 0;
    for (double ratio : ratios) {
        const double lambda = ratio * base;
        const double step = 1.0 / lipschitz;
        const double theta = lambda / lipschitz;
        for (std::size_t it = 0; it < cfg.max_iter; ++it) {
            Vec r = matvec(a, alpha);
            for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
            const Vec g = matvec_t(a, r);
            Vec next(a.cols);
            for (std::size_t i = 0; i < a.cols; ++i) next[i] = alpha[i] - step * g[i];
            next = soft_threshold(next, theta);
            double diff = 0.0, basen = 0.0;
            for (std::size_t i = 0; i < a.cols; ++i) {
                const double d = next[i] - alpha[i];
                diff += d * d;
                basen += alpha[i] * alpha[i];
            }
            alpha = std::move(next);
            ++total_iters;
            if (std::sqrt(diff) / std::max(std::sqrt(basen), 1e-12) < cfg.tol) break;
        }
    }
    SparseCode code = detail::finish_code(std::move(alpha), a, y);
    code.iterations = total_iters;
    return code;
}

namespace detail {

// Gaussian elimination with partial pivoting on the normal equations of the
// accumulated support. No silent regularization: a vanishing pivot is an
// error naming the support.
inline Vec solve_normal_equations(const Matrix& a, const std::vector<std::size_t>& support,
                                  const Vec& y) {
    const std::size_t k = support.size();
    Matrix g(k, k);
    Vec b(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i; j < k; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < a.rows; ++r) s += a(r, support[i]) * a(r, support[j]);
            g(i, j) = s;
            g(j, i) = s;
        }
        for (std::size_t r = 0; r < a.rows; ++r) b[i] += a(r, support[i]) * y[r];
    }
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < k; ++r)
            if (std::abs(g(r, col)) > std::abs(g(piv, col))) piv = r;
        if (std::abs(g(piv, col)) < 1e-12) {
            std::string msg = "omp: singular normal equations on support {";
            for (std::size_t i = 0; i < k; ++i)
                msg += (i ? "," : "") + std::to_string(support[i]);
            throw numerical_error(msg + "}");
        }
        if (piv != col) {
            for (std::size_t c = 0; c < k; ++c) std::swap(g(col, c), g(piv, c));
            std::swap(b[col], b[piv]);
        }
        for (std::size_t r = col + 1; r < k; ++r) {
            const double f = g(r, col) / g(col, col);
            for (std::size_t c = col; c < k; ++c) g(r, c) -= f * g(col, c);
            b[r] -= f * b[col];
        }
    }
    Vec x(k, 0.0);
    for (std::size_t i = k; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < k; ++j) s -= g(i, j) * x[j];
        x[i] = s / g(i, i);
    }
    return x;
}

}  // namespace detail

// Orthogonal matching pursuit: s rounds of greedy column selection by
// normalized residual correlation (ties break to the lowest index) followed
// by a least-squares refit on the accumulated support.
inline SparseCode omp(const Matrix& a, const Vec& y, std::size_t s) {
    if (a.rows != y.size())
        throw shape_error("omp: a is " + shape_string(a) + ", y has length " +
                          std::to_string(y.size()));
    if (s < 1 || s > std::min(a.rows, a.cols))
        throw value_error("omp: need 1 <= s <= min(q,p), got s=" + std::to_string(s));
    Vec col_norm(a.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* row = a.row_ptr(i);
        for (std::size_t j = 0; j < a.cols; ++j) col_norm[j] += row[j] * row[j];
    }
    for (std::size_t j = 0; j < a.cols; ++j) {
        if (col_norm[j] == 0.0)
            throw value_error("omp: column " + std::to_string(j) + " is zero");
        col_norm[j] = std::sqrt(col_norm[j]);
    }

    std::vector<std::size_t> support;
    std::vector<bool> in_support(a.cols, false);
    Vec residual = y;
    Vec coef;
    bool zero_residual = false;
    const double resid_floor = 1e-13 * std::max(1.0, norm2(y));
    for (std::size_t round = 0; round < s; ++round) {
        if (norm2(residual) <= resid_floor) {
            zero_residual = true;
            break;
        }
        const Vec corr = matvec_t(a, residual);
        std::size_t best = a.cols;
        double best_score = -1.0;
        for (std::size_t j = 0; j < a.cols; ++j) {
            if (in_support[j]) continue;
            const double score = std::abs(corr[j]) / col_norm[j];
            if (score > best_score) {  // strict: first maximum wins, lowest index
                best_score = score;
                best = j;
            }
        }
        support.push_back(best);
        in_support[best] = true;
        coef = detail::solve_normal_equations(a, support, y);
        residual = y;
        for (std::size_t i = 0; i < a.rows; ++i)
            for (std::size_t k = 0; k < support.size(); ++k)
                residual[i] -= a(i, support[k]) * coef[k];
    }

    Vec alpha(a.cols, 0.0);
    for (std::size_t k = 0; k < support.size(); ++k) alpha[support[k]] = coef[k];
    SparseCode code = detail::finish_code(std::move(alpha), a, y);
    code.iterations = support.size();
    code.zero_residual = zero_residual;
    return code;
}

// ---------------------------------------------------------------------------
// LISTA: unrolled ISTA with tied weights S (p x p), B (p x q) and a scalar
// threshold per layer. Layer recurrence: alpha <- eta_theta(S alpha + B y).
// ---------------------------------------------------------------------------

struct ListaParams {
    Matrix s_mat;  // p x p
    Matrix b_mat;  // p x q
    Vec thetas;    // per-layer thresholds, length depth, each >= 0
    std::size_t depth = 0;
};

// ISTA fixed point as initialization: S = I - A^T A / L, B = A^T / L,
// theta = lambda / L. With these weights lista_forward reproduces exactly
// `depth` ISTA iterations.
inline ListaParams lista_init(const Matrix& a, double lambda, std::size_t depth,
                              double step_safety = 1.01) {
    if (depth < 1) throw value_error("lista_init: depth must be >= 1");
    const double lipschitz = estimated_lipschitz(a, step_safety);
    if (lipschitz <= 0.0) throw value_error("lista_init: operator is identically zero");
    const std::size_t p = a.cols;
    ListaParams params;
    params.depth = depth;
    params.s_mat = matmul(transpose(a), a);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
            params.s_mat(i, j) = (i == j ? 1.0 : 0.0) - params.s_mat(i, j) / lipschitz;
    params.b_mat = transpose(a);
    for (double& v : params.b_mat.data) v /= lipschitz;
    params.thetas.assign(depth, lambda / lipschitz);
    return params;
}

inline void validate_lista(const ListaParams& params) {
    if (params.depth < 1 || params.thetas.size() != params.depth)
        throw value_error("lista: thetas length must equal depth >= 1");
    if (params.s_mat.rows != params.s_mat.cols || params.s_mat.rows != params.b_mat.rows)
        throw shape_error("lista: S is " + shape_string(params.s_mat) + ", B is " +
                          shape_string(params.b_mat));
    for (double t : params.thetas)
        if (t < 0.0) throw value_error("lista: thresholds must be >= 0");
}

inline Vec lista_forward(const ListaParams& params, const Vec& y) {
    validate_lista(params);
    if (params.b_mat.cols != y.size())
        throw shape_error("lista_forward: B is " + shape_string(params.b_mat) +
                          ", y has length " + std::to_string(y.size()));
    const std::size_t p = params.s_mat.rows;
    const Vec by = matvec(params.b_mat, y);
    Vec alpha(p, 0.0);
    for (std::size_t layer = 0; layer < params.depth; ++layer) {
        Vec z = matvec(params.s_mat, alpha);
        for (std::size_t i = 0; i < p; ++i) z[i] += by[i];
        alpha = soft_threshold(z, params.thetas[layer]);
    }
    return alpha;
}

struct ListaSample {
    Vec y;
    Vec alpha;  // ground-truth sparse code
};

struct ListaGradients {
    Matrix g_s;
    Matrix g_b;
    Vec g_thetas;
    double loss = 0.0;
};

// Full-batch loss (1/N) sum_i ||forward(y_i) - alpha_i*||^2 and its exact
// gradients by reverse-mode differentiation through the unrolled layers.
// Soft-threshold subgradient convention: d/dz = 1 where |z| > theta, else 0;
// d/dtheta = -sign(z) on active coordinates.
inline ListaGradients lista_loss_gradients(const ListaParams& params,
                                           const std::vector<ListaSample>& data) {
    validate_lista(params);
    if (data.empty()) throw value_error("lista_loss_gradients: dataset is empty");
    const std::size_t p = params.s_mat.rows;
    const std::size_t q = params.b_mat.cols;
    const std::size_t t = params.depth;
    const double inv_n = 1.0 / static_cast<double>(data.size());

    ListaGradients grads;
    grads.g_s = Matrix(p, p);
    grads.g_b = Matrix(p, q);
    grads.g_thetas.assign(t, 0.0);

    std::vector<Vec> pre(t), acts(t + 1);
    for (const ListaSample& sample : data) {
        if (sample.y.size() != q || sample.alpha.size() != p)
            throw shape_error("lista_loss_gradients: sample shape mismatch");
        const Vec by = matvec(params.b_mat, sample.y);
        acts[0].assign(p, 0.0);
        for (std::size_t k = 0; k < t; ++k) {
            Vec z = matvec(params.s_mat, acts[k]);
            for (std::size_t i = 0; i < p; ++i) z[i] += by[i];
            acts[k + 1] = soft_threshold(z, params.thetas[k]);
            pre[k] = std::move(z);
        }
        Vec g(p);
        for (std::size_t i = 0; i < p; ++i) {
            const double r = acts[t][i] - sample.alpha[i];
            grads.loss += r * r * inv_n;
            g[i] = 2.0 * r * inv_n;
        }
        for (std::size_t k = t; k-- > 0;) {
            Vec gz(p, 0.0);
            for (std::size_t i = 0; i < p; ++i) {
                if (std::abs(pre[k][i]) > params.thetas[k]) {
                    gz[i] = g[i];
                    grads.g_thetas[k] -= (pre[k][i] > 0.0 ? 1.0 : -1.0) * g[i];
                }
            }
            for (std::size_t i = 0; i < p; ++i) {
                if (gz[i] == 0.0) continue;
                double* srow = grads.g_s.row_ptr(i);
                const Vec& prev = acts[k];
                for (std::size_t j = 0; j < p; ++j) srow[j] += gz[i] * prev[j];
                double* brow = grads.g_b.row_ptr(i);
                for (std::size_t j = 0; j < q; ++j) brow[j] += gz[i] * sample.y[j];
            }
            if (k > 0) g = matvec_t(params.s_mat, gz);
        }
    }
    return grads;
}

struct TrainReport {
    std::vector<double> epoch_losses;  // loss evaluated after each step
    double initial_loss = 0.0;
    bool monotone = true;  // false flags the learning rate
};

// Full-batch gradient descent on the LISTA MSE. Thresholds are clamped at 0
// after each step to keep eta_theta well defined.
inline ListaParams lista_train(ListaParams params, const std::vector<ListaSample>& data,
                               std::size_t epochs, double lr, TrainReport* report = nullptr) {
    if (data.empty()) throw value_error("lista_train: dataset is empty");
    if (!(lr > 0.0)) throw value_error("lista_train: lr must be > 0");
    double prev_loss = 0.0;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        ListaGradients grads = lista_loss_gradients(params, data);
        if (!std::isfinite(grads.loss))
            throw numerical_error("lista_train: non-finite loss at epoch " +
                                  std::to_string(epoch) + " (lr=" + format_g17(lr) + ")");
        if (report && epoch == 0) report->initial_loss = grads.loss;
        for (std::size_t i = 0; i < params.s_mat.data.size(); ++i)
            params.s_mat.data[i] -= lr * grads.g_s.data[i];
        for (std::size_t i = 0; i < params.b_mat.data.size(); ++i)
            params.b_mat.data[i] -= lr * grads.g_b.data[i];
        for (std::size_t k = 0; k < params.thetas.size(); ++k)
            params.thetas[k] = std::max(params.thetas[k] - lr * grads.g_thetas[k], 0.0);
        if (report) {
            const double loss_after = lista_loss_gradients(params, data).loss;
            if (!std::isfinite(loss_after))
                throw numerical_error("lista_train: non-finite loss at epoch " +
                                      std::to_string(epoch) + " (lr=" + format_g17(lr) + ")");
            if (epoch > 0 && loss_after > prev_loss) report->monotone = false;
            report->epoch_losses.push_back(loss_after);
            prev_loss = loss_after;
        }
    }
    return params;
}

}  // namespace csat
