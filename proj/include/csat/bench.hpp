#pragma once

// Seeded experiment harness behind the CLI: sparse-recovery phase curves,
// RIP estimation grids, attention fidelity sweeps, LISTA-vs-ISTA training,
// and time/memory scaling. Every run writes CSV artifacts plus a
// manifest.txt echoing the resolved configuration.
//
// Reproducibility contract: with the same command, config, and seed the CSV
// bytes are identical except for wall-time columns (suffix `_ns`); the
// timestamp lives only in manifest.txt.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "csat/attention.hpp"
#include "csat/matrix.hpp"
#include "csat/recovery.hpp"
#include "csat/rng.hpp"
#include "csat/sensing.hpp"

namespace csat::bench {

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string out_dir;
    bool parallel_rows = false;

    // shared problem sizes
    std::size_t n = 128;
    std::size_t d = 64;
    std::size_t d_k = 64;
    std::size_t p = 256;
    std::size_t q = 32;
    std::vector<std::size_t> s_list = {8};
    std::vector<std::size_t> m_list = {16, 32, 64};
    std::size_t trials = 200;
    std::size_t num_seeds = 20;
    std::vector<std::uint64_t> seeds;  // explicit trial seeds; derived from `seed` when empty

    std::vector<std::string> ensembles = {"gaussian"};
    std::vector<std::string> decoders = {"none", "ista", "omp", "lista"};
    bool shared_phi = false;  // reuse Phi_K as Phi_V instead of independent seeds
    double lambda_ratio = 0.05;
    double row_scale = 3.0;  // scale of the synthetic compressible rows
    std::size_t ista_max_iter = 500;
    double ista_tol = 1e-8;
    std::vector<double> anneal_ratios = {1e-1, 1e-2, 1e-3, 1e-4};

    // lista command
    std::size_t lista_depth = 5;
    std::size_t epochs = 60;
    double lr = 0.02;
    double lista_lambda_ratio = 0.1;
    std::size_t train_size = 1000;
    std::size_t test_size = 1000;

    // scale command
    std::vector<std::size_t> n_list = {1024, 2048, 4096};
    std::size_t scale_m = 256;
    std::size_t warmup = 2;
    std::size_t reps = 5;
    std::string scale_decoder = "none";

    std::vector<std::uint64_t> resolved_seeds() const {
        if (!seeds.empty()) return seeds;
        std::vector<std::uint64_t> out(num_seeds);
        for (std::size_t i = 0; i < num_seeds; ++i) out[i] = seed + i;
        return out;
    }
};

struct RunRecord {
    std::string command;
    std::vector<std::pair<std::string, std::string>> config_echo;
    std::map<std::string, double> summary;
    std::vector<std::string> csv_paths;
    std::string manifest_path;
};

// ---------------------------------------------------------------------------
// CSV / manifest plumbing
// ---------------------------------------------------------------------------

class CsvFile {
  public:
    CsvFile(const std::filesystem::path& path, const std::vector<std::string>& header)
        : path_(path.string()), cols_(header.size()) {
        os_.open(path);
        if (!os_) throw io_error("cannot open '" + path_ + "' for writing");
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) os_ << ',';
            os_ << header[i];
        }
        os_ << '\n';
    }

    class Row {
      public:
        explicit Row(CsvFile& f) : f_(f) {}
        Row& cell(const std::string& v) {
            cells_.push_back(v);
            return *this;
        }
        Row& cell(double v) { return cell(format_g17(v)); }
        Row& cell(std::size_t v) { return cell(std::to_string(v)); }
        Row& cell(int v) { return cell(std::to_string(v)); }
        ~Row() noexcept(false) { f_.write_row(cells_); }

      private:
        CsvFile& f_;
        std::vector<std::string> cells_;
    };

    Row row() { return Row(*this); }

    void close() {
        os_.close();
        if (os_.fail()) throw io_error("write failure on '" + path_ + "'");
    }

    const std::string& path() const { return path_; }

  private:
    friend class Row;
    void write_row(const std::vector<std::string>& cells) {
        if (cells.size() != cols_)
            throw io_error("csv row has " + std::to_string(cells.size()) + " cells, expected " +
                           std::to_string(cols_));
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os_ << ',';
            os_ << cells[i];
        }
        os_ << '\n';
    }

    std::string path_;
    std::size_t cols_;
    std::ofstream os_;
};

inline std::string join_u64(const std::vector<std::uint64_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

inline std::string join_strings(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

inline std::string join_doubles(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_g17(v[i]);
    return s;
}

inline std::string timestamp_utc() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

inline void write_manifest(RunRecord& rec, const std::filesystem::path& dir) {
    const auto path = dir / "manifest.txt";
    std::ofstream os(path);
    if (!os) throw io_error("cannot open '" + path.string() + "' for writing");
    os << "command=" << rec.command << '\n';
    os << "timestamp=" << timestamp_utc() << '\n';
    for (const auto& [k, v] : rec.config_echo) os << k << '=' << v << '\n';
    os.close();
    if (os.fail()) throw io_error("write failure on '" + path.string() + "'");
    rec.manifest_path = path.string();
}

inline std::filesystem::path prepare_out_dir(const ExperimentConfig& cfg) {
    if (cfg.out_dir.empty()) throw value_error("--out is required");
    std::filesystem::path dir(cfg.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("cannot create output directory '" + cfg.out_dir + "': " + ec.message());
    return dir;
}

inline std::uint64_t now_ns() {
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                          std::chrono::steady_clock::now().time_since_epoch())
                                          .count());
}

inline double vec_rel_error(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw shape_error("vec_rel_error: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        num += d * d;
        den += b[i] * b[i];
    }
    if (den == 0.0) return std::sqrt(num);
    return std::sqrt(num / den);
}

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw value_error(msg);
}

inline void echo_common(RunRecord& rec, const ExperimentConfig& cfg) {
    rec.config_echo.emplace_back("seed", std::to_string(cfg.seed));
    rec.config_echo.emplace_back("out", cfg.out_dir);
    rec.config_echo.emplace_back("parallel_rows", cfg.parallel_rows ? "1" : "0");
    rec.config_echo.emplace_back("seeds", join_u64(cfg.resolved_seeds()));
}

// s-sparse vector with the given support size, Gaussian coefficients
inline Vec sparse_signal(Rng& rng, std::size_t p, std::size_t s) {
    Vec alpha(p, 0.0);
    if (s == 0) return alpha;
    const auto support = rng.sample_without_replacement(p, s);
    for (std::size_t idx : support) alpha[idx] = rng.normal();
    return alpha;
}

inline std::vector<std::size_t> nonzero_support(const Vec& v) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] != 0.0) out.push_back(i);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// recover: generate s-sparse alpha*, sense with a seeded ensemble, recover
// with annealed ISTA and OMP, record support-exact flags and relative errors.
// Per trial: Phi seed = trial seed, signal seed = trial seed + 1.
// ---------------------------------------------------------------------------

inline RunRecord cmd_recover(const ExperimentConfig& cfg) {
    detail::require(cfg.p >= 1, "recover: p must be positive");
    detail::require(!cfg.m_list.empty(), "recover: m list must be nonempty");
    detail::require(!cfg.s_list.empty(), "recover: s list must be nonempty");
    const auto seeds = cfg.resolved_seeds();
    detail::require(!seeds.empty(), "recover: seeds list must be nonempty");
    for (std::size_t m : cfg.m_list)
        detail::require(m >= 1 && m <= cfg.p, "recover: need 1 <= m <= p for every m");
    const Ensemble ensemble = ensemble_from_string(cfg.ensembles.at(0));

    const auto dir = prepare_out_dir(cfg);
    RunRecord rec;
    rec.command = "recover";
    detail::echo_common(rec, cfg);
    rec.config_echo.emplace_back("p", std::to_string(cfg.p));
    rec.config_echo.emplace_back("s_list", join_sizes(cfg.s_list));
    rec.config_echo.emplace_back("m_list", join_sizes(cfg.m_list));
    rec.config_echo.emplace_back("ensemble", to_string(ensemble));
    rec.config_echo.emplace_back("ista_max_iter", std::to_string(cfg.ista_max_iter));
    rec.config_echo.emplace_back("ista_tol", format_g17(cfg.ista_tol));
    rec.config_echo.emplace_back("anneal_ratios", join_doubles(cfg.anneal_ratios));

    CsvFile csv(dir / "recover.csv",
                {"m", "s", "seed", "solver", "support_exact", "rel_error", "iterations",
                 "wall_ns"});

    std::map<std::string, std::size_t> exact_count, err_ok_count, total;
    const IstaConfig ista_cfg{cfg.ista_max_iter, cfg.ista_tol, 1.01};
    for (std::size_t m : cfg.m_list) {
        for (std::size_t s : cfg.s_list) {
            for (std::uint64_t trial_seed : seeds) {
                const auto phi = make_measurement(ensemble, m, cfg.p, trial_seed);
                Rng sig_rng(trial_seed + 1);
                const Vec alpha_star = detail::sparse_signal(sig_rng, cfg.p, s);
                const Vec y = matvec(phi.phi, alpha_star);
                const auto true_support = detail::nonzero_support(alpha_star);

                struct Solved {
                    const char* name;
                    SparseCode code;
                    std::uint64_t ns;
                };
                std::vector<Solved> solved;
                if (s == 0) {
                    SparseCode zero;
                    zero.alpha.assign(cfg.p, 0.0);
                    solved.push_back({"ista", zero, 0});
                    solved.push_back({"omp", zero, 0});
                } else {
                    std::uint64_t t0 = now_ns();
                    SparseCode ista_code = ista_annealed(phi.phi, y, cfg.anneal_ratios, ista_cfg);
                    const std::uint64_t ista_ns = now_ns() - t0;
                    t0 = now_ns();
                    SparseCode omp_code = omp(phi.phi, y, s);
                    const std::uint64_t omp_ns = now_ns() - t0;
                    solved.push_back({"ista", std::move(ista_code), ista_ns});
                    solved.push_back({"omp", std::move(omp_code), omp_ns});
                }
                for (const auto& sv : solved) {
                    const bool exact = detail::nonzero_support(sv.code.alpha) == true_support;
                    const double err = vec_rel_error(sv.code.alpha, alpha_star);
                    csv.row()
                        .cell(m)
                        .cell(s)
                        .cell(std::to_string(trial_seed))
                        .cell(sv.name)
                        .cell(exact ? 1 : 0)
                        .cell(err)
                        .cell(sv.code.iterations)
                        .cell(sv.ns);
                    total[sv.name] += 1;
                    exact_count[sv.name] += exact ? 1 : 0;
                    err_ok_count[sv.name] += err <= 0.05 ? 1 : 0;
                }
            }
        }
    }
    csv.close();
    rec.csv_paths.push_back(csv.path());
    for (const auto& [name, cnt] : total) {
        rec.summary["support_exact_rate[" + name + "]"] =
            static_cast<double>(exact_count[name]) / static_cast<double>(cnt);
        rec.summary["rel_error_le_0.05_rate[" + name + "]"] =
            static_cast<double>(err_ok_count[name]) / static_cast<double>(cnt);
    }
    write_manifest(rec, dir);
    return rec;
}

// ---------------------------------------------------------------------------
// rip: estimate_rip across an ensembles x (m, s) grid; one CSV row per trial
// (deviation of one sparse draw), so the file has exactly trials x grid rows.
// Cell k uses Phi seed = seed + 2k and estimate seed = seed + 2k + 1.
// ---------------------------------------------------------------------------

inline RunRecord cmd_rip(const ExperimentConfig& cfg) {
    detail::require(cfg.n >= 1, "rip: n must be positive");
    detail::require(cfg.trials >= 1, "rip: trials must be >= 1");
    detail::require(!cfg.ensembles.empty(), "rip: ensembles must be nonempty");
    detail::require(!cfg.m_list.empty() && !cfg.s_list.empty(), "rip: m and s grids nonempty");
    for (std::size_t m : cfg.m_list)
        detail::require(m >= 1 && m <= cfg.n, "rip: need 1 <= m <= n for every m");

    const auto dir = prepare_out_dir(cfg);
    RunRecord rec;
    rec.command = "rip";
    detail::echo_common(rec, cfg);
    rec.config_echo.emplace_back("n", std::to_string(cfg.n));
    rec.config_echo.emplace_back("m_list", join_sizes(cfg.m_list));
    rec.config_echo.emplace_back("s_list", join_sizes(cfg.s_list));
    rec.config_echo.emplace_back("ensembles", join_strings(cfg.ensembles));
    rec.config_echo.emplace_back("trials", std::to_string(cfg.trials));

    CsvFile csv(dir / "rip.csv",
                {"ensemble", "m", "n", "s", "phi_seed", "trial", "deviation", "delta_hat"});
    std::size_t cell = 0;
    for (const std::string& ens_name : cfg.ensembles) {
        const Ensemble ens = ensemble_from_string(ens_name);
        for (std::size_t m : cfg.m_list) {
            for (std::size_t s : cfg.s_list) {
                const std::uint64_t phi_seed = cfg.seed + 2 * cell;
                const std::uint64_t est_seed = cfg.seed + 2 * cell + 1;
                ++cell;
                const auto phi = make_measurement(ens, m, cfg.n, phi_seed);
                std::vector<double> deviations;
                const RipEstimate est = estimate_rip(phi, s, cfg.trials, est_seed, &deviations);
                for (std::size_t t = 0; t < deviations.size(); ++t) {
                    csv.row()
                        .cell(ens_name)
                        .cell(m)
                        .cell(cfg.n)
                        .cell(s)
                        .cell(std::to_string(phi_seed))
                        .cell(t)
                        .cell(deviations[t])
                        .cell(est.delta_hat);
                }
                rec.summary["delta_hat[" + ens_name + ",m=" + std::to_string(m) +
                            ",s=" + std::to_string(s) + "]"] = est.delta_hat;
            }
        }
    }
    csv.close();
    rec.csv_paths.push_back(csv.path());
    write_manifest(rec, dir);
    return rec;
}

// ---------------------------------------------------------------------------
// attn: synthetic compressible inputs (rows of X drawn row_scale * Psi alpha
// with alpha s-sparse, identity Q/K/V weights so V rows stay sparse in the
// dictionary), swept over m and decoders, measured against full attention.
// Per (trial seed, m): Phi_K seed = trial*1000003 + 2m, Phi_V seed = +1.
// ---------------------------------------------------------------------------

inline RunRecord cmd_attn_fidelity(const ExperimentConfig& cfg) {
    detail::require(cfg.d == cfg.d_k,
                    "attn: requires d == d_k (identity projections keep V rows sparse)");
    detail::require(!cfg.m_list.empty(), "attn: m list must be nonempty");
    detail::require(!cfg.s_list.empty(), "attn: s list must be nonempty");
    const std::size_t s = cfg.s_list.front();
    detail::require(s >= 1 && s <= cfg.d_k, "attn: need 1 <= s <= d_k");
    const auto seeds = cfg.resolved_seeds();
    detail::require(!seeds.empty(), "attn: seeds list must be nonempty");
    for (std::size_t m : cfg.m_list)
        detail::require(m >= 1 && m <= cfg.n, "attn: need 1 <= m <= n for every m");
    const Ensemble ensemble = ensemble_from_string(cfg.ensembles.at(0));

    const auto dir = prepare_out_dir(cfg);
    RunRecord rec;
    rec.command = "attn";
    detail::echo_common(rec, cfg);
    rec.config_echo.emplace_back("n", std::to_string(cfg.n));
    rec.config_echo.emplace_back("d", std::to_string(cfg.d));
    rec.config_echo.emplace_back("d_k", std::to_string(cfg.d_k));
    rec.config_echo.emplace_back("s", std::to_string(s));
    rec.config_echo.emplace_back("m_list", join_sizes(cfg.m_list));
    rec.config_echo.emplace_back("ensemble", to_string(ensemble));
    rec.config_echo.emplace_back("shared_phi", cfg.shared_phi ? "1" : "0");
    rec.config_echo.emplace_back("decoders", join_strings(cfg.decoders));
    rec.config_echo.emplace_back("lambda_ratio", format_g17(cfg.lambda_ratio));
    rec.config_echo.emplace_back("row_scale", format_g17(cfg.row_scale));
    rec.config_echo.emplace_back("lista_depth", std::to_string(cfg.lista_depth));

    CsvFile csv(dir / "attn.csv",
                {"m", "seed", "decoder", "rel_error", "mean_decode_iters", "decode_ns"});

    const Dictionary dict = Dictionary::dct(cfg.d_k);
    const AttentionWeights weights{Matrix::identity(cfg.d), Matrix::identity(cfg.d),
                                   Matrix::identity(cfg.d)};

    // errors[decoder][m][seed index]
    std::map<std::string, std::map<std::size_t, std::vector<double>>> errors;
    for (std::uint64_t trial_seed : seeds) {
        Rng x_rng(trial_seed);
        Matrix x(cfg.n, cfg.d);
        for (std::size_t i = 0; i < cfg.n; ++i) {
            const Vec alpha = detail::sparse_signal(x_rng, cfg.d_k, s);
            Vec row = matvec(dict.psi, alpha);
            for (double& v : row) v *= cfg.row_scale;
            x.set_row(i, row);
        }
        const Qkv qkv = project_qkv(x, weights);
        const Matrix reference = full_attention(qkv.q, qkv.k, qkv.v);

        for (std::size_t m : cfg.m_list) {
            const std::uint64_t phi_base = trial_seed * 1000003ull + 2ull * m;
            CsatBlock block;
            block.weights = weights;
            block.phi_k = make_measurement(ensemble, m, cfg.n, phi_base);
            block.phi_v = cfg.shared_phi ? block.phi_k
                                         : make_measurement(ensemble, m, cfg.n, phi_base + 1);
            block.dict = dict;
            for (const std::string& dec_name : cfg.decoders) {
                if (dec_name == "none") {
                    block.decoder = DecoderConfig::none();
                } else if (dec_name == "ista") {
                    block.decoder = DecoderConfig::make_ista(
                        cfg.lambda_ratio, IstaConfig{cfg.ista_max_iter, cfg.ista_tol, 1.01});
                } else if (dec_name == "omp") {
                    block.decoder = DecoderConfig::make_omp(s);
                } else if (dec_name == "lista") {
                    // lambda from the mean row correlation scale of this run's Z
                    const auto kv = compress_kv(qkv.k, qkv.v, block.phi_k, block.phi_v);
                    const Matrix z = compressed_attention(qkv.q, kv.first, kv.second);
                    double mean_max = 0.0;
                    for (std::size_t i = 0; i < z.rows; ++i) {
                        const Vec corr = matvec_t(dict.psi, z.row(i));
                        double mx = 0.0;
                        for (double c : corr) mx = std::max(mx, std::abs(c));
                        mean_max += mx;
                    }
                    mean_max /= static_cast<double>(z.rows);
                    block.decoder = DecoderConfig::make_lista(
                        lista_init(dict.psi, cfg.lambda_ratio * mean_max, cfg.lista_depth));
                } else {
                    throw value_error("attn: unknown decoder '" + dec_name + "'");
                }
                const CsatOutput out = csat_forward(x, block, cfg.parallel_rows);
                const double err = rel_error(out.c_hat, reference);
                double mean_iters = 0.0;
                if (!out.decode_iters.empty()) {
                    for (std::size_t it : out.decode_iters)
                        mean_iters += static_cast<double>(it);
                    mean_iters /= static_cast<double>(out.decode_iters.size());
                }
                csv.row()
                    .cell(m)
                    .cell(std::to_string(trial_seed))
                    .cell(dec_name)
                    .cell(err)
                    .cell(mean_iters)
                    .cell(out.decode_ns);
                errors[dec_name][m].push_back(err);
            }
        }
    }
    csv.close();
    rec.csv_paths.push_back(csv.path());

    for (const auto& [dec_name, by_m] : errors) {
        for (const auto& [m, errs] : by_m) {
            const double mean =
                std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(errs.size());
            rec.summary["mean_rel_error[" + dec_name + ",m=" + std::to_string(m) + "]"] = mean;
        }
        if (by_m.size() >= 2) {
            const auto lo = *by_m.begin();
            const auto hi = *by_m.rbegin();
            std::size_t wins = 0;
            for (std::size_t i = 0; i < lo.second.size(); ++i)
                wins += hi.second[i] < lo.second[i] ? 1 : 0;
            rec.summary["paired_win_rate[" + dec_name + ",m=" + std::to_string(hi.first) +
                        "<m=" + std::to_string(lo.first) + "]"] =
                static_cast<double>(wins) / static_cast<double>(lo.second.size());
        }
    }
    write_manifest(rec, dir);
    return rec;
}

// ---------------------------------------------------------------------------
// scale: median wall time of `reps` runs after `warmup` warmups,
// single-threaded, for full_attention and csat_forward across the n grid,
// plus analytic FLOPs and tracked peak element counts with doubling ratios.
// ---------------------------------------------------------------------------

inline RunRecord cmd_scaling(const ExperimentConfig& cfg) {
    detail::require(!cfg.n_list.empty(), "scale: n list must be nonempty");
    detail::require(cfg.reps >= 1, "scale: reps must be >= 1");
    for (std::size_t n : cfg.n_list)
        detail::require(cfg.scale_m >= 1 && cfg.scale_m <= n, "scale: need 1 <= m <= n");

    const auto dir = prepare_out_dir(cfg);
    RunRecord rec;
    rec.command = "scale";
    detail::echo_common(rec, cfg);
    rec.config_echo.emplace_back("n_list", join_sizes(cfg.n_list));
    rec.config_echo.emplace_back("m", std::to_string(cfg.scale_m));
    rec.config_echo.emplace_back("d", std::to_string(cfg.d));
    rec.config_echo.emplace_back("d_k", std::to_string(cfg.d_k));
    rec.config_echo.emplace_back("warmup", std::to_string(cfg.warmup));
    rec.config_echo.emplace_back("reps", std::to_string(cfg.reps));
    rec.config_echo.emplace_back("decoder", cfg.scale_decoder);

    CsvFile csv(dir / "scale.csv",
                {"kernel", "n", "m", "d_k", "median_ns", "time_ratio", "flops", "flop_ratio",
                 "peak_elements"});

    const auto median_of = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };

    struct KernelRow {
        std::string kernel;
        std::size_t n;
        double median_ns;
        std::uint64_t flops;
        std::int64_t peak;
    };
    std::vector<KernelRow> rows;

    for (const char* kernel : {"full", "csat"}) {
        for (std::size_t n : cfg.n_list) {
            Rng x_rng(cfg.seed + n);
            const Matrix x = sample_gaussian(x_rng, n, cfg.d, 1.0);
            Rng w_rng(cfg.seed + 1);
            const double w_std = 1.0 / std::sqrt(static_cast<double>(cfg.d));
            const AttentionWeights weights{sample_gaussian(w_rng, cfg.d, cfg.d_k, w_std),
                                           sample_gaussian(w_rng, cfg.d, cfg.d_k, w_std),
                                           sample_gaussian(w_rng, cfg.d, cfg.d_k, w_std)};
            std::vector<double> times;
            std::int64_t peak = 0;
            std::uint64_t flops = 0;
            if (std::string(kernel) == "full") {
                const Qkv qkv = project_qkv(x, weights);
                flops = full_attention_flops(n, cfg.d_k);
                for (std::size_t r = 0; r < cfg.warmup + cfg.reps; ++r) {
                    memory::reset_peak();
                    const std::uint64_t t0 = now_ns();
                    const Matrix out = full_attention(qkv.q, qkv.k, qkv.v);
                    const std::uint64_t t1 = now_ns();
                    peak = memory::peak_elements();
                    if (r >= cfg.warmup) times.push_back(static_cast<double>(t1 - t0));
                    if (out.data.empty()) throw numerical_error("scale: empty output");
                }
            } else {
                CsatBlock block;
                block.weights = weights;
                block.phi_k = make_measurement(Ensemble::gaussian, cfg.scale_m, n, cfg.seed + 2 * n);
                block.phi_v =
                    make_measurement(Ensemble::gaussian, cfg.scale_m, n, cfg.seed + 2 * n + 1);
                block.dict = Dictionary::dct(cfg.d_k);
                if (cfg.scale_decoder == "none")
                    block.decoder = DecoderConfig::none();
                else if (cfg.scale_decoder == "ista")
                    block.decoder = DecoderConfig::make_ista(
                        cfg.lambda_ratio, IstaConfig{cfg.ista_max_iter, cfg.ista_tol, 1.01});
                else if (cfg.scale_decoder == "omp")
                    block.decoder = DecoderConfig::make_omp(cfg.s_list.front());
                else
                    throw value_error("scale: decoder must be none, ista, or omp");
                flops = compressed_attention_flops(n, cfg.scale_m, cfg.d_k);
                for (std::size_t r = 0; r < cfg.warmup + cfg.reps; ++r) {
                    memory::reset_peak();
                    const std::uint64_t t0 = now_ns();
                    const CsatOutput out = csat_forward(x, block, cfg.parallel_rows);
                    const std::uint64_t t1 = now_ns();
                    peak = memory::peak_elements();
                    if (r >= cfg.warmup) times.push_back(static_cast<double>(t1 - t0));
                    if (out.c_hat.data.empty()) throw numerical_error("scale: empty output");
                }
            }
            rows.push_back({kernel, n, median_of(times), flops, peak});
        }
    }

    std::map<std::string, const KernelRow*> prev;
    for (const KernelRow& r : rows) {
        const KernelRow* last = prev.count(r.kernel) ? prev[r.kernel] : nullptr;
        const double time_ratio =
            last ? r.median_ns / last->median_ns : std::numeric_limits<double>::quiet_NaN();
        const double flop_ratio = last ? static_cast<double>(r.flops) /
                                             static_cast<double>(last->flops)
                                       : std::numeric_limits<double>::quiet_NaN();
        csv.row()
            .cell(r.kernel)
            .cell(r.n)
            .cell(cfg.scale_m)
            .cell(cfg.d_k)
            .cell(r.median_ns)
            .cell(time_ratio)
            .cell(r.flops)
            .cell(flop_ratio)
            .cell(std::to_string(r.peak));
        rec.summary["median_ns[" + r.kernel + ",n=" + std::to_string(r.n) + "]"] = r.median_ns;
        rec.summary["flops[" + r.kernel + ",n=" + std::to_string(r.n) + "]"] =
            static_cast<double>(r.flops);
        rec.summary["peak_elements[" + r.kernel + ",n=" + std::to_string(r.n) + "]"] =
            static_cast<double>(r.peak);
        if (last) {
            rec.summary["time_ratio[" + r.kernel + ",n=" + std::to_string(r.n) + "]"] = time_ratio;
            rec.summary["flop_ratio[" + r.kernel + ",n=" + std::to_string(r.n) + "]"] = flop_ratio;
        }
        prev[r.kernel] = &r;
    }
    csv.close();
    rec.csv_paths.push_back(csv.path());
    write_manifest(rec, dir);
    return rec;
}

// ---------------------------------------------------------------------------
// lista: seeded synthetic dictionary task; trains LISTA at depth t and
// evaluates held-out NMSE against ISTA stopped at t iterations and ISTA run
// to convergence, all sharing the same lambda and Lipschitz estimate.
// Dictionary seed = seed, sample stream seed = seed + 1.
// ---------------------------------------------------------------------------

inline RunRecord cmd_lista(const ExperimentConfig& cfg) {
    detail::require(cfg.p >= 1 && cfg.q >= 1, "lista: p and q must be positive");
    detail::require(!cfg.s_list.empty(), "lista: s list must be nonempty");
    const std::size_t s = cfg.s_list.front();
    detail::require(s >= 1 && s <= cfg.p, "lista: need 1 <= s <= p");
    detail::require(cfg.train_size >= 1 && cfg.test_size >= 1,
                    "lista: train and test sizes must be positive");
    detail::require(cfg.lista_depth >= 1, "lista: depth must be >= 1");
    detail::require(cfg.lr > 0.0, "lista: lr must be > 0");

    const auto dir = prepare_out_dir(cfg);
    RunRecord rec;
    rec.command = "lista";
    detail::echo_common(rec, cfg);
    rec.config_echo.emplace_back("p", std::to_string(cfg.p));
    rec.config_echo.emplace_back("q", std::to_string(cfg.q));
    rec.config_echo.emplace_back("s", std::to_string(s));
    rec.config_echo.emplace_back("depth", std::to_string(cfg.lista_depth));
    rec.config_echo.emplace_back("epochs", std::to_string(cfg.epochs));
    rec.config_echo.emplace_back("lr", format_g17(cfg.lr));
    rec.config_echo.emplace_back("lista_lambda_ratio", format_g17(cfg.lista_lambda_ratio));
    rec.config_echo.emplace_back("train_size", std::to_string(cfg.train_size));
    rec.config_echo.emplace_back("test_size", std::to_string(cfg.test_size));

    Rng dict_rng(cfg.seed);
    const Matrix a = sample_gaussian(dict_rng, cfg.q, cfg.p, 1.0 / std::sqrt(double(cfg.q)));
    Rng sample_rng(cfg.seed + 1);
    const auto draw = [&](std::size_t count) {
        std::vector<ListaSample> out(count);
        for (auto& sample : out) {
            sample.alpha = detail::sparse_signal(sample_rng, cfg.p, s);
            sample.y = matvec(a, sample.alpha);
        }
        return out;
    };
    const std::vector<ListaSample> train = draw(cfg.train_size);
    const std::vector<ListaSample> test = draw(cfg.test_size);

    // lambda scales with the mean correlation magnitude of the training set
    double mean_max = 0.0;
    for (const auto& sample : train) {
        const Vec corr = matvec_t(a, sample.y);
        double mx = 0.0;
        for (double c : corr) mx = std::max(mx, std::abs(c));
        mean_max += mx;
    }
    mean_max /= static_cast<double>(train.size());
    const double lambda = cfg.lista_lambda_ratio * mean_max;
    rec.config_echo.emplace_back("lambda", format_g17(lambda));

    const ListaParams init = lista_init(a, lambda, cfg.lista_depth);
    TrainReport report;
    const ListaParams trained = lista_train(init, train, cfg.epochs, cfg.lr, &report);

    CsvFile curve(dir / "lista_curve.csv", {"epoch", "loss", "lr_flag"});
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < report.epoch_losses.size(); ++e) {
        const int flag = report.epoch_losses[e] > prev ? 1 : 0;
        curve.row().cell(e).cell(report.epoch_losses[e]).cell(flag);
        prev = report.epoch_losses[e];
    }
    curve.close();
    rec.csv_paths.push_back(curve.path());

    const double lipschitz = estimated_lipschitz(a);
    const auto nmse_of = [&](auto&& decode) {
        double acc = 0.0;
        for (const auto& sample : test) {
            const Vec alpha_hat = decode(sample.y);
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < alpha_hat.size(); ++i) {
                const double d = alpha_hat[i] - sample.alpha[i];
                num += d * d;
                den += sample.alpha[i] * sample.alpha[i];
            }
            acc += num / std::max(den, 1e-30);
        }
        return acc / static_cast<double>(test.size());
    };
    const double nmse_trained = nmse_of([&](const Vec& y) { return lista_forward(trained, y); });
    const double nmse_ista_t = nmse_of([&](const Vec& y) {
        return ista_with_lipschitz({a, y, lambda}, IstaConfig{cfg.lista_depth, 0.0, 1.01},
                                   lipschitz)
            .alpha;
    });
    const double nmse_ista_conv = nmse_of([&](const Vec& y) {
        return ista_with_lipschitz({a, y, lambda}, IstaConfig{5000, 1e-10, 1.01}, lipschitz).alpha;
    });

    CsvFile eval(dir / "lista_eval.csv", {"method", "nmse"});
    eval.row().cell("lista_trained").cell(nmse_trained);
    eval.row().cell("ista_at_t").cell(nmse_ista_t);
    eval.row().cell("ista_converged").cell(nmse_ista_conv);
    eval.close();
    rec.csv_paths.push_back(eval.path());

    rec.summary["nmse_lista_trained"] = nmse_trained;
    rec.summary["nmse_ista_at_t"] = nmse_ista_t;
    rec.summary["nmse_ista_converged"] = nmse_ista_conv;
    rec.summary["first_epoch_loss"] =
        report.epoch_losses.empty() ? 0.0 : report.epoch_losses.front();
    rec.summary["final_epoch_loss"] =
        report.epoch_losses.empty() ? 0.0 : report.epoch_losses.back();
    rec.summary["curve_monotone"] = report.monotone ? 1.0 : 0.0;
    write_manifest(rec, dir);
    return rec;
}

}  // namespace csat::bench
