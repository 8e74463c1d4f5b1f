// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Criterion 9 drives the CLI
// binary end to end (path passed via --bench).

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "csat/bench.hpp"
#include "csv_util.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using csat::IstaConfig;
using csat::Matrix;
using csat::Rng;
using csat::Vec;
using csat::bench::ExperimentConfig;
using csat::bench::RunRecord;

namespace {

std::string g_bench_path;
fs::path g_workdir;

struct Outcome {
    bool pass = true;
    std::string detail;
};

// --- criterion 1: degeneracy equivalence --------------------------------

Outcome criterion_degeneracy() {
    Outcome out;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Rng rng(seed);
        const std::size_t n = 32, d = 16, d_k = 8;
        const Matrix x = csat::sample_gaussian(rng, n, d, 1.0);
        csat::CsatBlock block;
        block.weights = {csat::sample_gaussian(rng, d, d_k, 1.0),
                         csat::sample_gaussian(rng, d, d_k, 1.0),
                         csat::sample_gaussian(rng, d, d_k, 1.0)};
        block.phi_k = csat::make_measurement(csat::Ensemble::identity, n, n, 0);
        block.phi_v = csat::make_measurement(csat::Ensemble::identity, n, n, 0);
        block.dict = csat::Dictionary::identity(d_k);
        block.decoder = csat::DecoderConfig::none();
        const csat::CsatOutput got = csat::csat_forward(x, block);
        const auto qkv = csat::project_qkv(x, block.weights);
        const Matrix want = csat::full_attention(qkv.q, qkv.k, qkv.v);
        for (std::size_t i = 0; i < want.data.size(); ++i)
            worst = std::max(worst, std::abs(got.c_hat.data[i] - want.data[i]));
    }
    out.pass = worst <= 1e-10;
    out.detail = "max|csat - full| = " + csat::format_g17(worst) + " (tol 1e-10, 50 seeds)";
    return out;
}

// --- criterion 2: prox oracle --------------------------------------------

Outcome criterion_prox() {
    Outcome out;
    Rng rng(777);
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        const double x = 4.0 * rng.normal();
        const double theta = std::abs(rng.normal());
        const double got = csat::soft_threshold({x}, theta)[0];
        worst = std::max(worst, std::abs(got - oracle::prox_grid_argmin(x, theta)));
    }
    out.pass = worst <= 2e-4;
    out.detail = "max|prox - grid argmin| = " + csat::format_g17(worst) + " (tol 2e-4, 1000 draws)";
    return out;
}

// --- criterion 3: ISTA objective monotonicity -----------------------------

Outcome criterion_ista_monotone() {
    Outcome out;
    double worst_increase = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        Rng rng(3000 + rep);
        const Matrix a = csat::sample_gaussian(rng, 40, 80, 1.0 / std::sqrt(40.0));
        const Vec y = csat::sample_gaussian_vec(rng, 40, 1.0);
        csat::IstaTrace trace;
        csat::ista({a, y, 0.05}, IstaConfig{500, 1e-10, 1.01}, &trace);
        for (std::size_t i = 1; i < trace.objectives.size(); ++i)
            worst_increase =
                std::max(worst_increase, trace.objectives[i] - trace.objectives[i - 1]);
    }
    out.pass = worst_increase <= 1e-10;
    out.detail =
        "worst objective increase = " + csat::format_g17(worst_increase) + " (tol 1e-10)";
    return out;
}

// --- criterion 4: exact recovery ------------------------------------------

Outcome criterion_recovery() {
    Outcome out;
    ExperimentConfig cfg;
    cfg.seed = 1;
    cfg.out_dir = (g_workdir / "c4_recover").string();
    cfg.p = 256;
    cfg.s_list = {8};
    cfg.m_list = {64};
    cfg.num_seeds = 100;
    const RunRecord rec = csat::bench::cmd_recover(cfg);
    const double omp_rate = rec.summary.at("support_exact_rate[omp]");
    const double ista_rate = rec.summary.at("rel_error_le_0.05_rate[ista]");
    out.pass = omp_rate >= 0.95 && ista_rate >= 0.90;
    out.detail = "omp support-exact rate = " + csat::format_g17(omp_rate) +
                 " (>= 0.95), ista rel_error<=0.05 rate = " + csat::format_g17(ista_rate) +
                 " (>= 0.90)";
    return out;
}

// --- criterion 5: LISTA equivalence and dominance --------------------------

Outcome criterion_lista() {
    Outcome out;
    // (a) initialization equivalence on the seeded task shapes
    Rng rng(500);
    const Matrix a = csat::sample_gaussian(rng, 32, 64, 1.0 / std::sqrt(32.0));
    const double lipschitz = csat::estimated_lipschitz(a);
    double worst = 0.0;
    const csat::ListaParams init = csat::lista_init(a, 0.1, 5);
    for (int rep = 0; rep < 20; ++rep) {
        Vec alpha(64, 0.0);
        for (std::size_t idx : rng.sample_without_replacement(64, 4)) alpha[idx] = rng.normal();
        const Vec y = csat::matvec(a, alpha);
        const Vec via_lista = csat::lista_forward(init, y);
        const Vec via_ista =
            csat::ista_with_lipschitz({a, y, 0.1}, IstaConfig{5, 0.0, 1.01}, lipschitz).alpha;
        for (std::size_t i = 0; i < via_lista.size(); ++i)
            worst = std::max(worst, std::abs(via_lista[i] - via_ista[i]));
    }
    if (worst > 1e-12) {
        out.pass = false;
        out.detail = "init equivalence broke: max diff " + csat::format_g17(worst);
        return out;
    }

    // (b) trained dominance on the fixed seeded task
    ExperimentConfig cfg;
    cfg.seed = 42;
    cfg.out_dir = (g_workdir / "c5_lista").string();
    cfg.p = 64;
    cfg.q = 32;
    cfg.s_list = {4};
    cfg.train_size = 1000;
    cfg.test_size = 1000;
    cfg.lista_depth = 5;
    const RunRecord rec = csat::bench::cmd_lista(cfg);
    const double trained = rec.summary.at("nmse_lista_trained");
    const double ista_t = rec.summary.at("nmse_ista_at_t");
    out.pass = trained < ista_t;
    out.detail = "init-equivalence max diff = " + csat::format_g17(worst) +
                 " (tol 1e-12); held-out NMSE trained = " + csat::format_g17(trained) +
                 " < ista@5 = " + csat::format_g17(ista_t);
    return out;
}

// --- criterion 6: gradient check -------------------------------------------

Outcome criterion_gradcheck() {
    Outcome out;
    const double h = 1e-6;
    int checked = 0;
    double worst_rel = 0.0;
    for (std::uint64_t seed = 600; checked < 10 && seed < 640; ++seed) {
        Rng dict_rng(seed);
        const Matrix a = csat::sample_gaussian(dict_rng, 5, 8, 1.0 / std::sqrt(5.0));
        Rng sig_rng(seed + 1);
        std::vector<csat::ListaSample> data(6);
        for (auto& sample : data) {
            sample.alpha.assign(8, 0.0);
            for (std::size_t idx : sig_rng.sample_without_replacement(8, 2))
                sample.alpha[idx] = sig_rng.normal();
            sample.y = csat::matvec(a, sample.alpha);
        }
        csat::ListaParams params = csat::lista_init(a, 0.15, 3);
        Rng jitter(seed + 2);
        for (double& v : params.s_mat.data) v += 0.05 * jitter.normal();
        for (double& v : params.b_mat.data) v += 0.05 * jitter.normal();
        for (double& t : params.thetas) t = std::abs(t + 0.05 * jitter.normal());

        // the gradient-check point must be kink free
        bool near_kink = false;
        for (const auto& sample : data) {
            const Vec by = csat::matvec(params.b_mat, sample.y);
            Vec alpha(8, 0.0);
            for (std::size_t k = 0; k < params.depth; ++k) {
                Vec z = csat::matvec(params.s_mat, alpha);
                for (std::size_t i = 0; i < z.size(); ++i) z[i] += by[i];
                for (double zi : z)
                    if (std::abs(std::abs(zi) - params.thetas[k]) < 1e-3) near_kink = true;
                alpha = csat::soft_threshold(z, params.thetas[k]);
            }
        }
        if (near_kink) continue;
        ++checked;

        const csat::ListaGradients grads = csat::lista_loss_gradients(params, data);
        const auto loss_at = [&](const csat::ListaParams& p) {
            return csat::lista_loss_gradients(p, data).loss;
        };
        const auto rel = [&](double analytic, double numeric) {
            return std::abs(analytic - numeric) / std::max(std::abs(numeric), 1e-8);
        };
        for (std::size_t i = 0; i < params.s_mat.data.size(); ++i) {
            csat::ListaParams plus = params, minus = params;
            plus.s_mat.data[i] += h;
            minus.s_mat.data[i] -= h;
            worst_rel = std::max(
                worst_rel, rel(grads.g_s.data[i], (loss_at(plus) - loss_at(minus)) / (2 * h)));
        }
        for (std::size_t i = 0; i < params.b_mat.data.size(); ++i) {
            csat::ListaParams plus = params, minus = params;
            plus.b_mat.data[i] += h;
            minus.b_mat.data[i] -= h;
            worst_rel = std::max(
                worst_rel, rel(grads.g_b.data[i], (loss_at(plus) - loss_at(minus)) / (2 * h)));
        }
        for (std::size_t k = 0; k < params.thetas.size(); ++k) {
            csat::ListaParams plus = params, minus = params;
            plus.thetas[k] += h;
            minus.thetas[k] -= h;
            worst_rel = std::max(
                worst_rel, rel(grads.g_thetas[k], (loss_at(plus) - loss_at(minus)) / (2 * h)));
        }
    }
    out.pass = checked == 10 && worst_rel < 1e-4;
    out.detail = "worst relative gradient error = " + csat::format_g17(worst_rel) +
                 " (tol 1e-4) over " + std::to_string(checked) + "/10 kink-free seeds";
    return out;
}

// --- criterion 7: complexity shape -----------------------------------------

Outcome criterion_complexity() {
    Outcome out;
    for (std::uint64_t n : {512u, 1024u, 2048u}) {
        if (csat::full_attention_flops(2 * n, 64) != 4 * csat::full_attention_flops(n, 64) ||
            csat::compressed_attention_flops(2 * n, 256, 64) !=
                2 * csat::compressed_attention_flops(n, 256, 64)) {
            out.pass = false;
            out.detail = "analytic flop ratios not exact";
            return out;
        }
    }
    ExperimentConfig cfg;
    cfg.seed = 7;
    cfg.out_dir = (g_workdir / "c7_scale").string();
    cfg.n_list = {1024, 2048, 4096};
    cfg.scale_m = 256;
    cfg.d = 64;
    cfg.d_k = 64;
    cfg.warmup = 2;
    cfg.reps = 5;
    const RunRecord rec = csat::bench::cmd_scaling(cfg);
    const double c1 = rec.summary.at("time_ratio[csat,n=2048]");
    const double c2 = rec.summary.at("time_ratio[csat,n=4096]");
    const double f1 = rec.summary.at("time_ratio[full,n=2048]");
    const double f2 = rec.summary.at("time_ratio[full,n=4096]");
    const bool csat_ok = c1 >= 1.6 && c1 <= 2.8 && c2 >= 1.6 && c2 <= 2.8;
    const bool full_ok = f1 >= 3.2 && f2 >= 3.2;
    out.pass = csat_ok && full_ok;
    out.detail = "flop ratios exact; csat time ratios " + csat::format_g17(c1) + ", " +
                 csat::format_g17(c2) + " (in [1.6, 2.8]); full " + csat::format_g17(f1) + ", " +
                 csat::format_g17(f2) + " (>= 3.2)";
    return out;
}

// --- criterion 8: fidelity monotonicity ------------------------------------

Outcome criterion_fidelity() {
    Outcome out;
    ExperimentConfig cfg;
    cfg.seed = 1;
    cfg.out_dir = (g_workdir / "c8_attn").string();
    cfg.n = 128;
    cfg.d = 64;
    cfg.d_k = 64;
    cfg.s_list = {4};
    cfg.m_list = {16, 64};
    cfg.num_seeds = 20;
    cfg.decoders = {"none", "ista"};
    const RunRecord rec = csat::bench::cmd_attn_fidelity(cfg);
    const double win = rec.summary.at("paired_win_rate[ista,m=64<m=16]");
    const double ista16 = rec.summary.at("mean_rel_error[ista,m=16]");
    const double none16 = rec.summary.at("mean_rel_error[none,m=16]");
    const double ista64 = rec.summary.at("mean_rel_error[ista,m=64]");
    const double none64 = rec.summary.at("mean_rel_error[none,m=64]");
    out.pass = win >= 0.80 && ista16 < none16 && ista64 < none64;
    out.detail = "paired win rate m=64 vs m=16 = " + csat::format_g17(win) +
                 " (>= 0.8); ista vs none mean rel_error " + csat::format_g17(ista16) + " < " +
                 csat::format_g17(none16) + " at m=16, " + csat::format_g17(ista64) + " < " +
                 csat::format_g17(none64) + " at m=64";
    return out;
}

// --- criterion 9: CLI reproducibility ---------------------------------------

int run_cli(const std::string& args) {
    const std::string cmd = '"' + g_bench_path + "\" " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

Outcome criterion_reproducibility() {
    Outcome out;
    struct Cli {
        std::string name;
        std::string args;
        std::vector<std::string> csvs;
    };
    // the recover run goes through a flat key=value config file with the
    // output directory overridden on the command line
    const fs::path cfg_path = g_workdir / "c9_recover.cfg";
    {
        std::ofstream cfg(cfg_path);
        cfg << "seed=5\np=64\nm=16,32\ns=4\nnum-seeds=4\n";
    }
    const std::vector<Cli> commands = {
        {"recover", "recover --config " + cfg_path.string() + " --out %OUT%", {"recover.csv"}},
        {"rip", "rip --seed 6 --out %OUT% --n 64 --m 16,32 --s 2,4 --trials 20 "
                "--ensembles gaussian,rademacher",
         {"rip.csv"}},
        {"attn", "attn --seed 7 --out %OUT% --n 48 --d 16 --dk 16 --s 3 --m 8,24 --num-seeds 3",
         {"attn.csv"}},
        {"scale", "scale --seed 8 --out %OUT% --n-grid 64,128 --m 16 --d 8 --dk 8 --warmup 0 "
                  "--reps 1",
         {"scale.csv"}},
        {"lista", "lista --seed 9 --out %OUT% --p 24 --q 12 --s 3 --train-size 60 "
                  "--test-size 60 --depth 3 --epochs 5",
         {"lista_curve.csv", "lista_eval.csv"}},
    };
    for (const Cli& cli : commands) {
        const fs::path dir_a = g_workdir / ("c9_" + cli.name + "_a");
        const fs::path dir_b = g_workdir / ("c9_" + cli.name + "_b");
        for (const fs::path& dir : {dir_a, dir_b}) {
            std::string args = cli.args;
            const std::string token = "%OUT%";
            args.replace(args.find(token), token.size(), dir.string());
            if (run_cli(args) != 0) {
                out.pass = false;
                out.detail = cli.name + ": CLI exited nonzero";
                return out;
            }
        }
        for (const std::string& csv : cli.csvs) {
            const std::string a = csv_util::stable_content((dir_a / csv).string());
            const std::string b = csv_util::stable_content((dir_b / csv).string());
            if (a != b) {
                out.pass = false;
                out.detail = cli.name + "/" + csv + ": stable columns differ between runs";
                return out;
            }
        }
    }
    out.detail = "all 5 commands byte-identical on non-timing columns across repeat runs";
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--bench") g_bench_path = argv[i + 1];
        if (flag == "--workdir") g_workdir = argv[i + 1];
    }
    if (g_bench_path.empty() || g_workdir.empty()) {
        std::cerr << "usage: csat_acceptance --bench <csat_bench path> --workdir <dir>\n";
        return 2;
    }
    std::filesystem::create_directories(g_workdir);

    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
        double budget_seconds;
    };
    const std::vector<Criterion> criteria = {
        {1, "degeneracy-equivalence", criterion_degeneracy, 1.0},
        {2, "prox-oracle", criterion_prox, 1.0},
        {3, "ista-monotonicity", criterion_ista_monotone, 10.0},
        {4, "exact-recovery", criterion_recovery, 60.0},
        {5, "lista-equivalence-dominance", criterion_lista, 300.0},
        {6, "lista-gradient-check", criterion_gradcheck, 30.0},
        {7, "complexity-shape", criterion_complexity, 300.0},
        {8, "fidelity-monotonicity", criterion_fidelity, 120.0},
        {9, "cli-reproducibility", criterion_reproducibility, 300.0},
    };

    int failures = 0;
    for (const Criterion& criterion : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = criterion.run();
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.detail = std::string("exception: ") + e.what();
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_budget = seconds < criterion.budget_seconds;
        const bool pass = outcome.pass && in_budget;
        failures += pass ? 0 : 1;
        std::ostringstream line;
        line << (pass ? "PASS" : "FAIL") << "  " << criterion.id << ". " << criterion.name << ": "
             << outcome.detail << "  [" << csat::format_g17(seconds) << "s / budget "
             << csat::format_g17(criterion.budget_seconds) << "s]";
        if (!in_budget) line << "  (over budget)";
        std::cout << line.str() << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
