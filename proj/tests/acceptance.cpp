// Acceptance gate: one criterion per invocation (argv[1] in 1..10), one
// PASS/FAIL line on stdout, exit 0 on pass / 1 on fail / 2 on usage error.
// Every criterion is deterministic: all seeds are pinned.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fbmlab/fbm.hpp"
#include "fbmlab/integrands.hpp"
#include "fbmlab/isometry.hpp"
#include "fbmlab/kernel.hpp"
#include "fbmlab/model.hpp"
#include "fbmlab/projection.hpp"
#include "fbmlab/quadrature.hpp"
#include "fbmlab/rng.hpp"
#include "fbmlab/stats.hpp"
#include "fbmlab/stratonovich.hpp"

using namespace fbmlab;

namespace {

GridSpec make_grid(int n, double T, double eps_max) {
    GridSpec g;
    g.n_steps = n;
    g.T = T;
    g.eps_max = eps_max;
    return g;
}

// --- 1: inequality lemma suite over the H range ----------------------------
bool criterion_1() {
    bool ok = true;
    for (double H : {0.26, 0.30, 0.35, 0.40, 0.45, 0.49}) {
        const SuiteReport rep = run_lemma_suite(64, ModelParams(H, 1.0, 1));
        double worst = -1.0;
        for (const auto& e : rep.entries) worst = std::max(worst, e.max_violation);
        std::printf("  H=%.2f entries=%zu worst_violation=%.3e %s\n", H,
                    rep.entries.size(), worst, rep.all_pass() ? "ok" : "VIOLATED");
        ok = ok && rep.all_pass();
    }
    return ok;
}

// --- 2: exact Gaussian oracle for random step functions --------------------
bool criterion_2() {
    const ModelParams p(0.4, 1.0, 1);
    CounterRng rng(7001, 0, 0);
    // One shared ensemble for the Monte Carlo side.
    const GridSpec g = make_grid(2048, 1.0, 32.0 / 2048.0);
    const PathEnsemble ens = sample_circulant(g, p, 10000, 7002);
    const std::vector<int> radii = {32, 16, 8};
    MeshSpec mesh;
    mesh.n = 4096;
    const double delta = p.T / static_cast<double>(mesh.n);

    bool ok = true;
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 2 + static_cast<int>(rng.next_uniform() * 7.0);  // 2..8
        StepFunction f;
        f.breakpoints.push_back(0.0);
        std::vector<double> inner;
        for (int i = 0; i + 1 < m; ++i) {
            inner.push_back(0.05 + 0.9 * rng.next_uniform());
        }
        std::sort(inner.begin(), inner.end());
        for (std::size_t i = 0; i < inner.size(); ++i) {
            // enforce separation so levels are resolvable on the mesh
            if (i > 0 && inner[i] - inner[i - 1] < 1e-3) inner[i] = inner[i - 1] + 1e-3;
            f.breakpoints.push_back(inner[i]);
        }
        f.breakpoints.push_back(1.0);
        for (int i = 0; i < m; ++i) {
            f.levels.push_back({4.0 * rng.next_uniform() - 2.0});
        }
        const double exact = rkhs_norm_step(f, p);

        // quadrature with the step values cached at cell centers
        std::vector<double> table(static_cast<std::size_t>(mesh.n));
        for (int i = 0; i < mesh.n; ++i) {
            table[static_cast<std::size_t>(i)] =
                f.value_at((static_cast<double>(i) + 0.5) * delta, 0);
        }
        const double quad = rkhs_norm_quadrature(
            [&](double t) {
                auto idx = static_cast<std::size_t>(t / delta);
                if (idx >= table.size()) idx = table.size() - 1;
                return table[idx];
            },
            mesh, p);
        const double quad_rel = std::abs(quad - exact) / std::max(exact, 1e-300);

        // Monte Carlo at the smallest radius, with the drift to the next
        // radius folded into the combined standard error
        const IntegrandSpec spec = make_step(f);
        const std::vector<MCEstimate> est = mc_second_moment(ens, spec, radii);
        const MCEstimate& last = est.back();
        const double drift = std::abs(last.value - est[est.size() - 2].value);
        const double combined = last.std_error + drift;
        const double mc_gap = std::abs(last.value - exact);
        const bool pass = quad_rel <= 0.02 && mc_gap <= 3.0 * combined;
        if (!pass || trial < 3) {
            std::printf(
                "  trial=%d steps=%d exact=%.5f quad_rel=%.4f mc=%.5f+-%.5f "
                "drift=%.5f %s\n",
                trial, m, exact, quad_rel, last.value, last.std_error, drift,
                pass ? "ok" : "FAILED");
        }
        ok = ok && pass;
    }
    return ok;
}

// --- 3: projection converges to the limit kernel ---------------------------
bool criterion_3() {
    const ModelParams p(0.4, 1.0, 2);
    const double s = 0.5, t = 1.0;
    Eigen::VectorXd Bs(2), Bt(2);
    Bs << 0.3, -0.7;
    Bt << 1.1, 0.4;
    const Derivatives der = eval_derivatives(s, t, p);
    const Eigen::MatrixXd limit =
        W_eval(s, t, Bs, Bt, p, WRepresentation::BASE) +
        der.d2R * Eigen::MatrixXd::Identity(p.d, p.d);
    const double nl = limit.norm();
    double prev = 1e300;
    bool ok = true;
    double final_ratio = 1e300;
    for (int k = 6; k <= 14; ++k) {
        const double eps = std::ldexp(1.0, -k);
        const ProjectionSample ps = project_lambda0(eps, eps, s, t, Bs, Bt, p);
        const double ratio = (ps.lambda0 - limit).norm() / nl;
        std::printf("  k=%d ratio=%.3e\n", k, ratio);
        if (ratio > prev * (1.0 + 1e-9)) ok = false;  // tail must decrease
        prev = ratio;
        final_ratio = ratio;
    }
    return ok && final_ratio <= 1e-3;
}

// --- 4: closed-form second moments of the limit fields ---------------------
bool criterion_4() {
    const ModelParams p(0.4, 1.0, 2);
    const std::vector<std::pair<double, double>> probes = {
        {0.2, 0.7}, {0.3, 0.9}, {0.5, 1.0}, {0.1, 0.4}, {0.6, 0.8}};
    const std::size_t M = 100000;
    bool ok = true;
    int pi = 0;
    for (const auto& [s, t] : probes) {
        const ClosedNorms cn = closed_norms(s, t, p);
        const double gs = p.gamma(s), gt = p.gamma(t);
        const double r = eval_R(s, t, p);
        const double c = r / std::sqrt(gs);
        const double resid = std::sqrt(std::max(gt - c * c, 0.0));
        CounterRng rng(8101, static_cast<std::uint64_t>(pi), 0);
        MeanAccumulator accW, accM;
        Eigen::VectorXd Bs(p.d), Bt(p.d);
        for (std::size_t i = 0; i < M; ++i) {
            for (int a = 0; a < p.d; ++a) {
                const double z1 = rng.next_normal();
                const double z2 = rng.next_normal();
                Bs(a) = std::sqrt(gs) * z1;
                Bt(a) = c * z1 + resid * z2;
            }
            accW.add(W_eval(s, t, Bs, Bt, p).squaredNorm());
            accM.add(M_eval(t, Bt, p).squaredNorm());
        }
        const MCEstimate ew = accW.estimate();
        const MCEstimate em = accM.estimate();
        const double w2 = cn.normW * cn.normW;
        const double m2 = cn.normM_at_t * cn.normM_at_t;
        const double zw = (ew.value - w2) / ew.std_error;
        const double zm = (em.value - m2) / em.std_error;
        std::printf("  (s,t)=(%.1f,%.1f) zW=%.2f zM=%.2f\n", s, t, zw, zm);
        ok = ok && std::abs(zw) <= 3.0 && std::abs(zm) <= 3.0;
        ++pi;
    }
    return ok;
}

// --- 5: anti-symmetric pairing is mean zero --------------------------------
bool criterion_5() {
    const ModelParams p(0.4, 1.0, 2);
    const GridSpec g = make_grid(1024, 1.0, 16.0 / 1024.0);
    const PathEnsemble ens = sample_circulant(g, p, 10000, 9001);
    IntegrandSpec swap;
    swap.name = "swap";
    swap.kind = IntegrandKind::HOLDER;
    swap.gamma_bar = 1.0;
    swap.gamma = 1.0;
    swap.g = [](double, const double* x, int, double* out) {
        out[0] = std::sin(x[1]);
        out[1] = std::cos(x[0]);
    };
    const MCEstimate est = antisym_check(ens, swap, 8, 16);
    std::printf("  I_ant = %.6f +- %.6f (|z| = %.2f)\n", est.value,
                est.std_error, std::abs(est.value) / est.std_error);
    return std::abs(est.value) <= 3.0 * est.std_error;
}

// --- 6: end-to-end isometry -------------------------------------------------
bool criterion_6() {
    bool ok = true;
    for (int d : {1, 2}) {
        for (double H : {0.35, 0.45}) {
            const auto t0 = std::chrono::steady_clock::now();
            const ModelParams p(H, 1.0, d);
            IsometryConfig cfg(p);
            cfg.n_steps = 4096;
            cfg.M = 10000;
            cfg.n_mesh = 512;
            cfg.eps_cells = {128, 64, 32, 16, 8};  // eps = 2^-5 .. 2^-9
            cfg.seed = 2026;
            const IsometryReport rep = verify_isometry(cfg, make_holder(HolderName::SIN, p));
            const double secs = std::chrono::duration<double>(
                                    std::chrono::steady_clock::now() - t0)
                                    .count();
            const bool pass = std::abs(rep.gap) <= rep.combined_tolerance &&
                              rep.rel_gap <= 0.10 && secs <= 900.0;
            std::printf(
                "  d=%d H=%.2f lhs=%.5f rhs=%.5f gap=%.5f tol=%.5f rel=%.4f "
                "%s [%.0fs] %s\n",
                d, H, rep.lhs, rep.rhs, rep.gap, rep.combined_tolerance,
                rep.rel_gap, rep.verdict.c_str(), secs, pass ? "ok" : "FAILED");
            ok = ok && pass;
        }
    }
    return ok;
}

// --- 7: integrability of the singular envelope ------------------------------
bool criterion_7() {
    const ModelParams p(0.4, 1.0, 1);
    bool ok = true;
    // q = 1.5: dyadic refinement increments eventually decrease (Cauchy trend)
    {
        std::vector<double> incr;
        double prev = kappa_excised_integral(1.5, std::ldexp(1.0, -4), p);
        for (int k = 5; k <= 14; ++k) {
            const double cur = kappa_excised_integral(1.5, std::ldexp(1.0, -k), p);
            incr.push_back(cur - prev);
            prev = cur;
        }
        bool decreasing = true;
        for (std::size_t i = incr.size() - 5; i + 1 < incr.size(); ++i) {
            if (!(incr[i + 1] < incr[i])) decreasing = false;
        }
        std::printf("  q=1.5 last increments: %.4f %.4f %.4f %.4f %.4f -> %s\n",
                    incr[incr.size() - 5], incr[incr.size() - 4],
                    incr[incr.size() - 3], incr[incr.size() - 2], incr.back(),
                    decreasing ? "shrinking" : "NOT shrinking");
        ok = ok && decreasing;
    }
    // q = 1.8: increments non-decreasing over >= 6 levels (mass accumulates)
    {
        std::vector<double> incr;
        double prev = kappa_excised_integral(1.8, std::ldexp(1.0, -4), p);
        for (int k = 5; k <= 11; ++k) {
            const double cur = kappa_excised_integral(1.8, std::ldexp(1.0, -k), p);
            incr.push_back(cur - prev);
            prev = cur;
        }
        bool nondecreasing = true;
        for (std::size_t i = 0; i + 1 < incr.size(); ++i) {
            if (incr[i + 1] < incr[i]) nondecreasing = false;
        }
        std::printf("  q=1.8 increments grow over %zu levels -> %s\n", incr.size(),
                    nondecreasing ? "diverging" : "NOT diverging");
        ok = ok && nondecreasing;
    }
    return ok;
}

// --- 8: membership verdicts -------------------------------------------------
bool criterion_8() {
    const ModelParams p(0.4, 1.0, 1);
    bool ok = true;
    auto expect = [&](const char* label, const std::function<double(double)>& V,
                      MembershipVerdict want) {
        const MembershipReport r = check_membership(V, p, 40);
        const bool pass = r.verdict == want;
        std::printf("  %-18s -> %-12s (want %s) %s\n", label,
                    to_string(r.verdict), to_string(want), pass ? "ok" : "FAILED");
        ok = ok && pass;
    };
    const ModulusIntegrand lp75 = make_modulus(PsiFamily::log_pow(0.75), p);
    const ModulusIntegrand lp50 = make_modulus(PsiFamily::log_pow(0.5), p);
    const ModulusIntegrand el15 = make_modulus(PsiFamily::exp_loglog(1.5), p);
    expect("LOG_POW(0.75)", [&](double y) { return lp75.V_time(y, p); },
           MembershipVerdict::CONVERGENT);
    expect("LOG_POW(0.5)", [&](double y) { return lp50.V_time(y, p); },
           MembershipVerdict::DIVERGENT);
    expect("EXP_LOGLOG(1.5)", [&](double y) { return el15.V_time(y, p); },
           MembershipVerdict::CONVERGENT);
    const double alpha = 0.5 - p.H + 0.1;
    expect("power(gate+0.1)", [&](double y) { return std::pow(y, alpha); },
           MembershipVerdict::CONVERGENT);
    expect("power(at gate)", [&](double y) { return std::pow(y, 0.5 - p.H); },
           MembershipVerdict::REJECTED);
    return ok;
}

// --- 9: representation equivalence ------------------------------------------
bool criterion_9() {
    CounterRng rng(10101, 0, 0);
    double worst_w = 0.0, worst_eta = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int d = 1 + trial % 3;
        const ModelParams p(0.26 + 0.23 * rng.next_uniform(), 1.0, d);
        const double s = 0.05 + 0.9 * rng.next_uniform();
        double t = 0.05 + 0.9 * rng.next_uniform();
        if (std::abs(t - s) < 1e-4) t = s + 0.01;
        Eigen::VectorXd Bs(d), Bt(d);
        for (int i = 0; i < d; ++i) {
            Bs(i) = rng.next_normal();
            Bt(i) = rng.next_normal();
        }
        const Eigen::MatrixXd base = W_eval(s, t, Bs, Bt, p, WRepresentation::BASE);
        const Eigen::MatrixXd incr = W_eval(s, t, Bs, Bt, p, WRepresentation::INCREMENT);
        worst_w = std::max(worst_w,
                           (base - incr).norm() / std::max(base.norm(), 1e-300));
        const KernelPoint k = eval_lambda_limit(std::min(s, t), std::max(s, t), p);
        worst_eta = std::max({worst_eta,
                              std::abs(k.eta11 - (k.lambda11 + k.lambda12)),
                              std::abs(k.eta12 - k.lambda12),
                              std::abs(k.eta21 - (k.lambda21 + k.lambda22)),
                              std::abs(k.eta22 - k.lambda22)});
    }
    std::printf("  worst relative W mismatch = %.3e, worst eta identity = %.3e\n",
                worst_w, worst_eta);
    return worst_w <= 1e-10 && worst_eta <= 1e-12;
}

// --- 10: sampler validation ---------------------------------------------------
bool criterion_10() {
    const ModelParams p(0.4, 1.0, 1);
    const GridSpec g = make_grid(512, 1.0, 0.0);
    const std::vector<std::pair<double, double>> probes = {
        {0.25, 0.25}, {0.25, 0.75}, {0.5, 1.0}, {0.125, 0.875}, {1.0, 1.0}};
    const PathEnsemble chol = sample_cholesky(g, p, 10000, 11001);
    const PathEnsemble circ = sample_circulant(g, p, 10000, 11002);
    const ValidationReport rc = validate_ensemble(chol, probes);
    const ValidationReport rf = validate_ensemble(circ, probes);
    std::printf("  max |z|: cholesky %.2f, circulant %.2f\n", rc.max_abs_z,
                rf.max_abs_z);
    std::vector<double> a, b;
    const auto iT = static_cast<std::size_t>(g.n_steps);
    for (std::size_t path = 0; path < chol.n_paths(); ++path) {
        a.push_back(chol.value(path, 0, iT));
        b.push_back(circ.value(path, 0, iT));
    }
    const double pval = ks_two_sample_pvalue(a, b);
    std::printf("  KS p-value on B_T = %.4f\n", pval);
    return rc.pass && rf.pass && pval > 0.01;
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: acceptance <criterion 1..10>\n");
        return 2;
    }
    const int crit = std::atoi(argv[1]);
    bool pass = false;
    switch (crit) {
        case 1: pass = criterion_1(); break;
        case 2: pass = criterion_2(); break;
        case 3: pass = criterion_3(); break;
        case 4: pass = criterion_4(); break;
        case 5: pass = criterion_5(); break;
        case 6: pass = criterion_6(); break;
        case 7: pass = criterion_7(); break;
        case 8: pass = criterion_8(); break;
        case 9: pass = criterion_9(); break;
        case 10: pass = criterion_10(); break;
        default:
            std::fprintf(stderr, "usage: acceptance <criterion 1..10>\n");
            return 2;
    }
    std::printf("criterion %d: %s\n", crit, pass ? "PASS" : "FAIL");
    return pass ? 0 : 1;
}
