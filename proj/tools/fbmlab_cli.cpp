// fbmlab — command-line front end for the isometry laboratory.
//
// Subcommands: kernel-eval, sample, verify-isometry, lambda-converge,
// lemma-suite, rkhs-check, integrands.  Exit codes: 0 pass, 1 fail,
// 2 usage/domain error, 3 inconclusive.  All runs are deterministic for a
// fixed config and seed; every emitted file embeds the config echo and the
// tool version.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Dense>

#include "fbmlab/fbm.hpp"
#include "fbmlab/integrands.hpp"
#include "fbmlab/isometry.hpp"
#include "fbmlab/kernel.hpp"
#include "fbmlab/model.hpp"
#include "fbmlab/projection.hpp"
#include "fbmlab/quadrature.hpp"
#include "fbmlab/rng.hpp"
#include "fbmlab/stratonovich.hpp"

using json = nlohmann::json;
using namespace fbmlab;

namespace {

constexpr const char* kVersion = "fbmlab 1.0.0";

// ---------------------------------------------------------------------------
// Sectioned key=value configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    double H = 0.4, T = 1.0;
    int d = 1;
    int n_steps = 4096;
    std::size_t M = 10000;
    std::uint64_t seed = 1;
    int mesh_n = 512;
    int band_width = 1;
    double theta_hat = -1.0;  ///< < 0 means "default to H"
    std::string integrand = "sin";
    std::vector<int> eps_cells = {128, 64, 32, 16, 8};
    double rel_tol = 0.10;
    std::string method = "circulant";
    std::string report_path;

    std::string echo() const {
        std::ostringstream os;
        os << "H=" << H << " T=" << T << " d=" << d << " n_steps=" << n_steps
           << " M=" << M << " seed=" << seed << " mesh_n=" << mesh_n
           << " band_width=" << band_width << " theta_hat="
           << (theta_hat < 0.0 ? H : theta_hat) << " integrand=" << integrand
           << " method=" << method << " rel_tol=" << rel_tol << " eps_cells=";
        for (std::size_t i = 0; i < eps_cells.size(); ++i) {
            os << (i ? "," : "") << eps_cells[i];
        }
        return os.str();
    }
};

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(trim(item)));
    return out;
}

/// Plain-text config: `[section]` headers and `key = value` lines; `#` starts
/// a comment.  Unknown sections or keys are rejected so a typo cannot
/// silently fall back to a default.
ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open config file: " + path);
    ExperimentConfig cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            if (section != "model" && section != "grid" && section != "mc" &&
                section != "mesh" && section != "integrand" &&
                section != "experiment" && section != "output") {
                throw DomainError("config line " + std::to_string(lineno) +
                                  ": unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw DomainError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        }
        const std::string key = section + "." + trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if      (key == "model.H")              cfg.H = std::stod(val);
        else if (key == "model.T")              cfg.T = std::stod(val);
        else if (key == "model.d")              cfg.d = std::stoi(val);
        else if (key == "grid.n_steps")         cfg.n_steps = std::stoi(val);
        else if (key == "mc.M")                 cfg.M = std::stoull(val);
        else if (key == "mc.seed")              cfg.seed = std::stoull(val);
        else if (key == "mc.method")            cfg.method = val;
        else if (key == "mesh.n")               cfg.mesh_n = std::stoi(val);
        else if (key == "mesh.band_width")      cfg.band_width = std::stoi(val);
        else if (key == "mesh.theta_hat")       cfg.theta_hat = std::stod(val);
        else if (key == "integrand.name")       cfg.integrand = val;
        else if (key == "experiment.eps_cells") cfg.eps_cells = parse_int_list(val);
        else if (key == "experiment.rel_tol")   cfg.rel_tol = std::stod(val);
        else if (key == "output.report")        cfg.report_path = val;
        else {
            throw DomainError("config line " + std::to_string(lineno) +
                              ": unknown key " + key);
        }
    }
    return cfg;
}

IntegrandSpec make_integrand(const std::string& name, const ModelParams& p) {
    if (name == "sin")      return make_holder(HolderName::SIN, p);
    if (name == "tanh")     return make_holder(HolderName::TANH, p);
    if (name == "time_sin") return make_holder(HolderName::TIME_SIN, p);
    if (name == "const")    return make_constant(1.0);
    if (name == "linear")   return make_linear();
    if (name.rfind("modulus_log_pow_", 0) == 0) {
        const double alpha = std::stod(name.substr(16));
        return make_modulus(PsiFamily::log_pow(alpha), p).as_integrand(p);
    }
    throw DomainError("unknown integrand: " + name);
}

void write_csv_header(std::ostream& os, const std::string& echo) {
    os << "# " << kVersion << "\n# config: " << echo << "\n";
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_kernel_eval(double H, double T, double s, double t, int suite_density,
                    const std::string& out_path) {
    const ModelParams p(H, T, 1);
    if (suite_density > 0) {
        const SuiteReport rep = run_lemma_suite(suite_density, p);
        for (const auto& e : rep.entries) {
            std::cout << e.name << ": max_violation=" << e.max_violation
                      << (e.pass ? " PASS" : " FAIL")
                      << (e.note.empty() ? "" : "  [" + e.note + "]") << "\n";
        }
        return rep.all_pass() ? 0 : 1;
    }
    const KernelPoint k = eval_lambda_limit(std::min(s, t), std::max(s, t), p);
    const double det = lambda_det(s, t, p);
    std::ostringstream body;
    std::ostringstream echo;
    echo << "H=" << H << " T=" << T << " s=" << s << " t=" << t;
    write_csv_header(body, echo.str());
    body << "s,t,R,gamma_s,gamma_t,phi,theta,A,dR_ds,dR_dt,d2R,"
            "lambda11,lambda12,lambda21,lambda22,eta11,eta12,eta21,eta22,"
            "det_lambda,kappa,mu_density\n";
    body.precision(15);
    body << k.s << ',' << k.t << ',' << k.R << ',' << k.gamma_s << ','
         << k.gamma_t << ',' << k.phi << ',' << k.theta << ',' << k.A << ','
         << k.dR_ds << ',' << k.dR_dt << ',' << k.d2R << ',' << k.lambda11
         << ',' << k.lambda12 << ',' << k.lambda21 << ',' << k.lambda22 << ','
         << k.eta11 << ',' << k.eta12 << ',' << k.eta21 << ',' << k.eta22
         << ',' << det << ',' << k.kappa << ',' << k.mu_density << "\n";
    if (out_path.empty()) {
        std::cout << body.str();
    } else {
        std::ofstream(out_path) << body.str();
    }
    return 0;
}

int cmd_sample(const ExperimentConfig& cfg, int max_paths, bool validate,
               const std::string& out_path) {
    const ModelParams p(cfg.H, cfg.T, cfg.d);
    GridSpec g;
    g.n_steps = cfg.n_steps;
    g.T = cfg.T;
    g.eps_max = 0.0;
    const PathEnsemble ens =
        (cfg.method == "cholesky")
            ? sample_cholesky(g, p, cfg.M, cfg.seed)
            : sample_circulant(g, p, cfg.M, cfg.seed);
    if (validate) {
        const double q = cfg.T / 4.0;
        const ValidationReport rep = validate_ensemble(
            ens, {{q, q}, {q, 3.0 * q}, {2.0 * q, 4.0 * q}, {4.0 * q, 4.0 * q}});
        for (const auto& pr : rep.probes) {
            std::cout << "probe (" << pr.s << "," << pr.t << "): sample="
                      << pr.sample_cov << " exact=" << pr.exact_cov
                      << " z=" << pr.z_score << "\n";
        }
        std::cout << "max |z| = " << rep.max_abs_z
                  << (rep.pass ? " PASS" : " FAIL") << "\n";
        return rep.pass ? 0 : 1;
    }
    std::ostringstream body;
    write_csv_header(body, cfg.echo());
    body << "path,coord,t,value\n";
    body.precision(15);
    const std::size_t shown = std::min<std::size_t>(
        static_cast<std::size_t>(std::max(max_paths, 1)), ens.n_paths());
    for (std::size_t path = 0; path < shown; ++path) {
        for (int c = 0; c < p.d; ++c) {
            for (std::size_t i = 0; i < ens.n_points(); ++i) {
                body << path << ',' << c << ','
                     << g.dt() * static_cast<double>(i) << ','
                     << ens.value(path, static_cast<std::size_t>(c), i) << "\n";
            }
        }
    }
    if (out_path.empty()) {
        std::cout << body.str();
    } else {
        std::ofstream(out_path) << body.str();
    }
    return 0;
}

int cmd_verify_isometry(const ExperimentConfig& cfg, const std::string& out_override) {
    const ModelParams p(cfg.H, cfg.T, cfg.d);
    IsometryConfig ic(p);
    ic.n_steps = cfg.n_steps;
    ic.M = cfg.M;
    ic.seed = cfg.seed;
    ic.n_mesh = cfg.mesh_n;
    ic.band_width = cfg.band_width;
    if (cfg.theta_hat >= 0.0) ic.theta_hat = cfg.theta_hat;
    ic.eps_cells = cfg.eps_cells;
    ic.rel_tol = cfg.rel_tol;
    ic.method = (cfg.method == "cholesky") ? SamplerMethod::CHOLESKY
                                           : SamplerMethod::CIRCULANT;
    const IntegrandSpec g = make_integrand(cfg.integrand, p);
    const IsometryReport rep = verify_isometry(ic, g);

    json j;
    j["version"] = kVersion;
    j["config"] = {{"H", rep.H},       {"T", rep.T},
                   {"d", rep.d},       {"n_steps", rep.n_steps},
                   {"M", rep.M},       {"seed", rep.seed},
                   {"n_mesh", rep.n_mesh}, {"band_width", rep.band_width},
                   {"theta_hat", rep.theta_hat},
                   {"integrand", rep.integrand}, {"sampler", rep.sampler},
                   {"rel_tol", ic.rel_tol}};
    j["lhs"] = {{"value", rep.lhs},   {"se", rep.lhs_se},
                {"rate", rep.lhs_rate}, {"mode", rep.lhs_mode}};
    json at_eps = json::array();
    for (std::size_t i = 0; i < rep.eps.size(); ++i) {
        at_eps.push_back({{"eps", rep.eps[i]},
                          {"value", rep.lhs_at_eps[i].value},
                          {"se", rep.lhs_at_eps[i].std_error}});
    }
    j["lhs"]["at_eps"] = at_eps;
    j["rhs"] = {{"value", rep.rhs},
                {"se", rep.rhs_se},
                {"rkhs_term", rep.rkhs_term},
                {"rkhs_se", rep.rkhs_se},
                {"w_term", rep.w_term},
                {"w_se", rep.w_se},
                {"m_term", rep.m_term},
                {"m_se", rep.m_se},
                {"antisym_term", rep.antisym_term},
                {"antisym_se", rep.antisym_se}};
    j["budget"] = {{"mu_band", rep.mu_band},
                   {"w_band", rep.w_band},
                   {"antisym_band", rep.antisym_band},
                   {"band_bound", rep.band_bound},
                   {"mesh_drift", rep.mesh_drift},
                   {"combined_tolerance", rep.combined_tolerance}};
    j["gap"] = rep.gap;
    j["rel_gap"] = rep.rel_gap;
    j["verdict"] = rep.verdict;

    const std::string path =
        !out_override.empty() ? out_override
        : !cfg.report_path.empty() ? cfg.report_path : "isometry_report.json";
    std::ofstream(path) << j.dump(2) << "\n";
    std::cout << "lhs=" << rep.lhs << " rhs=" << rep.rhs << " gap=" << rep.gap
              << " tol=" << rep.combined_tolerance << " rel_gap=" << rep.rel_gap
              << " verdict=" << rep.verdict << "\nreport written to " << path
              << "\n";
    if (rep.verdict == "PASS") return 0;
    if (rep.verdict == "INCONCLUSIVE") return 3;
    return 1;
}

int cmd_lambda_converge(double H, double s, double t, int k_min, int k_max,
                        const std::string& out_path) {
    if (s == t) throw DiagonalSingularity("lambda-converge: s == t");
    if (k_max - k_min < 1) {
        throw DomainError("lambda-converge: need at least two dyadic levels");
    }
    const ModelParams p(H, 1.0, 2);
    Eigen::VectorXd Bs(2), Bt(2);
    Bs << 0.3, -0.7;
    Bt << 1.1, 0.4;
    const Derivatives der = eval_derivatives(s, t, p);
    const Eigen::MatrixXd limit =
        W_eval(s, t, Bs, Bt, p, WRepresentation::BASE) +
        der.d2R * Eigen::MatrixXd::Identity(p.d, p.d);
    const double nl = limit.norm();
    std::ostringstream body;
    std::ostringstream echo;
    echo << "H=" << H << " s=" << s << " t=" << t << " k=" << k_min << ".."
         << k_max;
    write_csv_header(body, echo.str());
    body << "k,eps,rel_error\n";
    body.precision(15);
    bool decreasing = true;
    double prev = 1e300;
    for (int k = k_min; k <= k_max; ++k) {
        const double eps = std::ldexp(1.0, -k);
        const ProjectionSample ps = project_lambda0(eps, eps, s, t, Bs, Bt, p);
        const double ratio = (ps.lambda0 - limit).norm() / nl;
        body << k << ',' << eps << ',' << ratio << "\n";
        if (ratio > prev * (1.0 + 1e-9)) decreasing = false;
        prev = ratio;
    }
    if (out_path.empty()) {
        std::cout << body.str();
    } else {
        std::ofstream(out_path) << body.str();
    }
    return decreasing ? 0 : 1;
}

int cmd_rkhs_check(double H, int trials, int mesh_n, double tol,
                   std::uint64_t seed) {
    const ModelParams p(H, 1.0, 1);
    MeshSpec mesh;
    mesh.n = mesh_n;
    const double delta = p.T / static_cast<double>(mesh.n);
    CounterRng rng(seed, 0, 0);
    bool ok = true;
    std::cout << "trial,steps,exact,quadrature,rel_error\n";
    for (int trial = 0; trial < trials; ++trial) {
        const int m = 2 + static_cast<int>(rng.next_uniform() * 7.0);
        StepFunction f;
        f.breakpoints.push_back(0.0);
        std::vector<double> inner;
        for (int i = 0; i + 1 < m; ++i) inner.push_back(0.05 + 0.9 * rng.next_uniform());
        std::sort(inner.begin(), inner.end());
        for (std::size_t i = 0; i < inner.size(); ++i) {
            if (i > 0 && inner[i] - inner[i - 1] < 1e-3) inner[i] = inner[i - 1] + 1e-3;
            f.breakpoints.push_back(inner[i]);
        }
        f.breakpoints.push_back(1.0);
        for (int i = 0; i < m; ++i) f.levels.push_back({4.0 * rng.next_uniform() - 2.0});
        const double exact = rkhs_norm_step(f, p);
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
        const double rel = std::abs(quad - exact) / std::max(exact, 1e-300);
        std::cout << trial << ',' << m << ',' << exact << ',' << quad << ','
                  << rel << "\n";
        ok = ok && rel <= tol;
    }
    return ok ? 0 : 1;
}

int cmd_integrands(const ModelParams& p) {
    std::cout << "name,kind,gamma_bar,gamma,expected_verdict\n";
    for (HolderName h : {HolderName::SIN, HolderName::TANH, HolderName::TIME_SIN}) {
        const IntegrandSpec s = make_holder(h, p);
        std::cout << s.name << ",holder," << s.gamma_bar << ',' << s.gamma
                  << ",-\n";
    }
    std::cout << "const,holder,1,1,-\nlinear,holder,1,1,-\n";
    for (const PsiFamily& fam :
         {PsiFamily::log_pow(0.75), PsiFamily::log_pow(0.5),
          PsiFamily::loglog(0.75), PsiFamily::exp_loglog(1.5)}) {
        std::cout << "modulus_" << fam.label() << ",modulus,-,-,"
                  << to_string(fam.expected_verdict()) << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(kVersion) +
                 " — numerical laboratory for the rough-fBm isometry"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "worker cap (currently fixed at 1)");

    // kernel-eval
    auto* ke = app.add_subcommand("kernel-eval", "kernel fields at (s, t) as CSV");
    double ke_H = 0.4, ke_T = 1.0, ke_s = 0.5, ke_t = 1.0;
    int ke_density = 0;
    std::string ke_out;
    ke->add_option("--H", ke_H, "Hurst exponent");
    ke->add_option("--T", ke_T, "horizon");
    ke->add_option("--s", ke_s, "first time");
    ke->add_option("--t", ke_t, "second time");
    ke->add_option("--lemma-suite,--density", ke_density,
                   "run the inequality suite at this grid density instead");
    ke->add_option("--out", ke_out, "output CSV path (default stdout)");

    // sample
    auto* sm = app.add_subcommand("sample", "draw fBm paths, CSV or validation");
    std::string sm_config, sm_out;
    int sm_max_paths = 4;
    bool sm_validate = false;
    std::uint64_t sm_seed = 0;
    bool sm_seed_set = false;
    sm->add_option("--config", sm_config, "experiment config file")->required();
    sm->add_option("--max-paths", sm_max_paths, "paths to emit as CSV");
    sm->add_flag("--validate", sm_validate, "covariance z-score gate instead of CSV");
    sm->add_option("--seed", sm_seed, "seed override")
        ->each([&](const std::string&) { sm_seed_set = true; });
    sm->add_option("--out", sm_out, "output CSV path (default stdout)");

    // verify-isometry
    auto* vi = app.add_subcommand("verify-isometry",
                                  "end-to-end second-moment identity check");
    std::string vi_config, vi_out;
    std::uint64_t vi_seed = 0;
    bool vi_seed_set = false;
    vi->add_option("--config", vi_config, "experiment config file")->required();
    vi->add_option("--seed", vi_seed, "seed override")
        ->each([&](const std::string&) { vi_seed_set = true; });
    vi->add_option("--out", vi_out, "JSON report path override");

    // lambda-converge
    auto* lc = app.add_subcommand("lambda-converge",
                                  "projection error vs dyadic radius as CSV");
    double lc_H = 0.4, lc_s = 0.5, lc_t = 1.0;
    int lc_kmin = 4, lc_kmax = 14;
    std::string lc_out;
    lc->add_option("--H", lc_H, "Hurst exponent");
    lc->add_option("--s", lc_s, "first time");
    lc->add_option("--t", lc_t, "second time");
    lc->add_option("--k-min", lc_kmin, "smallest dyadic level");
    lc->add_option("--k-max", lc_kmax, "largest dyadic level");
    lc->add_option("--out", lc_out, "output CSV path (default stdout)");

    // lemma-suite
    auto* ls = app.add_subcommand("lemma-suite", "exact inequality certification");
    double ls_H = 0.4;
    int ls_density = 64;
    ls->add_option("--H", ls_H, "Hurst exponent");
    ls->add_option("--density", ls_density, "grid density");

    // rkhs-check
    auto* rc = app.add_subcommand("rkhs-check",
                                  "quadrature vs exact norm on random step functions");
    double rc_H = 0.4, rc_tol = 0.02;
    int rc_trials = 10, rc_mesh = 2048;
    std::uint64_t rc_seed = 7001;
    rc->add_option("--H", rc_H, "Hurst exponent");
    rc->add_option("--trials", rc_trials, "number of random step functions");
    rc->add_option("--mesh-n", rc_mesh, "mesh cells per axis");
    rc->add_option("--tol", rc_tol, "relative tolerance");
    rc->add_option("--seed", rc_seed, "seed");

    // integrands
    auto* ig = app.add_subcommand("integrands", "catalog listing as CSV");
    ig->alias("list");

    CLI11_PARSE(app, argc, argv);
    threads = std::min(threads, 1);
    (void)threads;

    try {
        if (ke->parsed()) {
            return cmd_kernel_eval(ke_H, ke_T, ke_s, ke_t, ke_density, ke_out);
        }
        if (sm->parsed()) {
            ExperimentConfig cfg = load_config(sm_config);
            if (sm_seed_set) cfg.seed = sm_seed;
            return cmd_sample(cfg, sm_max_paths, sm_validate, sm_out);
        }
        if (vi->parsed()) {
            ExperimentConfig cfg = load_config(vi_config);
            if (vi_seed_set) cfg.seed = vi_seed;
            return cmd_verify_isometry(cfg, vi_out);
        }
        if (lc->parsed()) {
            return cmd_lambda_converge(lc_H, lc_s, lc_t, lc_kmin, lc_kmax, lc_out);
        }
        if (ls->parsed()) {
            const SuiteReport rep = run_lemma_suite(ls_density, ModelParams(ls_H, 1.0, 1));
            for (const auto& e : rep.entries) {
                std::cout << e.name << ": max_violation=" << e.max_violation
                          << (e.pass ? " PASS" : " FAIL") << "\n";
            }
            return rep.all_pass() ? 0 : 1;
        }
        if (rc->parsed()) {
            return cmd_rkhs_check(rc_H, rc_trials, rc_mesh, rc_tol, rc_seed);
        }
        if (ig->parsed()) {
            return cmd_integrands(ModelParams(0.4, 1.0, 1));
        }
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
