#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "fbmlab/fbm.hpp"
#include "fbmlab/integrands.hpp"
#include "fbmlab/isometry.hpp"
#include "fbmlab/kernel.hpp"
#include "fbmlab/model.hpp"
#include "fbmlab/rng.hpp"

using namespace fbmlab;

namespace {
const ModelParams P1(0.4, 1.0, 1);
const ModelParams P2(0.4, 1.0, 2);

GridSpec grid(int n, double eps_max) {
    GridSpec g;
    g.n_steps = n;
    g.T = 1.0;
    g.eps_max = eps_max;
    return g;
}

// Exact values for H = 0.4, T = 1, g = sin (per coordinate):
//   E||Y||^2 term          0.35686643
//   increment (w) term    -0.13011380
//   raw marginal integral  0.25570739   (enters with weight 1/2)
//   d = 2 antisym term     0.23096543
//   limiting second moment 0.354606
constexpr double kRkhsExact = 0.35686643;
constexpr double kMRawExact = 0.25570739;
constexpr double kAntisymExactD2 = 0.23096543;
constexpr double kLhsExact = 0.354606;
}

TEST_CASE("lambda determinant: frozen value and identity", "[isometry]") {
    // det at (s, t) = (0.5, 1): lambda = (0, 0.91895868, -0.8, 0.8)
    const double det = lambda_det(0.5, 1.0, P1);
    CHECK(det == Catch::Approx(0.735166947198104).epsilon(1e-11));
    // agrees with the cofactor expansion of the assembled matrix everywhere
    for (double s : {0.1, 0.37, 0.9}) {
        for (double t : {0.52, 0.75, 0.99}) {
            const KernelPoint k = eval_lambda_limit(std::min(s, t), std::max(s, t), P1);
            CHECK(lambda_det(s, t, P1) ==
                  Catch::Approx(k.lambda11 * k.lambda22 - k.lambda12 * k.lambda21)
                      .epsilon(1e-10));
        }
    }
    CHECK_THROWS_AS(lambda_det(0.5, 0.5, P1), DiagonalSingularity);
    CHECK_THROWS_AS(lambda_det(0.0, 0.5, P1), OriginSingularity);
}

TEST_CASE("polarization: grouped and split contractions agree", "[isometry]") {
    CounterRng rng(314, 0, 0);
    for (int d : {1, 2, 3}) {
        const ModelParams p(0.4, 1.0, d);
        for (int rep = 0; rep < 20; ++rep) {
            const double s = 0.05 + 0.9 * rng.next_uniform();
            double t = 0.05 + 0.9 * rng.next_uniform();
            if (std::abs(t - s) < 1e-3) t += 0.01;
            Eigen::VectorXd a(d), b(d), Bs(d), Bt(d);
            for (int i = 0; i < d; ++i) {
                a(i) = rng.next_normal();
                b(i) = rng.next_normal();
                Bs(i) = rng.next_normal();
                Bt(i) = rng.next_normal();
            }
            const PolarizationCheck pc = polarization_check(s, t, a, b, Bs, Bt, p);
            CHECK(pc.grouped == Catch::Approx(pc.split).margin(1e-10));
            // and with the arguments presented in the reversed time order
            const PolarizationCheck rc = polarization_check(t, s, b, a, Bt, Bs, p);
            CHECK(rc.grouped == Catch::Approx(pc.grouped).margin(1e-10));
        }
    }
}

TEST_CASE("moment-comparison bound holds with constant one", "[isometry]") {
    const GridSpec g = grid(512, 1.0 / 16.0);
    const PathEnsemble e = sample_circulant(g, P2, 400, 11);
    const IntegrandSpec spec = make_holder(HolderName::SIN, P2);
    for (double pnorm : {1.5, 4.0}) {
        const BoundCheckResult r = bound_check(e, spec, 64, 1, pnorm);
        INFO("pnorm = " << pnorm << " ratio = " << r.ratio);
        CHECK(r.norm2 > 0.0);
        CHECK(r.ratio <= 1.0 + 1e-12);
        CHECK(r.pass);
    }
    CHECK_THROWS_AS(bound_check(e, spec, 64, 1, 1.0), DomainError);
    CHECK_THROWS_AS(bound_check(e, spec, 64, 1, 5.0), DomainError);
}

TEST_CASE("antisym term: zero for d = 1, matches the closed form for d = 2",
          "[isometry]") {
    const GridSpec g = grid(2048, 1.0 / 16.0);
    const IntegrandSpec s1 = make_holder(HolderName::SIN, P1);
    const PathEnsemble e1 = sample_circulant(g, P1, 500, 21);
    const detail::MeshData md1 = detail::build_mesh_data(e1, s1, 128);
    const detail::TermEstimate t1 = detail::antisym_term_estimate(md1, P1, 1, P1.H);
    CHECK(t1.mean == 0.0);
    CHECK(t1.se == 0.0);

    const IntegrandSpec s2 = make_holder(HolderName::SIN, P2);
    const PathEnsemble e2 = sample_circulant(g, P2, 3000, 22);
    const detail::MeshData md2 = detail::build_mesh_data(e2, s2, 128);
    const detail::TermEstimate t2 = detail::antisym_term_estimate(md2, P2, 1, P2.H);
    INFO("antisym = " << t2.mean << " +- " << t2.se << " band = " << t2.band);
    CHECK(std::abs(t2.mean - kAntisymExactD2) <=
          std::abs(t2.band) + 3.0 * t2.se + 0.005);
}

TEST_CASE("marginal and boundary terms against closed forms", "[isometry]") {
    const GridSpec g = grid(2048, 1.0 / 16.0);
    const IntegrandSpec spec = make_holder(HolderName::SIN, P1);
    const PathEnsemble e = sample_circulant(g, P1, 3000, 23);
    const detail::MeshData md = detail::build_mesh_data(e, spec, 128);
    const detail::TermEstimate m = detail::m_term_estimate(md, P1);
    INFO("m_raw = " << m.mean << " +- " << m.se);
    CHECK(std::abs(m.mean - kMRawExact) <= 3.0 * m.se + 0.05 * kMRawExact);
    const detail::TermEstimate r = detail::rkhs_term_estimate(md, P1, 1, P1.H);
    INFO("rkhs = " << r.mean << " +- " << r.se << " band = " << r.band);
    CHECK(std::abs(r.mean - kRkhsExact) <=
          std::abs(r.band) + 3.0 * r.se + 0.02 * kRkhsExact);
    // theta_hat at the divergence threshold is rejected
    CHECK_THROWS_AS(detail::rkhs_term_estimate(md, P1, 1, 0.5 * (1.0 - 2.0 * P1.H)),
                    BandDivergence);
}

TEST_CASE("configuration validation", "[isometry]") {
    IsometryConfig cfg(P1);
    cfg.n_steps = 1024;
    cfg.n_mesh = 100;  // not a power of two
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg.n_mesh = 512;  // ratio 2: even, fine
    CHECK_NOTHROW(cfg.validate());
    cfg.n_steps = 1536;  // ratio 3: odd, centers miss the path grid
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg.n_steps = 1024;
    cfg.eps_cells = {};
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg.eps_cells = {0};
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg.eps_cells = {8};
    cfg.band_width = 0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg.band_width = 1;
    cfg.rel_tol = 0.0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("end-to-end report on a small configuration", "[isometry]") {
    IsometryConfig cfg(P1);
    cfg.n_steps = 1024;
    cfg.M = 2000;
    cfg.n_mesh = 64;
    cfg.eps_cells = {32, 16, 8};
    cfg.seed = 404;
    const IntegrandSpec g = make_holder(HolderName::SIN, P1);
    const IsometryReport rep = verify_isometry(cfg, g);

    // configuration echo
    CHECK(rep.H == 0.4);
    CHECK(rep.d == 1);
    CHECK(rep.n_steps == 1024);
    CHECK(rep.n_mesh == 64);
    CHECK(rep.M == 2000);
    CHECK(rep.seed == 404);
    CHECK(rep.integrand == "sin");
    CHECK_FALSE(rep.sampler.empty());
    CHECK(rep.eps.size() == 3);
    CHECK(rep.lhs_at_eps.size() == 3);
    CHECK(rep.lhs_mode == "extrapolated");

    // both sides near the closed-form limit, within the stated budget
    INFO("lhs = " << rep.lhs << " rhs = " << rep.rhs << " tol = "
                  << rep.combined_tolerance << " verdict = " << rep.verdict);
    CHECK(std::abs(rep.lhs - kLhsExact) <= 3.0 * rep.lhs_se + 0.05);
    CHECK(std::abs(rep.rhs - kLhsExact) <=
          rep.band_bound + 3.0 * rep.rhs_se + 0.02);
    CHECK(rep.antisym_term == 0.0);  // d = 1
    CHECK(rep.mesh_drift >= 0.0);
    CHECK(rep.band_bound > 0.0);
    CHECK(rep.combined_tolerance > 0.0);
    CHECK(rep.verdict == "PASS");

    // deterministic: the same seed reproduces the report exactly
    const IsometryReport again = verify_isometry(cfg, g);
    CHECK(again.lhs == rep.lhs);
    CHECK(again.rhs == rep.rhs);
    CHECK(again.verdict == rep.verdict);
}
