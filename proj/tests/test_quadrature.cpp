#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fbmlab/integrands.hpp"
#include "fbmlab/kernel.hpp"
#include "fbmlab/model.hpp"
#include "fbmlab/quadrature.hpp"
#include "fbmlab/stats.hpp"

using namespace fbmlab;

namespace {
const ModelParams P04(0.4, 1.0, 1);
}

TEST_CASE("offset masses equal planar increments and telescope", "[quadrature]") {
    const int n = 64;
    const double delta = P04.T / n;
    for (int k = 1; k < n; ++k) {
        const double a = 10 * delta, b = a + delta;
        const double c = a + k * delta, d = c + delta;
        CHECK(mu_offset_mass(k, delta, P04) ==
              Catch::Approx(-planar_increment_R(a, b, c, d, P04)).margin(1e-14));
    }
    // Signed planar increments over all n^2 cells telescope to gamma(T).
    KahanSum total;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            total.add(planar_increment_R(i * delta, (i + 1) * delta, j * delta,
                                         (j + 1) * delta, P04));
        }
    }
    CHECK(total.value() == Catch::Approx(P04.gamma(P04.T)).margin(1e-12));
}

TEST_CASE("boundary measure integration", "[quadrature]") {
    MeshSpec mesh;
    mesh.n = 4096;
    // total mass: int m(dt) = R(T,T) - R(T,0) = T^{2H}, exact by telescoping
    CHECK(integrate_m([](double) { return 1.0; }, mesh, P04) ==
          Catch::Approx(std::pow(P04.T, 0.8)).margin(1e-12));
    // frozen: int t m(dt) = 1/2 for T = 1 (integration by parts, any H)
    CHECK(integrate_m([](double t) { return t; }, mesh, P04) ==
          Catch::Approx(0.5).margin(1e-5));
    MeshSpec bad;
    bad.n = 100;
    CHECK_THROWS_AS(integrate_m([](double) { return 1.0; }, bad, P04), DomainError);
}

TEST_CASE("exact step-function norm reference value", "[quadrature]") {
    StepFunction f;
    f.breakpoints = {0.0, 0.5, 1.0};
    f.levels = {{1.0}, {2.0}};
    // frozen: gamma(1/2)(1 + 4) + 2 * 2 * phi(1/2, 1) = 2.5743491775
    CHECK(rkhs_norm_step(f, P04) == Catch::Approx(2.5743491774985).epsilon(1e-12));
    StepFunction bad;
    bad.breakpoints = {0.0, 1.0};
    CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("quadrature norm matches the exact step oracle", "[quadrature]") {
    // piecewise-constant approximation of f(t) = t on 256 steps is exactly
    // representable for the oracle, and the generic quadrature of the step
    // function itself must land within a fraction of a percent
    StepFunction f;
    const int m = 256;
    for (int i = 0; i <= m; ++i) f.breakpoints.push_back(static_cast<double>(i) / m);
    for (int i = 0; i < m; ++i) f.levels.push_back({(i + 0.5) / m});
    const double exact = rkhs_norm_step(f, P04);
    MeshSpec mesh;
    mesh.n = 2048;
    mesh.theta_hat = 1.0;  // f is Lipschitz in t
    const double quad =
        rkhs_norm_quadrature([&](double t) { return f.value_at(t, 0); }, mesh, P04);
    CHECK(quad == Catch::Approx(exact).epsilon(5e-3));
}

TEST_CASE("singular double integral with band model", "[quadrature]") {
    // F(s,t) = |t-s|^{2 theta} with theta = H has the closed form
    // H(1-2H) * integral of u^{4H-2} over the square.
    MeshSpec mesh;
    mesh.n = 512;
    mesh.theta_hat = P04.H;
    const auto F = [&](double s, double t) {
        return std::pow(std::abs(t - s), 2.0 * P04.H);
    };
    const MuIntegral mu = integrate_mu(F, mesh, P04);
    const double a = 4.0 * P04.H - 2.0;
    const double exact =
        P04.H * (1.0 - 0.8) * 2.0 * std::pow(P04.T, a + 2.0) / ((a + 1.0) * (a + 2.0));
    CHECK(mu.total == Catch::Approx(exact).epsilon(2e-3));
    CHECK(mu.band_fraction < 0.2);
    CHECK(mu.band_estimate > 0.0);

    // theta at or below the convergence threshold must be refused
    MeshSpec diverging = mesh;
    diverging.theta_hat = 0.5 * (1.0 - 2.0 * P04.H);
    CHECK_THROWS_AS(integrate_mu(F, diverging, P04), BandDivergence);
}

TEST_CASE("band power integral is an exact complement", "[quadrature]") {
    // band + off-band cell sums must reproduce the full-square closed form
    const double a = -0.3;
    const int n = 64, bw = 3;
    const double full = 2.0 * detail::power_G(P04.T, a);
    const double delta = P04.T / n;
    KahanSum off;
    for (int k = bw + 1; k <= n - 1; ++k) {
        off.add(2.0 * (n - k) *
                (detail::power_G((k + 1) * delta, a) -
                 2.0 * detail::power_G(k * delta, a) +
                 detail::power_G((k - 1) * delta, a)));
    }
    CHECK(detail::band_power_integral(a, n, bw, P04.T) ==
          Catch::Approx(full - off.value()).margin(1e-12));
}

TEST_CASE("membership of power moduli", "[quadrature][membership]") {
    // comfortably above the gate: V(y) = y^{1/2 - H + 0.1}
    const MembershipReport conv = check_membership(
        [&](double y) { return std::pow(y, 0.5 - P04.H + 0.1); }, P04, 40);
    CHECK(conv.verdict == MembershipVerdict::CONVERGENT);
    CHECK(conv.slope_gate == Catch::Approx(0.5 - P04.H + 0.1).margin(1e-6));
    // exactly at the gate: rejected outright
    const MembershipReport rej = check_membership(
        [&](double y) { return std::pow(y, 0.5 - P04.H); }, P04, 40);
    CHECK(rej.verdict == MembershipVerdict::REJECTED);
    CHECK_THROWS_AS(check_membership([](double) { return 1.0; }, P04, 4), DomainError);
}

TEST_CASE("membership of logarithmic moduli", "[quadrature][membership]") {
    const ModulusIntegrand good = make_modulus(PsiFamily::log_pow(0.75), P04);
    const ModulusIntegrand bad = make_modulus(PsiFamily::log_pow(0.5), P04);
    const MembershipReport rg = check_membership(
        [&](double y) { return good.V_time(y, P04); }, P04, 40);
    const MembershipReport rb = check_membership(
        [&](double y) { return bad.V_time(y, P04); }, P04, 40);
    CHECK(rg.verdict == MembershipVerdict::CONVERGENT);
    CHECK(rb.verdict == MembershipVerdict::DIVERGENT);
    // the 1-d criterion int psi^2(y)/y dy must agree with the 2-d verdict
    CHECK(rg.one_d_convergent);
    CHECK_FALSE(rb.one_d_convergent);
}

TEST_CASE("kappa excised integral diagnostics", "[quadrature]") {
    const double v1 = kappa_excised_integral(1.5, 1.0 / 64.0, P04);
    const double v2 = kappa_excised_integral(1.5, 1.0 / 128.0, P04);
    CHECK(v1 > 0.0);
    CHECK(v2 > v1);  // monotone in the excision
    CHECK_THROWS_AS(kappa_excised_integral(1.5, 0.6, P04), DomainError);
    CHECK_THROWS_AS(kappa_excised_integral(1.5, 0.0, P04), DomainError);
}
