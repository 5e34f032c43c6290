#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fbmlab/fbm.hpp"
#include "fbmlab/integrands.hpp"
#include "fbmlab/model.hpp"
#include "fbmlab/quadrature.hpp"
#include "fbmlab/stats.hpp"
#include "fbmlab/stratonovich.hpp"

using namespace fbmlab;

namespace {
const ModelParams P1(0.4, 1.0, 1);

GridSpec grid(int n, double eps_max) {
    GridSpec g;
    g.n_steps = n;
    g.T = 1.0;
    g.eps_max = eps_max;
    return g;
}

/// Ensemble whose single "path" is the deterministic ramp B_t = t.
PathEnsemble ramp_ensemble(const GridSpec& g) {
    PathEnsemble e(P1, g, 1, 0, SamplerMethod::CHOLESKY);
    double* out = e.mutable_series(0, 0);
    for (int i = 0; i < g.n_points(); ++i) {
        out[i] = g.dt() * static_cast<double>(i);
    }
    return e;
}
}

TEST_CASE("synthetic ramp path integrates exactly", "[stratonovich]") {
    // For B_t = t and g = 1 the clamped two-sided quotient integrates to
    // exactly T - eps/4 under the midpoint rule (the origin cells see the
    // one-sided increment (s + eps) / (2 eps)).
    const GridSpec g = grid(1024, 1.0 / 8.0);
    const PathEnsemble e = ramp_ensemble(g);
    const IntegrandSpec one = make_constant(1.0);
    for (int eps_cells : {2, 8, 32, 128}) {
        const double eps = eps_cells * g.dt();
        CHECK(I0_riemann(e, 0, one, eps_cells) ==
              Catch::Approx(g.T - eps / 4.0).margin(1e-12));
    }
    CHECK_THROWS_AS(I0_riemann(e, 0, one, 0), DomainError);
    CHECK_THROWS_AS(I0_riemann(e, 0, one, 4096), HorizonTooShort);
}

TEST_CASE("integral is linear in the integrand", "[stratonovich]") {
    const GridSpec g = grid(256, 1.0 / 16.0);
    const PathEnsemble e = sample_circulant(g, P1, 5, 77);
    const IntegrandSpec a = make_holder(HolderName::SIN, P1);
    const IntegrandSpec b = make_linear();
    IntegrandSpec sum;
    sum.g = [](double, const double* x, int d, double* out) {
        for (int i = 0; i < d; ++i) out[i] = std::sin(x[i]) + 2.0 * x[i];
    };
    for (std::size_t path = 0; path < e.n_paths(); ++path) {
        const double lhs = I0_riemann(e, path, sum, 4);
        const double rhs =
            I0_riemann(e, path, a, 4) + 2.0 * I0_riemann(e, path, b, 4);
        CHECK(lhs == Catch::Approx(rhs).margin(1e-12));
    }
}

TEST_CASE("cross moment at equal radii equals the second moment", "[stratonovich]") {
    const GridSpec g = grid(256, 1.0 / 16.0);
    const PathEnsemble e = sample_circulant(g, P1, 200, 5);
    const IntegrandSpec gs = make_holder(HolderName::SIN, P1);
    const MCEstimate second = mc_second_moment(e, gs, {8})[0];
    const MCEstimate cross = mc_cross_moment(e, gs, 8, 8);
    CHECK(cross.value == Catch::Approx(second.value).margin(1e-12));
}

TEST_CASE("deterministic integrand reduces to the Gaussian oracle",
          "[stratonovich]") {
    // g a deterministic step function of time: I0_eps is Gaussian and its
    // variance approaches the exact bilinear-form value as eps -> 0.
    StepFunction f;
    f.breakpoints = {0.0, 0.5, 1.0};
    f.levels = {{1.0}, {2.0}};
    const double exact = rkhs_norm_step(f, P1);
    const GridSpec g = grid(2048, 1.0 / 16.0);
    const PathEnsemble e = sample_circulant(g, P1, 4000, 31);
    const IntegrandSpec spec = make_step(f);
    const std::vector<int> radii = {128, 64, 32, 16, 8};
    const std::vector<MCEstimate> est = mc_second_moment(e, spec, radii);
    // bias shrinks with eps; the smallest radius must agree within noise
    // plus a small mollification allowance
    const MCEstimate& last = est.back();
    INFO("estimate = " << last.value << " +- " << last.std_error
                       << " exact = " << exact);
    CHECK(std::abs(last.value - exact) <= 3.0 * last.std_error + 0.02 * exact);
    // and the bias must shrink monotonically toward the oracle in trend
    CHECK(std::abs(est.front().value - exact) + 3.0 * est.front().std_error >=
          std::abs(last.value - exact));
}
