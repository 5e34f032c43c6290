#ifndef FBMLAB_STRATONOVICH_HPP
#define FBMLAB_STRATONOVICH_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "fbmlab/errors.hpp"
#include "fbmlab/fbm.hpp"
#include "fbmlab/integrands.hpp"
#include "fbmlab/stats.hpp"

namespace fbmlab {

// ---------------------------------------------------------------------------
// The symmetric-regularized (Stratonovich) integral at finite radius eps,
//   I0_eps = int_0^T < g(s, B_s), (B_{s+eps} - B_{(s-eps) v 0}) / (2 eps) > ds,
// discretized by the midpoint rule on cells of width 2 dt centered at odd
// grid indices, so every shifted path evaluation lands exactly on the grid
// whenever eps is an integer number of grid cells.
// ---------------------------------------------------------------------------

/// Evaluates I0_eps for one path.  `series` points at the d coordinate
/// series of one path (each with grid.n_points() samples); eps = eps_cells * dt.
inline double I0_riemann(const PathEnsemble& ensemble, std::size_t path,
                         const IntegrandSpec& g, int eps_cells) {
    const GridSpec& grid = ensemble.grid();
    const ModelParams& p = ensemble.params();
    const int n = grid.n_steps;
    const double dt = grid.dt();
    if (eps_cells < 1) {
        throw DomainError("I0_riemann: eps must be at least one grid cell");
    }
    if (n - 1 + eps_cells >= grid.n_points()) {
        throw HorizonTooShort("I0_riemann: eps exceeds the sampled extension");
    }
    const int d = p.d;
    std::vector<double> x(static_cast<std::size_t>(d)), y(static_cast<std::size_t>(d));
    KahanSum acc;
    const double cell_weight = 2.0 * dt / (2.0 * static_cast<double>(eps_cells) * dt);
    for (int j = 1; j < n; j += 2) {
        const double s = dt * static_cast<double>(j);
        for (int c = 0; c < d; ++c) {
            x[static_cast<std::size_t>(c)] =
                ensemble.value(path, static_cast<std::size_t>(c),
                               static_cast<std::size_t>(j));
        }
        g.eval(s, x.data(), d, y.data());
        double dot = 0.0;
        for (int c = 0; c < d; ++c) {
            const auto sc = static_cast<std::size_t>(c);
            const double fwd = ensemble.value(path, sc, static_cast<std::size_t>(j + eps_cells));
            const double bwd = (j - eps_cells >= 0)
                                   ? ensemble.value(path, sc, static_cast<std::size_t>(j - eps_cells))
                                   : 0.0;  // B_r := 0 for r <= 0
            dot += y[sc] * (fwd - bwd);
        }
        acc.add(dot * cell_weight);
    }
    return acc.value();
}

/// Monte Carlo E[ |I0_eps|^2 ] over all paths of the ensemble, one estimate
/// per requested radius.
inline std::vector<MCEstimate> mc_second_moment(const PathEnsemble& ensemble,
                                                const IntegrandSpec& g,
                                                const std::vector<int>& eps_cells_list) {
    std::vector<MCEstimate> out;
    out.reserve(eps_cells_list.size());
    for (int eps_cells : eps_cells_list) {
        MeanAccumulator acc;
        for (std::size_t path = 0; path < ensemble.n_paths(); ++path) {
            const double v = I0_riemann(ensemble, path, g, eps_cells);
            acc.add(v * v);
        }
        out.push_back(acc.estimate());
    }
    return out;
}

/// Monte Carlo E[ I0_eps I0_delta ] at two distinct radii (polarized form).
inline MCEstimate mc_cross_moment(const PathEnsemble& ensemble, const IntegrandSpec& g,
                                  int eps_cells, int delta_cells) {
    MeanAccumulator acc;
    for (std::size_t path = 0; path < ensemble.n_paths(); ++path) {
        acc.add(I0_riemann(ensemble, path, g, eps_cells) *
                I0_riemann(ensemble, path, g, delta_cells));
    }
    return acc.estimate();
}

} // namespace fbmlab

#endif // FBMLAB_STRATONOVICH_HPP
