#ifndef FBMLAB_FBM_HPP
#define FBMLAB_FBM_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "fbmlab/errors.hpp"
#include "fbmlab/fft.hpp"
#include "fbmlab/kernel.hpp"
#include "fbmlab/model.hpp"
#include "fbmlab/rng.hpp"
#include "fbmlab/stats.hpp"

namespace fbmlab {

// ---------------------------------------------------------------------------
// Exact sampling of d-dimensional fBm on a uniform grid over an extended
// horizon [0, T + eps_max].  The extension exists because the regularized
// integral evaluates the path at t + eps beyond T; negative times are
// handled by the global B_r := 0 clamping and never need samples.
// ---------------------------------------------------------------------------

struct GridSpec {
    int n_steps;       ///< cells over [0, T]; power of two >= 2^8
    double T;          ///< nominal horizon
    double eps_max;    ///< largest mollification radius used downstream

    void validate() const {
        if (n_steps < 256 || (n_steps & (n_steps - 1)) != 0) {
            throw DomainError("GridSpec: n_steps must be a power of two >= 256");
        }
        if (!(T > 0.0) || eps_max < 0.0) {
            throw DomainError("GridSpec: need T > 0 and eps_max >= 0");
        }
    }

    double dt() const { return T / static_cast<double>(n_steps); }

    /// Extra cells appended so the grid covers T + eps_max.
    int extension_cells() const {
        return static_cast<int>(std::ceil(eps_max / dt() - 1e-9));
    }

    int total_cells() const { return n_steps + extension_cells(); }
    int n_points() const { return total_cells() + 1; }   // includes t = 0
    double horizon() const { return dt() * total_cells(); }
};

enum class SamplerMethod { CHOLESKY, CIRCULANT };

inline const char* to_string(SamplerMethod m) {
    return m == SamplerMethod::CHOLESKY ? "CHOLESKY" : "CIRCULANT";
}

/// M independent d-dimensional paths; immutable after construction.
/// Coordinates are mutually independent by construction: every
/// (path, coordinate) pair owns its own counter-based RNG stream.
class PathEnsemble {
public:
    PathEnsemble(const ModelParams& params, const GridSpec& grid, std::size_t M,
                 std::uint64_t seed, SamplerMethod method)
        : params_(params), grid_(grid), M_(M), seed_(seed), method_(method),
          n_points_(static_cast<std::size_t>(grid.n_points())),
          data_(M * static_cast<std::size_t>(params.d) * n_points_, 0.0) {}

    const ModelParams& params() const { return params_; }
    const GridSpec& grid() const { return grid_; }
    std::size_t n_paths() const { return M_; }
    std::uint64_t seed() const { return seed_; }
    SamplerMethod method() const { return method_; }
    std::size_t n_points() const { return n_points_; }

    double value(std::size_t path, std::size_t coord, std::size_t idx) const {
        return data_[offset(path, coord) + idx];
    }

    const double* series(std::size_t path, std::size_t coord) const {
        return data_.data() + offset(path, coord);
    }

    double* mutable_series(std::size_t path, std::size_t coord) {
        return data_.data() + offset(path, coord);
    }

private:
    std::size_t offset(std::size_t path, std::size_t coord) const {
        return (path * static_cast<std::size_t>(params_.d) + coord) * n_points_;
    }

    ModelParams params_;
    GridSpec grid_;
    std::size_t M_;
    std::uint64_t seed_;
    SamplerMethod method_;
    std::size_t n_points_;
    std::vector<double> data_;
};

/// Dense exact sampler: Cholesky factor of the full grid covariance.
/// O(n^3) setup + O(n^2) per (path, coordinate); reference quality, used to
/// validate the fast sampler.
inline PathEnsemble sample_cholesky(const GridSpec& grid, const ModelParams& p,
                                    std::size_t M, std::uint64_t seed) {
    grid.validate();
    if (grid.n_steps > 4096) {
        throw DomainError("sample_cholesky: dense factorization capped at n_steps <= 4096");
    }
    const int n = grid.total_cells();
    const double dt = grid.dt();
    Eigen::MatrixXd sigma(n, n);
    for (int i = 0; i < n; ++i) {
        const double ti = dt * static_cast<double>(i + 1);
        for (int j = 0; j <= i; ++j) {
            const double tj = dt * static_cast<double>(j + 1);
            const double r = eval_R(ti, tj, p);
            sigma(i, j) = r;
            sigma(j, i) = r;
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        // One jitter retry before giving up.
        sigma.diagonal() *= (1.0 + 1e-12);
        llt.compute(sigma);
        if (llt.info() != Eigen::Success) {
            throw FactorizationFailure("sample_cholesky: covariance not numerically PD");
        }
    }
    const Eigen::MatrixXd L = llt.matrixL();

    PathEnsemble ens(p, grid, M, seed, SamplerMethod::CHOLESKY);
    Eigen::VectorXd z(n), x(n);
    for (std::size_t path = 0; path < M; ++path) {
        for (int coord = 0; coord < p.d; ++coord) {
            CounterRng rng(seed, path, static_cast<std::uint64_t>(coord));
            for (int i = 0; i < n; ++i) z(i) = rng.next_normal();
            x.noalias() = L.template triangularView<Eigen::Lower>() * z;
            double* out = ens.mutable_series(path, static_cast<std::size_t>(coord));
            out[0] = 0.0;
            for (int i = 0; i < n; ++i) out[i + 1] = x(i);
        }
    }
    return ens;
}

namespace detail {

/// Eigenvalues of the circulant embedding of the increment autocovariance,
/// precomputed once per ensemble.  Negative eigenvalues below the tolerance
/// indicate a failed embedding (cannot happen for H < 1/2 in exact
/// arithmetic); tiny negative round-off is clamped to zero.
inline std::vector<double> circulant_eigenvalues(int n_incr, double dt,
                                                 const ModelParams& p) {
    std::size_t m = 1;
    while (m < 2 * static_cast<std::size_t>(n_incr)) m <<= 1;
    const double twoH = 2.0 * p.H;
    const double scale = std::pow(dt, twoH);
    std::vector<std::complex<double>> row(m, 0.0);
    for (std::size_t k = 0; k <= m / 2; ++k) {
        const double kk = static_cast<double>(k);
        const double c = 0.5 * scale *
                         (std::pow(kk + 1.0, twoH) + std::pow(std::abs(kk - 1.0), twoH) -
                          2.0 * std::pow(kk, twoH));
        row[k] = c;
        if (k > 0 && k < m / 2) row[m - k] = c;
    }
    fft_radix2(row, false);
    std::vector<double> lambda(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double lv = row[k].real();
        if (lv < -1e-10) {
            throw EmbeddingFailure("sample_circulant: embedding eigenvalue " +
                                   std::to_string(lv) + " at index " +
                                   std::to_string(k));
        }
        lambda[k] = std::max(lv, 0.0);
    }
    return lambda;
}

} // namespace detail

/// Fast exact sampler: circulant embedding of the stationary increment
/// process (fractional Gaussian noise), one FFT per (path, coordinate).
inline PathEnsemble sample_circulant(const GridSpec& grid, const ModelParams& p,
                                     std::size_t M, std::uint64_t seed) {
    grid.validate();
    const int n = grid.total_cells();
    const std::vector<double> lambda = detail::circulant_eigenvalues(n, grid.dt(), p);
    const std::size_t m = lambda.size();
    const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
    std::vector<double> s_full(m), s_half(m);
    for (std::size_t k = 0; k < m; ++k) {
        s_full[k] = std::sqrt(lambda[k]);
        s_half[k] = std::sqrt(0.5 * lambda[k]);
    }

    PathEnsemble ens(p, grid, M, seed, SamplerMethod::CIRCULANT);
    std::vector<std::complex<double>> buf(m);
    for (std::size_t path = 0; path < M; ++path) {
        for (int coord = 0; coord < p.d; ++coord) {
            CounterRng rng(seed, path, static_cast<std::uint64_t>(coord));
            buf[0] = std::complex<double>(s_full[0] * rng.next_normal(), 0.0);
            for (std::size_t k = 1; k < m / 2; ++k) {
                const double re = rng.next_normal();
                const double im = rng.next_normal();
                buf[k] = std::complex<double>(s_half[k] * re, s_half[k] * im);
                buf[m - k] = std::conj(buf[k]);
            }
            buf[m / 2] = std::complex<double>(s_full[m / 2] * rng.next_normal(), 0.0);
            fft_radix2(buf, false);
            double* out = ens.mutable_series(path, static_cast<std::size_t>(coord));
            out[0] = 0.0;
            double level = 0.0;
            for (int i = 0; i < n; ++i) {
                level += buf[static_cast<std::size_t>(i)].real() * inv_sqrt_m;
                out[i + 1] = level;
            }
        }
    }
    return ens;
}

// ---------------------------------------------------------------------------
// Statistical self-validation against the exact covariance
// ---------------------------------------------------------------------------

struct ProbeResult {
    double s, t;
    double sample_cov;
    double exact_cov;
    double z_score;
};

struct ValidationReport {
    std::vector<ProbeResult> probes;
    double max_abs_z = 0.0;
    bool pass = true;  ///< all |z| <= 4
};

/// Per-pair z-scores of the pooled sample covariance (paths x coordinates
/// are iid copies) against eval_R.  The standard error uses the exact
/// Gaussian product variance Var(B_s B_t) = gamma(s) gamma(t) + R(s,t)^2.
inline ValidationReport validate_ensemble(const PathEnsemble& e,
                                          const std::vector<std::pair<double, double>>& probe_pairs) {
    const ModelParams& p = e.params();
    const double dt = e.grid().dt();
    ValidationReport rep;
    for (const auto& [s, t] : probe_pairs) {
        const auto si = static_cast<std::size_t>(std::llround(s / dt));
        const auto ti = static_cast<std::size_t>(std::llround(t / dt));
        if (std::abs(s - static_cast<double>(si) * dt) > 1e-9 ||
            std::abs(t - static_cast<double>(ti) * dt) > 1e-9 ||
            si >= e.n_points() || ti >= e.n_points()) {
            throw DomainError("validate_ensemble: probe times must lie on the grid");
        }
        MeanAccumulator acc;
        for (std::size_t path = 0; path < e.n_paths(); ++path) {
            for (int c = 0; c < p.d; ++c) {
                acc.add(e.value(path, static_cast<std::size_t>(c), si) *
                        e.value(path, static_cast<std::size_t>(c), ti));
            }
        }
        ProbeResult r;
        r.s = s;
        r.t = t;
        r.sample_cov = acc.mean();
        r.exact_cov = eval_R(s, t, p);
        const double var = p.gamma(s) * p.gamma(t) + r.exact_cov * r.exact_cov;
        const double se = std::sqrt(var / static_cast<double>(acc.count()));
        r.z_score = (r.sample_cov - r.exact_cov) / se;
        rep.max_abs_z = std::max(rep.max_abs_z, std::abs(r.z_score));
        rep.probes.push_back(r);
    }
    rep.pass = rep.max_abs_z <= 4.0;
    return rep;
}

} // namespace fbmlab

#endif // FBMLAB_FBM_HPP
