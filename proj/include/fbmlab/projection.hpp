#ifndef FBMLAB_PROJECTION_HPP
#define FBMLAB_PROJECTION_HPP

#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "fbmlab/errors.hpp"
#include "fbmlab/fbm.hpp"
#include "fbmlab/integrands.hpp"
#include "fbmlab/kernel.hpp"
#include "fbmlab/model.hpp"
#include "fbmlab/stats.hpp"

namespace fbmlab {

// ---------------------------------------------------------------------------
// The Gaussian-regression projection operator at finite mollification radii,
//   Lambda0(eps,delta; s,t) = (1/4 eps delta) E[ B_{s-eps,s+eps} (x) B_{t-delta,t+delta} | B_s, B_t ],
// its exact decomposition into a centered random quadratic form plus a
// deterministic planar-increment part, the pointwise limit fields W(s,t) and
// M_t, and their closed-form second moments.
// ---------------------------------------------------------------------------

struct ProjectionSample {
    double s, t, eps, delta;
    Eigen::VectorXd z1;          ///< conditional-expectation coordinates, eps side
    Eigen::VectorXd z2;          ///< conditional-expectation coordinates, delta side
    Eigen::MatrixXd rand_part;   ///< centered quadratic form (1/4ed)[z1 z2^T - E]
    double det_part;             ///< (1/4ed) * planar increment of R (diagonal only)
    Eigen::MatrixXd lambda0;     ///< rand_part + det_part * I
};

/// Exact finite-radius projection by Gaussian linear regression onto
/// (B_s, B_t).  The expectation subtracted from the quadratic form is
/// computed in closed form from the covariances, never by Monte Carlo, so
/// the centering is exact per sample.
inline ProjectionSample project_lambda0(double eps, double delta, double s, double t,
                                        const Eigen::VectorXd& Bs,
                                        const Eigen::VectorXd& Bt,
                                        const ModelParams& p) {
    if (s == t) {
        throw DiagonalSingularity("project_lambda0: s == t");
    }
    if (Bs.size() != p.d || Bt.size() != p.d) {
        throw DomainError("project_lambda0: state vectors must have dimension d");
    }
    const PreLimitCoeffs c = eval_prelimit(eps, delta, s, t, p);
    const double gs = p.gamma(s);
    const double gt = p.gamma(t);
    const double R = eval_R(s, t, p);
    const double theta = gs * gt - R * R;
    if (theta <= 0.0) {
        throw OriginSingularity("project_lambda0: degenerate Gram matrix at (s,t)");
    }

    ProjectionSample out;
    out.s = s;
    out.t = t;
    out.eps = eps;
    out.delta = delta;
    out.z1 = (c.lam11e * Bs + c.lam12e * Bt) / theta;
    out.z2 = (c.lam21d * Bs + c.lam22d * Bt) / theta;
    // E[z1_i z2_j] = delta_ij * (closed form below): coordinates are
    // independent, and each coordinate pair shares the same 2x2 Gaussian law.
    const double ez1z2 = (c.lam11e * c.lam21d * gs + c.lam11e * c.lam22d * R +
                          c.lam12e * c.lam21d * R + c.lam12e * c.lam22d * gt) /
                         (theta * theta);
    const double norm = 1.0 / (4.0 * eps * delta);
    out.rand_part = norm * (out.z1 * out.z2.transpose() -
                            ez1z2 * Eigen::MatrixXd::Identity(p.d, p.d));
    out.det_part = norm * planar_increment_R(s - eps, s + eps, t - delta, t + delta, p);
    out.lambda0 = out.rand_part +
                  out.det_part * Eigen::MatrixXd::Identity(p.d, p.d);
    return out;
}

enum class WRepresentation { BASE, INCREMENT };

namespace detail {

/// Increment-basis form for s < t: with u = eta11 B_s + eta12 (B_t - B_s)
/// and v = eta21 B_s + eta22 (B_t - B_s),
///   W_ij = u_i v_j - delta_ij E[u v]  (per-coordinate law).
inline Eigen::MatrixXd w_eval_increment_ordered(const KernelPoint& k,
                                                const Eigen::VectorXd& Bs,
                                                const Eigen::VectorXd& Bt,
                                                const ModelParams& p) {
    const Eigen::VectorXd incr = Bt - Bs;
    const Eigen::VectorXd u = k.eta11 * Bs + k.eta12 * incr;
    const Eigen::VectorXd v = k.eta21 * Bs + k.eta22 * incr;
    const double w = std::pow(std::abs(k.t - k.s), 2.0 * p.H);
    const double mean = k.eta11 * k.eta21 * k.gamma_s +
                        (k.eta11 * k.eta22 + k.eta12 * k.eta21) * k.phi +
                        k.eta12 * k.eta22 * w;
    return u * v.transpose() - mean * Eigen::MatrixXd::Identity(p.d, p.d);
}

} // namespace detail

/// The limit random field W(s,t).  BASE contracts the four lambda-products
/// against the level tensors minus their covariances; INCREMENT uses the
/// eta-coefficients against (B_s, B_{s,t}) on s < t and the reflected
/// (transposed) form on t < s.  The two representations agree identically.
inline Eigen::MatrixXd W_eval(double s, double t, const Eigen::VectorXd& Bs,
                              const Eigen::VectorXd& Bt, const ModelParams& p,
                              WRepresentation rep = WRepresentation::INCREMENT) {
    if (Bs.size() != p.d || Bt.size() != p.d) {
        throw DomainError("W_eval: state vectors must have dimension d");
    }
    if (rep == WRepresentation::BASE) {
        const KernelPoint k = eval_lambda_limit(s, t, p);
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(p.d, p.d);
        return k.lambda11 * k.lambda21 * (Bs * Bs.transpose() - k.gamma_s * I) +
               k.lambda11 * k.lambda22 * (Bs * Bt.transpose() - k.R * I) +
               k.lambda12 * k.lambda21 * (Bt * Bs.transpose() - k.R * I) +
               k.lambda12 * k.lambda22 * (Bt * Bt.transpose() - k.gamma_t * I);
    }
    if (s < t) {
        return detail::w_eval_increment_ordered(eval_lambda_limit(s, t, p), Bs, Bt, p);
    }
    return detail::w_eval_increment_ordered(eval_lambda_limit(t, s, p), Bt, Bs, p)
        .transpose();
}

/// Scalar factor of the marginal field, f(t) = R(T,t) gamma'(t) / t^{4H}.
inline double marginal_factor(double t, const ModelParams& p) {
    if (t <= 0.0) {
        throw OriginSingularity("marginal_factor: t must be positive");
    }
    if (t > p.T) {
        throw DomainError("marginal_factor: t beyond the horizon");
    }
    return eval_R(p.T, t, p) * p.dgamma(t) / std::pow(t, 4.0 * p.H);
}

/// The marginal limit field M_t = f(t) ( B_t (x) B_t - gamma(t) I ).
inline Eigen::MatrixXd M_eval(double t, const Eigen::VectorXd& Bt,
                              const ModelParams& p) {
    if (Bt.size() != p.d) {
        throw DomainError("M_eval: state vector must have dimension d");
    }
    return marginal_factor(t, p) *
           (Bt * Bt.transpose() - p.gamma(t) * Eigen::MatrixXd::Identity(p.d, p.d));
}

struct ClosedNorms {
    double normW;      ///< sqrt( sum_ij Var W_ij ) = sqrt( 2 sum_ij Tr[(W Sigma)^2] )
    double normM_at_t; ///< sqrt(d^2 + d) * f(t) * gamma(t)
};

/// Closed-form L2 norms of the limit fields via the variance identity for
/// centered Gaussian quadratic forms, Var(x^T W x) = 2 Tr[(W Sigma)^2].
/// The d-aggregation constant sqrt(d^2 + d) for the marginal field is the
/// Frobenius combination of d diagonal entries of variance 2 f^2 gamma^2
/// and d(d-1) off-diagonal entries of variance f^2 gamma^2.
inline ClosedNorms closed_norms(double s, double t, const ModelParams& p) {
    if (s == t) {
        throw DiagonalSingularity("closed_norms: s == t");
    }
    const double lo = std::min(s, t);
    const double hi = std::max(s, t);
    const KernelPoint k = eval_lambda_limit(lo, hi, p);
    const double w = std::pow(hi - lo, 2.0 * p.H);
    Eigen::Matrix2d sigma2;
    sigma2 << k.gamma_s, k.phi, k.phi, w;

    // Diagonal entries (i == j): quadratic form on (B_s^i, B_{s,t}^i).
    Eigen::Matrix2d a2;
    a2 << k.eta11 * k.eta21, k.eta11 * k.eta22,
          k.eta12 * k.eta21, k.eta12 * k.eta22;
    const Eigen::Matrix2d w2 = 0.5 * (a2 + a2.transpose());
    const double tr_diag = ((w2 * sigma2) * (w2 * sigma2)).trace();

    // Off-diagonal entries (i != j): bilinear form on the independent pair.
    Eigen::Matrix4d a4 = Eigen::Matrix4d::Zero();
    a4(0, 2) = k.eta11 * k.eta21;
    a4(0, 3) = k.eta11 * k.eta22;
    a4(1, 2) = k.eta12 * k.eta21;
    a4(1, 3) = k.eta12 * k.eta22;
    const Eigen::Matrix4d w4 = 0.5 * (a4 + a4.transpose());
    Eigen::Matrix4d sigma4 = Eigen::Matrix4d::Zero();
    sigma4.topLeftCorner<2, 2>() = sigma2;
    sigma4.bottomRightCorner<2, 2>() = sigma2;
    const double tr_off = ((w4 * sigma4) * (w4 * sigma4)).trace();

    ClosedNorms out;
    const double d = static_cast<double>(p.d);
    out.normW = std::sqrt(2.0 * (d * tr_diag + d * (d - 1.0) * tr_off));
    out.normM_at_t = std::sqrt(d * d + d) * marginal_factor(t, p) * p.gamma(t);
    return out;
}

/// Monte Carlo check of the anti-symmetric pairing.  Per path, with
/// P_ab = (1/2 eps) int_0^T Y^a_s ( B^b_{s+eps} - B^b_{s-eps} ) ds and Q the
/// same at radius delta, the anti-symmetric contraction is
///   (1/2) [ tr(P) tr(Q) - tr(P Q) ],
/// whose expectation vanishes.  Identically zero for d = 1.
inline MCEstimate antisym_check(const PathEnsemble& ensemble, const IntegrandSpec& g,
                                int eps_cells, int delta_cells) {
    const ModelParams& p = ensemble.params();
    const GridSpec& grid = ensemble.grid();
    const double dt = grid.dt();
    const int n = grid.n_steps;
    const int max_cells = std::max(eps_cells, delta_cells);
    if (eps_cells < 1 || delta_cells < 1) {
        throw DomainError("antisym_check: radii must be >= 1 grid cell");
    }
    if (n - 1 + max_cells >= grid.n_points()) {
        throw HorizonTooShort("antisym_check: radius exceeds the sampled horizon");
    }
    const int d = p.d;
    MeanAccumulator acc;
    Eigen::MatrixXd P(d, d), Q(d, d);
    std::vector<double> x(static_cast<std::size_t>(d)), y(static_cast<std::size_t>(d));
    for (std::size_t path = 0; path < ensemble.n_paths(); ++path) {
        P.setZero();
        Q.setZero();
        // Midpoint rule on cells of width 2 dt centered at odd grid indices,
        // so every shifted evaluation stays on the grid.
        for (int j = 1; j < n; j += 2) {
            const double s = dt * static_cast<double>(j);
            for (int a = 0; a < d; ++a) {
                x[static_cast<std::size_t>(a)] =
                    ensemble.value(path, static_cast<std::size_t>(a),
                                   static_cast<std::size_t>(j));
            }
            g.eval(s, x.data(), d, y.data());
            for (int b = 0; b < d; ++b) {
                const auto sb = static_cast<std::size_t>(b);
                const double de = ensemble.value(path, sb, static_cast<std::size_t>(j + eps_cells)) -
                                  (j - eps_cells >= 0
                                       ? ensemble.value(path, sb, static_cast<std::size_t>(j - eps_cells))
                                       : 0.0);
                const double dd = ensemble.value(path, sb, static_cast<std::size_t>(j + delta_cells)) -
                                  (j - delta_cells >= 0
                                       ? ensemble.value(path, sb, static_cast<std::size_t>(j - delta_cells))
                                       : 0.0);
                for (int a = 0; a < d; ++a) {
                    P(a, b) += y[static_cast<std::size_t>(a)] * de;
                    Q(a, b) += y[static_cast<std::size_t>(a)] * dd;
                }
            }
        }
        P *= 2.0 * dt / (2.0 * eps_cells * dt);
        Q *= 2.0 * dt / (2.0 * delta_cells * dt);
        acc.add(0.5 * (P.trace() * Q.trace() - (P * Q).trace()));
    }
    return acc.estimate();
}

} // namespace fbmlab

#endif // FBMLAB_PROJECTION_HPP
