#ifndef FBMLAB_INTEGRANDS_HPP
#define FBMLAB_INTEGRANDS_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fbmlab/errors.hpp"
#include "fbmlab/model.hpp"
#include "fbmlab/quadrature.hpp"
#include "fbmlab/rng.hpp"
#include "fbmlab/stats.hpp"

namespace fbmlab {

// ---------------------------------------------------------------------------
// Catalog of test integrands g : [0,T] x R^d -> R^d.
//
// Two families matter: jointly Hoelder functions whose declared exponents
// (gamma_bar in time, gamma in space) satisfy gamma > 1/(2H) - 1 and
// gamma_bar > 1/2 - H, and "slowly varying modulus" functions that are not
// gamma-Hoelder for any admissible gamma yet still fall inside the domain of
// the integral; membership of the latter is decided numerically.
// ---------------------------------------------------------------------------

enum class IntegrandKind { HOLDER, MODULUS, RAW };

struct IntegrandSpec {
    std::string name;
    IntegrandKind kind = IntegrandKind::RAW;
    double gamma_bar = 0.0;  ///< declared time Hoelder exponent
    double gamma = 0.0;      ///< declared space Hoelder exponent
    double bound = 0.0;      ///< sup-norm estimate when known (0 = unknown)
    /// Writes g(t, x) into out; x and out have d entries.
    std::function<void(double, const double*, int, double*)> g;

    void eval(double t, const double* x, int d, double* out) const {
        g(t, x, d, out);
    }

    /// Exponent gate for the isometry theorem's Hoelder hypothesis.
    bool meets_exponent_gate(double H) const {
        return gamma > 0.5 / H - 1.0 && gamma_bar > 0.5 - H;
    }
};

enum class HolderName { SIN, TANH, TIME_SIN };

/// Coordinatewise Lipschitz catalog entries, valid for all H in (1/4, 1/2)
/// since their declared exponents are (1, 1).
inline IntegrandSpec make_holder(HolderName name, const ModelParams& /*p*/) {
    IntegrandSpec spec;
    spec.kind = IntegrandKind::HOLDER;
    spec.gamma_bar = 1.0;
    spec.gamma = 1.0;
    switch (name) {
        case HolderName::SIN:
            spec.name = "sin";
            spec.bound = 1.0;
            spec.g = [](double, const double* x, int d, double* out) {
                for (int i = 0; i < d; ++i) out[i] = std::sin(x[i]);
            };
            break;
        case HolderName::TANH:
            spec.name = "tanh";
            spec.bound = 1.0;
            spec.g = [](double, const double* x, int d, double* out) {
                for (int i = 0; i < d; ++i) out[i] = std::tanh(x[i]);
            };
            break;
        case HolderName::TIME_SIN:
            spec.name = "time_sin";
            spec.bound = 1.0;
            spec.g = [](double t, const double* x, int d, double* out) {
                for (int i = 0; i < d; ++i) out[i] = std::sin(x[i] + t);
            };
            break;
    }
    return spec;
}

/// Constant integrand (every coordinate equal to c); increments vanish, so
/// both stochastic correction terms of the isometry are identically zero.
inline IntegrandSpec make_constant(double c) {
    IntegrandSpec spec;
    spec.name = "const";
    spec.kind = IntegrandKind::HOLDER;
    spec.gamma_bar = 1.0;
    spec.gamma = 1.0;
    spec.bound = std::abs(c);
    spec.g = [c](double, const double*, int d, double* out) {
        for (int i = 0; i < d; ++i) out[i] = c;
    };
    return spec;
}

/// Identity integrand g(x) = x (unbounded, Lipschitz).
inline IntegrandSpec make_linear() {
    IntegrandSpec spec;
    spec.name = "linear";
    spec.kind = IntegrandKind::HOLDER;
    spec.gamma_bar = 1.0;
    spec.gamma = 1.0;
    spec.g = [](double, const double* x, int d, double* out) {
        for (int i = 0; i < d; ++i) out[i] = x[i];
    };
    return spec;
}

/// Deterministic step function of time wrapped as an integrand (scalar step
/// value broadcast per coordinate from the StepFunction levels).
inline IntegrandSpec make_step(const StepFunction& f) {
    f.validate();
    IntegrandSpec spec;
    spec.name = "step";
    spec.kind = IntegrandKind::RAW;
    spec.g = [f](double t, const double*, int d, double* out) {
        for (int i = 0; i < d; ++i) {
            out[i] = f.value_at(t, static_cast<std::size_t>(i) < f.levels.front().size()
                                        ? static_cast<std::size_t>(i)
                                        : 0);
        }
    };
    return spec;
}

// ---------------------------------------------------------------------------
// Slowly varying moduli
// ---------------------------------------------------------------------------

enum class PsiKind { LOG_POW, LOGLOG, EXP_LOGLOG };

/// Family of slowly varying factors psi with psi(0) = 0:
///   LOG_POW(alpha):   (log(1/x))^{-alpha}
///   LOGLOG(alpha):    (log(1/x))^{-1/2} (log log(1/x))^{-alpha}
///   EXP_LOGLOG(beta): exp( -(log log(1/x))^{beta} )
/// Expected membership: LOG_POW and LOGLOG convergent iff alpha > 1/2,
/// EXP_LOGLOG convergent for beta > 1 (dominated by every LOG_POW).
struct PsiFamily {
    PsiKind kind;
    double param;    ///< alpha or beta
    double cutoff;   ///< domain cutoff a < 1

    static PsiFamily log_pow(double alpha) { return {PsiKind::LOG_POW, alpha, 0.9}; }
    static PsiFamily loglog(double alpha) {
        return {PsiKind::LOGLOG, alpha, std::exp(-1.0)};
    }
    static PsiFamily exp_loglog(double beta) {
        return {PsiKind::EXP_LOGLOG, beta, std::exp(-1.0)};
    }

    double psi(double x) const {
        if (x <= 0.0) return 0.0;
        x = std::min(x, cutoff);
        const double L = std::log(1.0 / x);
        switch (kind) {
            case PsiKind::LOG_POW:
                return std::pow(L, -param);
            case PsiKind::LOGLOG:
                return std::pow(L, -0.5) * std::pow(std::log(L), -param);
            case PsiKind::EXP_LOGLOG:
                return std::exp(-std::pow(std::log(L), param));
        }
        return 0.0;
    }

    MembershipVerdict expected_verdict() const {
        switch (kind) {
            case PsiKind::LOG_POW:
            case PsiKind::LOGLOG:
                return param > 0.5 ? MembershipVerdict::CONVERGENT
                                   : MembershipVerdict::DIVERGENT;
            case PsiKind::EXP_LOGLOG:
                return param > 1.0 ? MembershipVerdict::CONVERGENT
                                   : MembershipVerdict::DIVERGENT;
        }
        return MembershipVerdict::INCONCLUSIVE;
    }

    std::string label() const {
        switch (kind) {
            case PsiKind::LOG_POW:    return "LOG_POW(" + std::to_string(param) + ")";
            case PsiKind::LOGLOG:     return "LOGLOG(" + std::to_string(param) + ")";
            case PsiKind::EXP_LOGLOG: return "EXP_LOGLOG(" + std::to_string(param) + ")";
        }
        return "?";
    }
};

/// Bounded continuous realization of a function whose modulus of continuity
/// is V(x) = x^{1/(2H)-1} psi(x): the radial construction g(x) = V(min(|x|, a)).
struct ModulusIntegrand {
    PsiFamily family;
    double a;  ///< cutoff radius

    /// Space modulus V(x) = x^{1/(2H)-1} psi(x).
    double V_space(double x, const ModelParams& p) const {
        if (x <= 0.0) return 0.0;
        return std::pow(x, 0.5 / p.H - 1.0) * family.psi(x);
    }

    /// Matching time modulus y^{1/2-H} psi(y): V_space composed with the
    /// y^H scale of the driving paths, which is what the singular-measure
    /// membership test integrates.
    double V_time(double y, const ModelParams& p) const {
        if (y <= 0.0) return 0.0;
        return std::pow(y, 0.5 - p.H) * family.psi(y);
    }

    IntegrandSpec as_integrand(const ModelParams& p) const {
        IntegrandSpec spec;
        spec.name = "modulus_" + family.label();
        spec.kind = IntegrandKind::MODULUS;
        spec.bound = V_space(a, p);
        const double cutoff = a;
        const ModulusIntegrand self = *this;
        spec.g = [self, cutoff, p](double, const double* x, int d, double* out) {
            double norm2 = 0.0;
            for (int i = 0; i < d; ++i) norm2 += x[i] * x[i];
            const double v = self.V_space(std::min(std::sqrt(norm2), cutoff), p);
            for (int i = 0; i < d; ++i) out[i] = v;
        };
        return spec;
    }
};

inline ModulusIntegrand make_modulus(const PsiFamily& fam, const ModelParams& /*p*/) {
    ModulusIntegrand m;
    m.family = fam;
    m.a = fam.cutoff;
    return m;
}

// ---------------------------------------------------------------------------
// Empirical modulus of continuity
// ---------------------------------------------------------------------------

struct ModulusTable {
    std::vector<double> h;
    std::vector<double> sup_diff;
    double fitted_slope = 0.0;  ///< log-log slope over the smallest decades
};

/// Samples sup_x |g(x + h e_1) - g(x)| over random probe points for dyadic h.
/// For Lipschitz entries the fitted slope is ~1; for modulus entries it
/// approaches 1/(2H) - 1 from above with a slowly varying correction.
inline ModulusTable empirical_modulus(const IntegrandSpec& g, int d,
                                      std::size_t sample_count,
                                      std::uint64_t seed = 2024) {
    ModulusTable tab;
    CounterRng rng(seed, 0, 0);
    std::vector<std::vector<double>> probes(sample_count, std::vector<double>(d));
    for (auto& pt : probes) {
        for (int i = 0; i < d; ++i) pt[i] = 2.0 * rng.next_uniform() - 1.0;
    }
    // The origin must be probed: for the modulus family all roughness is
    // concentrated there, and smooth probes would report the Lipschitz rate.
    probes.emplace_back(d, 0.0);
    std::vector<double> xa(d), ya(d), yb(d);
    for (int k = 2; k <= 26; ++k) {
        const double h = std::ldexp(1.0, -k);
        double sup = 0.0;
        for (const auto& pt : probes) {
            xa = pt;
            g.eval(0.0, xa.data(), d, ya.data());
            xa[0] += h;
            g.eval(0.0, xa.data(), d, yb.data());
            for (int i = 0; i < d; ++i) sup = std::max(sup, std::abs(yb[i] - ya[i]));
        }
        tab.h.push_back(h);
        tab.sup_diff.push_back(sup);
    }
    std::vector<double> lx, ly;
    for (std::size_t i = tab.h.size() - 8; i < tab.h.size(); ++i) {
        if (tab.sup_diff[i] > 0.0) {
            lx.push_back(std::log(tab.h[i]));
            ly.push_back(std::log(tab.sup_diff[i]));
        }
    }
    if (lx.size() >= 2) tab.fitted_slope = fit_line(lx, ly).slope;
    return tab;
}

} // namespace fbmlab

#endif // FBMLAB_INTEGRANDS_HPP
