#ifndef FBMLAB_MODEL_HPP
#define FBMLAB_MODEL_HPP

#include <cmath>
#include <string>

#include "fbmlab/errors.hpp"

namespace fbmlab {

/// Global model parameters: Hurst exponent H, time horizon T and the
/// dimension d of the driving fractional Brownian motion.  Every kernel
/// evaluation in the library is parameterized by an instance of this type.
///
/// The library is only valid (and only validated) in the rough regime
/// 1/4 < H < 1/2; construction rejects anything outside the open interval.
struct ModelParams {
    double H;
    double T;
    int d;

    ModelParams(double hurst, double horizon, int dim)
        : H(hurst), T(horizon), d(dim) {
        if (!(H > 0.25 && H < 0.5)) {
            throw DomainError("ModelParams: H must lie in (1/4, 1/2), got " +
                              std::to_string(H));
        }
        if (!(T > 0.0)) {
            throw DomainError("ModelParams: T must be positive, got " +
                              std::to_string(T));
        }
        if (d < 1) {
            throw DomainError("ModelParams: d must be >= 1, got " +
                              std::to_string(d));
        }
    }

    /// Variance function gamma(t) = t^{2H} (clamped at zero on the left).
    double gamma(double t) const {
        if (t <= 0.0) return 0.0;
        return std::pow(t, 2.0 * H);
    }

    /// Derivative gamma'(t) = 2H t^{2H-1}, t > 0.
    double dgamma(double t) const {
        if (t <= 0.0) {
            throw OriginSingularity("dgamma: t must be positive");
        }
        return 2.0 * H * std::pow(t, 2.0 * H - 1.0);
    }
};

} // namespace fbmlab

#endif // FBMLAB_MODEL_HPP
