#ifndef FBMLAB_ERRORS_HPP
#define FBMLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fbmlab {

/// Base class for all domain/precondition violations raised by the library.
/// Callers that want a single catch-all can catch this type; the CLI maps it
/// to the "usage error" exit code.
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Evaluation requested on the diagonal s == t where the quantity is singular
/// or undefined (Theta vanishes, derivative kernels blow up).
class DiagonalSingularity : public DomainError {
public:
    explicit DiagonalSingularity(const std::string& msg) : DomainError(msg) {}
};

/// Evaluation requested at s == 0 or t == 0 where a derivative or a
/// regression coefficient in that variable is singular.
class OriginSingularity : public DomainError {
public:
    explicit OriginSingularity(const std::string& msg) : DomainError(msg) {}
};

/// Scale parameter of the odd growth function was non-positive.
class NonpositiveScale : public DomainError {
public:
    explicit NonpositiveScale(const std::string& msg) : DomainError(msg) {}
};

/// The declared near-diagonal decay exponent is too small for the singular
/// double integral to converge; the band extrapolation refuses to produce a
/// number that cannot exist.
class BandDivergence : public DomainError {
public:
    explicit BandDivergence(const std::string& msg) : DomainError(msg) {}
};

/// Dense covariance factorization failed even after a single jitter retry.
class FactorizationFailure : public std::runtime_error {
public:
    explicit FactorizationFailure(const std::string& msg) : std::runtime_error(msg) {}
};

/// Circulant embedding produced a significantly negative eigenvalue.
class EmbeddingFailure : public std::runtime_error {
public:
    explicit EmbeddingFailure(const std::string& msg) : std::runtime_error(msg) {}
};

/// A mollification radius pushed an evaluation past the sampled horizon.
class HorizonTooShort : public DomainError {
public:
    explicit HorizonTooShort(const std::string& msg) : DomainError(msg) {}
};

} // namespace fbmlab

#endif // FBMLAB_ERRORS_HPP
