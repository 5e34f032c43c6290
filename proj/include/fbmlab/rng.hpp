#ifndef FBMLAB_RNG_HPP
#define FBMLAB_RNG_HPP

#include <cmath>
#include <cstdint>

namespace fbmlab {

/// Counter-based splittable pseudo-random stream built on the splitmix64
/// output function (Steele/Lea/Flood; finalizer due to Vigna/Stafford).
///
/// Unlike a stateful generator, the i-th output depends only on (key, i),
/// so independent streams keyed by (seed, path index, coordinate) are
/// reproducible regardless of evaluation order or parallel partitioning.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream_a = 0,
               std::uint64_t stream_b = 0)
        : key_(derive_key(seed, stream_a, stream_b)), counter_(0),
          have_cached_(false), cached_(0.0) {}

    /// Raw 64-bit output at the current counter position.
    std::uint64_t next_u64() { return value_at(counter_++); }

    /// Uniform variate in (0, 1] (never exactly 0, safe for log()).
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; pairs are cached so consecutive
    /// calls cost one transcendental pair per two variates.
    double next_normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t a,
                                    std::uint64_t b) {
        std::uint64_t k = mix(seed + kGolden);
        k = mix(k ^ (a + kGolden));
        k = mix(k ^ (b + kGolden));
        return k;
    }

    std::uint64_t value_at(std::uint64_t i) const {
        return mix(key_ + (i + 1) * kGolden);
    }

    std::uint64_t key_;
    std::uint64_t counter_;
    bool have_cached_;
    double cached_;
};

} // namespace fbmlab

#endif // FBMLAB_RNG_HPP
