#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace gradlearn {

// Deterministic random source for the simulation generators.
//
// Layout: one user-visible 64-bit seed; independent substreams are derived
// per purpose (class block, split, ...) by mixing the seed with a stream tag
// through the splitmix64 finalizer, and each substream drives its own
// mt19937_64.  Uniforms take the top 53 bits of the engine output; Gaussian
// variates use the explicit Box-Muller transform on those uniforms so the
// byte stream is a pure function of (seed, tag) with no library-dependent
// distribution internals involved.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t tag)
        : engine_(mix64(seed ^ mix64(tag))) {}

    // Uniform on (0, 1]: never returns 0, so log() below is always finite.
    double uniform01() {
        return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    // Uniform integer in [0, bound) by rejection (bound > 0).
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v;
        do { v = engine_(); } while (v >= limit);
        return v % bound;
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace gradlearn
