#pragma once

#include <cstdint>
#include <string_view>

#include "gshell/vec3.hpp"

namespace gshell {

// Deterministic, platform-independent RNG. All randomness in the project flows
// from one user seed through named streams:
//
//     Rng r = Rng::stream(seed, "fit.msdf_init");
//
// so any stage can be replayed in isolation. std::mt19937 and the std
// distributions are avoided on purpose: distribution outputs are
// implementation-defined and would break cross-platform reproducibility.

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // decorrelate trivially related seeds
        splitmix64(state_);
    }

    static Rng stream(uint64_t seed, std::string_view name) {
        return Rng(seed ^ fnv1a64(name));
    }

    uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1) with 53 random mantissa bits
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // uniform direction on the unit sphere (area-exact: z uniform, azimuth uniform)
    Vec3 unit_vector() {
        double z = uniform(-1.0, 1.0);
        double phi = uniform(0.0, 6.283185307179586476925286766559);
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return {r * std::cos(phi), r * std::sin(phi), z};
    }

  private:
    uint64_t state_;
};

} // namespace gshell
