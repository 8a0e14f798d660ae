#pragma once

#include <cmath>
#include <cstdint>

namespace drmpc {

/// splitmix64 step; used both as a generator and as a seed mixer.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive an independent stream seed from a master seed and up to three
/// indices (stage, horizon step, obstacle, ...). Stable across platforms.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = master;
    splitmix64(s);
    s ^= 0x9e3779b97f4a7c15ULL * (a + 1);
    splitmix64(s);
    s ^= 0xc2b2ae3d27d4eb4fULL * (b + 1);
    splitmix64(s);
    s ^= 0x165667b19e3779f9ULL * (c + 1);
    return splitmix64(s);
}

/// Deterministic Gaussian stream (splitmix64 + Box-Muller). Hand-rolled so
/// traces are reproducible independent of the standard library build.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : state_(seed) {}

    double uniform() {  // in (0, 1)
        const std::uint64_t bits = splitmix64(state_);
        return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
    }

    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace drmpc
