#ifndef REPROCS_RNG_HPP_
#define REPROCS_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>

namespace reprocs {

// Deterministic RNG with explicit stream splitting. Monte-Carlo runs and
// per-object noise sources each draw from their own stream so that runs are
// reproducible regardless of evaluation order.
//
// Gaussian variates use Box-Muller on top of mt19937_64 rather than
// std::normal_distribution, whose output sequence is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // Derives an independent stream from (seed, stream_id) via splitmix64.
    static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
        return Rng(mix(seed + 0x9e3779b97f4a7c15ULL * (stream_id + 1)));
    }

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, bound).
    std::uint64_t uniform_below(std::uint64_t bound) {
        // Rejection to avoid modulo bias.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do { x = eng_(); } while (x >= limit);
        return x % bound;
    }

    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do { u1 = uniform(); } while (u1 <= 0.0);
        u2 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586476925287;
        spare_ = mag * std::sin(two_pi * u2);
        has_spare_ = true;
        return mag * std::cos(two_pi * u2);
    }

    double gaussian(double mean, double stddev) {
        return mean + stddev * gaussian();
    }

    // Zero-mean Gaussian with variance q, rejected outside |x| < 2 sqrt(q).
    double truncated_gaussian(double q) {
        if (q <= 0.0) return 0.0;
        const double sd = std::sqrt(q);
        double x;
        do { x = sd * gaussian(); } while (std::abs(x) >= 2.0 * sd);
        return x;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace reprocs

#endif  // REPROCS_RNG_HPP_
