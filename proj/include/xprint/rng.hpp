#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace xprint {

/**
 * Deterministic random source based on SplitMix64.
 *
 * The standard <random> distributions are implementation defined, which
 * breaks byte-identical reproducibility of generated corpora and trained
 * models across toolchains.  Everything random in this project flows
 * through this class instead.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) {
        if (hi < lo) throw std::invalid_argument("Rng::uniform: hi < lo");
        return lo + (hi - lo) * uniform();
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n == 0");
        return next_u64() % n;
    }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t between(std::int64_t lo, std::int64_t hi) {
        if (hi < lo) throw std::invalid_argument("Rng::between: hi < lo");
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    /// Gaussian via Box-Muller; two fresh uniforms per call, no cached spare.
    double normal(double mean, double sd) {
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double z = std::sqrt(-2.0 * std::log(u1)) *
                         std::cos(2.0 * std::numbers::pi * u2);
        return mean + sd * z;
    }

    /// Poisson count (Knuth multiplication method, fine for small lambda).
    int poisson(double lambda) {
        if (lambda < 0.0) throw std::invalid_argument("Rng::poisson: lambda < 0");
        if (lambda == 0.0) return 0;
        const double limit = std::exp(-lambda);
        int k = 0;
        double prod = uniform();
        while (prod > limit) {
            ++k;
            prod *= uniform();
        }
        return k;
    }

    /// Derive an independent stream seed; used to give parallel work items
    /// their own generators so results do not depend on scheduling.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        Rng r(seed ^ (0x632be59bd9b4e019ULL + stream * 0x9e3779b97f4a7c15ULL));
        r.next_u64();
        return r.next_u64();
    }

private:
    std::uint64_t state_;
};

}  // namespace xprint
