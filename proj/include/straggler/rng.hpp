#pragma once

#include <cstdint>

namespace straggler {

/// splitmix64: tiny seedable generator. Every random draw in the library and
/// harness flows from one of these so that runs are reproducible from a single
/// seed and trials can be given independent derived seeds.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform draw from [0, bound). bound must be nonzero.
    uint64_t below(uint64_t bound) {
        // Reject the sliver below 2^64 mod bound so the draw is unbiased.
        const uint64_t threshold = (0 - bound) % bound;
        uint64_t v;
        do {
            v = next();
        } while (v < threshold);
        return v % bound;
    }

    /// Uniform draw from [lo, hi] inclusive.
    uint64_t range(uint64_t lo, uint64_t hi) { return lo + below(hi - lo + 1); }

private:
    uint64_t state_;
};

/// Derives an independent child seed; used to fan a master seed out to trials.
inline uint64_t derive_seed(uint64_t master, uint64_t index) {
    SplitMix64 g(master ^ (0x6a09e667f3bcc909ULL + index * 0x9e3779b97f4a7c15ULL));
    g.next();
    return g.next();
}

}  // namespace straggler
