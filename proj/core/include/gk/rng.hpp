#pragma once

#include <cstdint>

namespace gk {

// xoshiro256++ (Blackman & Vigna, public domain reference implementation),
// seeded through splitmix64. All randomness in the library flows through
// this generator so that a 64-bit seed fully determines every output.

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent child seed for a work unit (LD block, replicate,
// method...). The rule is fixed: mix the master seed with (index + 1) times
// the splitmix64 increment, then finalize with splitmix64.
inline uint64_t derive_seed(uint64_t master, uint64_t index) {
    uint64_t s = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    return splitmix64(s);
}

class Rng {
public:
    explicit Rng(uint64_t seed = 0x853c49e6748fea9bULL) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    static Rng child(uint64_t master, uint64_t index) {
        return Rng(derive_seed(master, index));
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on the open interval (0, 1).
    double next_double() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Uniform integer in [0, n).
    uint64_t next_below(uint64_t n) {
        // Rejection-free enough for simulation use; bias is < 2^-53 for n < 2^40.
        return static_cast<uint64_t>(next_double() * static_cast<double>(n)) % n;
    }

    bool next_bool() { return (next_u64() >> 63) != 0; }

    // Standard normal via the inverse CDF; deterministic given the stream.
    double next_normal();

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

}
