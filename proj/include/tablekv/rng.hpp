#pragma once

#include <cstdint>

namespace tablekv {

// splitmix64; used both as a stream generator and as a counter-based hash so
// weight init does not depend on draw order or platform library behavior.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t mix3(uint64_t seed, uint64_t tag, uint64_t index) {
    uint64_t h = splitmix64(seed ^ 0x243f6a8885a308d3ull);
    h = splitmix64(h ^ splitmix64(tag));
    return splitmix64(h + index * 0x9e3779b97f4a7c15ull);
}

// Uniform double in [0, 1) from the top 53 bits.
inline double u64_to_unit(uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Uniform in [-1, 1).
inline double u64_to_signed_unit(uint64_t x) {
    return u64_to_unit(x) * 2.0 - 1.0;
}

// Small sequential generator with explicit, platform-independent mapping.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) : state_(splitmix64(seed ^ 0x9e3779b97f4a7c15ull)) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    // Unbiased-enough for test workloads; avoids std::uniform_int_distribution
    // whose output is implementation-defined.
    uint64_t next_below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    double next_unit() { return u64_to_unit(next_u64()); }

private:
    uint64_t state_;
};

} // namespace tablekv
