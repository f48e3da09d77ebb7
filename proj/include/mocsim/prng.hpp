#ifndef MOCSIM_PRNG_H
#define MOCSIM_PRNG_H

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace mocsim {

/*
 * Deterministic pseudo-random stream (splitmix64 core).
 *
 * Simulations must produce byte-identical logs for equal (config, seed), so
 * we never touch std::uniform_*_distribution: their output is
 * implementation-defined and differs across standard libraries.  Everything
 * here is fixed bit-for-bit by the seed.
 */
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform double in [0, 1), 53 usable bits
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform double in (0, 1], safe as a log() argument
    double next_double_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // unbiased uniform integer in [0, n); rejection sampling on the top bits
    uint64_t next_below(uint64_t n) {
        if (n == 0) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // standard normal via Box-Muller; one value per call, no cached spare, so
    // the draw count stays predictable for replay
    double next_normal() {
        const double u1 = next_double_pos();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    bool next_bernoulli(double p) { return next_double() < p; }

private:
    uint64_t state_;
};

// Key mixer for deriving independent substreams from one run seed.  FNV-1a
// over the 64-bit words, then one splitmix finalizer pass.
inline uint64_t mix_keys(std::initializer_list<uint64_t> keys) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (uint64_t k : keys) {
        for (int i = 0; i < 8; ++i) {
            h ^= (k >> (8 * i)) & 0xff;
            h *= 0x100000001b3ull;
        }
    }
    h ^= h >> 30; h *= 0xbf58476d1ce4e5b9ull;
    h ^= h >> 27; h *= 0x94d049bb133111ebull;
    return h ^ (h >> 31);
}

// stable 64-bit hash for strings (FNV-1a), used to key per-domain streams
inline uint64_t hash_str(const char* s, size_t n) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(s[i]);
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace mocsim

#endif // MOCSIM_PRNG_H
