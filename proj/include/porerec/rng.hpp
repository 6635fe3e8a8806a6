#pragma once

#include <cstdint>

// Counter-based random numbers.  splitmix64 is a stateless bijective mixer,
// so hashing (seed, counter) gives an addressable random field: the value at
// a voxel depends only on the seed and the voxel's absolute index, never on
// evaluation order.  This is what makes block-wise generation of a large
// noise volume bit-identical to generating it in one piece.

namespace porerec {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Uniform double in [0,1) from the top 53 bits of the mixed counter.
inline double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
    std::uint64_t h = splitmix64(splitmix64(seed) ^ splitmix64(counter + 0x632BE59BD9B4E019ull));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Sequential form of the same mixer, used where a plain stream is wanted
// (sampling decisions, initial grids).  Kept instead of std::mt19937 so the
// byte-for-byte behavior does not depend on the C++ library.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() { return splitmix64(state_ += 0x9E3779B97F4A7C15ull); }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n) by 128-bit multiply-shift; the modulo bias is
    // below 2^-64 and irrelevant here.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

private:
    std::uint64_t state_;
};

}  // namespace porerec
