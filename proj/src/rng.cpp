#include "mf/rng.hpp"

#include <cmath>

namespace mf {

uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

SeededRng::SeededRng(uint64_t seed, uint64_t stream) {
    inc_ = (splitmix64(stream) << 1u) | 1u;
    state_ = 0u;
    next_u32();
    state_ += splitmix64(seed ^ (stream * 0x632BE59BD9B4E019ull));
    next_u32();
}

uint64_t SeededRng::pixel_stream(uint64_t pixel_index, uint64_t iteration) {
    return splitmix64(pixel_index) ^ (iteration * 0xD6E8FEB86659FD93ull);
}

uint32_t SeededRng::next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ull + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
}

uint64_t SeededRng::next_u64() {
    uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
}

double SeededRng::next_double() {
    // 53 random bits into [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

double SeededRng::normal() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace mf
