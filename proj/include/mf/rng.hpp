#pragma once

#include <cstdint>

namespace mf {

// Deterministic counter-seeded PCG32. A stream is identified by a 64-bit id
// (typically hash of pixel index and iteration); identical (seed, stream)
// pairs always yield identical draw sequences regardless of thread count.
class SeededRng {
  public:
    SeededRng(uint64_t seed, uint64_t stream);

    // Stream id for a per-pixel, per-iteration draw sequence.
    static uint64_t pixel_stream(uint64_t pixel_index, uint64_t iteration);

    uint32_t next_u32();
    uint64_t next_u64();
    double next_double();  // uniform in [0, 1)
    double uniform(double lo, double hi);
    double normal();       // standard normal, Box-Muller

  private:
    uint64_t state_;
    uint64_t inc_;
};

uint64_t splitmix64(uint64_t x);

}  // namespace mf
