#pragma once

#include <cstdint>
#include <random>

namespace ldbn {

// splitmix64 output mix; advances state by the golden-gamma increment.
uint64_t splitmix64(uint64_t& state);

// Seed for substream `index` of `master`. Order-independent: derive(m, i)
// does not depend on any other index having been derived.
uint64_t derive_seed(uint64_t master, uint64_t index);

// Deterministic random stream with pinned bit-level mappings (the standard
// library distributions are implementation-defined, so they are not used).
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform();
    double uniform(double lo, double hi);

    // uniform integer in [0, n)
    int64_t uniform_int(int64_t n);

    // unit normal via Box-Muller
    double gaussian();

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace ldbn
