#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cbfw {

/// SplitMix64 output function; used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed for a sub-stream identified by (master, keys...). Order-sensitive.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys);

/// mt19937_64 with a platform-independent uniform draw (the standard
/// distributions are implementation-defined, so they are not used).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace cbfw
