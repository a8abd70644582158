#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rwbound {

// SplitMix64 finalizer; used to derive independent per-trial seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// A random stream owned by exactly one worker. Streams for distinct
// (seed, index) pairs are derived by a counter-based split so that results
// do not depend on how trials are scheduled.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    static RandomStream substream(std::uint64_t seed, std::uint64_t index) {
        return RandomStream(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
    }

    // Uniform on the open interval (0, 1), 53 bits.
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Exp(1) variate.
    double standard_exponential() { return -std::log(uniform()); }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

} // namespace rwbound
