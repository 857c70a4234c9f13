#pragma once

#include <array>
#include <cstdint>

namespace reprobe {

// Deterministic random source used by every stochastic operation in the
// library. The stream is fully specified so that runs reproduce bit-exactly
// across platforms: xoshiro256++ state, seeded through splitmix64, with
// normal variates produced by Box-Muller over 53-bit uniforms (no libc
// distribution functions are involved).
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 random mantissa bits.
    double next_uniform();

    // Standard normal variate. Consumes exactly two uniforms per pair.
    double next_gaussian();

    // Independent substream for a named purpose (input init, shift noise,
    // line-search candidates, ...). Same (seed, stream) always yields the
    // same substream.
    SeededRng split(std::uint64_t stream) const;

private:
    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_;
    double cached_gaussian_ = 0.0;
    bool has_cached_gaussian_ = false;
};

// Fixed substream tags so independent noise sources never alias.
namespace rng_stream {
inline constexpr std::uint64_t kInputInit = 1;
inline constexpr std::uint64_t kShiftNoise = 2;
inline constexpr std::uint64_t kLineSearch = 3;
inline constexpr std::uint64_t kOutputNoise = 4;
inline constexpr std::uint64_t kDataset = 5;
inline constexpr std::uint64_t kShuffle = 6;
}  // namespace rng_stream

}  // namespace reprobe
