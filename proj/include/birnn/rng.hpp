#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace birnn {

// xoshiro256** (Blackman & Vigna) with the state expanded from a 64-bit seed
// by splitmix64. Both algorithms are fixed-width integer arithmetic, so a
// given seed yields the same stream on any platform or language port.
class Rng {
public:
    static constexpr std::string_view algorithm = "xoshiro256** seeded by splitmix64";

    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    // Uniform integer on the closed range [lo, hi], rejection-sampled.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    // Standard normal by Box-Muller; the second variate is cached.
    double normal();

    // k distinct indices from [0, n) by partial Fisher-Yates, sorted ascending.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::array<std::uint64_t, 4> s_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

// Derives an independent seed for a named sub-stream, e.g. ("init", seed).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

} // namespace birnn
