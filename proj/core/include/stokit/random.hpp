#pragma once

#include <array>
#include <cstdint>

namespace stokit {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Every draw in
// the library is a pure function of (seed, stream, index, lane), so results do
// not depend on traversal order or on how work is split across threads.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key) noexcept;

// Stream tags occupy the top counter word.
namespace stream {
inline constexpr std::uint32_t positive_time = 0;
inline constexpr std::uint32_t negative_time = 1;
inline constexpr std::uint32_t exit_bridge = 2;
inline constexpr std::uint32_t bootstrap = 3;
inline constexpr std::uint32_t probe = 4;
// Bridge refinement: refine_base + (level << 16) + sublevel.
inline constexpr std::uint32_t refine_base = 0x01000000u;
}  // namespace stream

// Uniform on the open interval (0, 1) with 53 random bits.
double uniform_open(std::uint64_t seed, std::uint32_t stream, std::uint64_t index,
                    std::uint32_t lane) noexcept;

// Standard normal via the inverse CDF of uniform_open.
double standard_normal(std::uint64_t seed, std::uint32_t stream, std::uint64_t index,
                       std::uint32_t lane);

double inverse_normal_cdf(double u);

// SplitMix64 finalizer; derives the per-path seed from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

}  // namespace stokit
