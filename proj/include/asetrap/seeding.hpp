#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace asetrap {

/// Engine used for every stochastic quantity in the toolkit.
using Rng = std::mt19937_64;

/// Name recorded in run manifests next to the seeds.
inline constexpr std::string_view kRngName =
    "mt19937_64 + std::normal_distribution<double>";

/// Seed derivation rule recorded in run manifests.
inline constexpr std::string_view kSeedDerivation =
    "seed_i = splitmix64(master_seed + (i + 1) * 0x9E3779B97F4A7C15)";

/// One round of the splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Per-realization seed, a pure function of (master, index).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace asetrap
