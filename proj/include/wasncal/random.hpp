#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace wasncal {

using Rng = std::mt19937_64;

/// Stable 64-bit FNV-1a hash; used for seed derivation and config hashes.
std::uint64_t fnv1a64(std::string_view bytes);

/// Derive an independent seed for a named sub-stream of a root seed.
///
/// All randomness in the toolkit flows from one root seed through named
/// streams ("scene", "init", "dropout", "noise", ...), each optionally indexed
/// (scene number, restart number). The mapping is a pure function, so any
/// stream can be regenerated in isolation.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t root, std::string_view stream, std::uint64_t index = 0) {
  return Rng(derive_seed(root, stream, index));
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

}  // namespace wasncal
