#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace adagrpo {

using Rng = std::mt19937_64;

/// Seed for a named sub-stream of a top-level seed. Streams with different
/// names are decorrelated; the mapping is stable across runs and platforms.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

inline Rng make_stream(std::uint64_t seed, std::string_view stream) {
  return Rng(derive_seed(seed, stream));
}

}  // namespace adagrpo
