#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace syncmatrix {

// Derives a named sub-seed from a base seed. All randomness in the toolkit
// flows from one master seed through chains of derive_seed calls, so any
// component (a single clip, a training run, an eval trial) can be regenerated
// in isolation.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index = 0);

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace syncmatrix
