#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fscil {

using Rng = std::mt19937_64;

// Mixes a base seed with a tag and an index so that every stage, session
// and cell draws from an independent, reproducible stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) noexcept;

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes) noexcept;

}  // namespace fscil
