#pragma once

#include <cstdint>
#include <random>

namespace dnas3d {

using Rng = std::mt19937_64;

// Independent generator streams derived from one global seed.
enum class Stream : std::uint64_t { init = 1, architecture = 2, data = 3, split = 4, synth = 5 };

Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t salt = 0);

}  // namespace dnas3d
