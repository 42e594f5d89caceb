#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <string_view>

namespace imbmix {

using Rng = std::mt19937_64;

/// Mixes a run seed with a component tag so that each stochastic component
/// (shuffling, pair selection, init, ...) owns an independent stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept;

inline Rng make_stream(std::uint64_t seed, std::string_view tag) { return Rng(derive_seed(seed, tag)); }

/// Uniform double in [0, 1) built from the top 53 bits of one draw.
inline double uniform01(Rng& rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). n must be positive.
std::size_t uniform_index(Rng& rng, std::size_t n) noexcept;

/// Fisher-Yates shuffle driven by uniform_index.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) noexcept {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

}  // namespace imbmix
