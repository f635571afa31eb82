#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace midcs {

using Engine = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// FNV-1a; only used to turn purpose labels into stable 64-bit tags.
constexpr std::uint64_t label_tag(std::string_view label) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

// Counter-based seed derivation: (master, purpose, index) -> seed. Streams for
// different purposes or indices never depend on how many draws another stream
// consumed, so adding an experiment leaves existing streams untouched.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                                    std::uint64_t index = 0) noexcept {
  std::uint64_t h = detail::splitmix64(master);
  h = detail::splitmix64(h ^ detail::label_tag(purpose));
  return detail::splitmix64(h ^ detail::splitmix64(index + 0x632BE59BD9B4E019ULL));
}

inline Engine make_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32)};
  return Engine(seq);
}

inline Engine make_engine(std::uint64_t master, std::string_view purpose,
                          std::uint64_t index = 0) {
  return make_engine(derive_seed(master, purpose, index));
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, bound) by rejection; unlike
// std::uniform_int_distribution the draw sequence is fixed across standard
// libraries.
inline std::uint64_t uniform_index(Engine& rng, std::uint64_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  for (;;) {
    const std::uint64_t v = rng();
    if (v < limit) return v % bound;
  }
}

// `count` distinct indices from [0, population), in draw order.
inline std::vector<std::size_t> sample_indices(Engine& rng, std::size_t population, std::size_t count) {
  std::vector<std::size_t> pool(population);
  for (std::size_t i = 0; i < population; ++i) pool[i] = i;
  count = count < population ? count : population;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, population - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

inline double standard_normal(Engine& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

}  // namespace midcs
