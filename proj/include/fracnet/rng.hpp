#pragma once

#include <cstdint>

namespace fracnet {

/// SplitMix64 finaliser.
constexpr std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent sub-seed for stream `index` under `base`; stable across
/// platforms and execution order.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index)
{
  return splitmix64(splitmix64(base) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b)
{
  return derive_seed(derive_seed(base, a), b);
}

} // namespace fracnet
