#pragma once

#include <cstdint>
#include <random>

namespace ees {

//! Deterministic seed streams.
//!
//! Every RNG-consuming operation takes an explicit root seed and derives one
//! child seed per task from (root, task_index). Derivation is a pure function
//! of its arguments, so results do not depend on thread scheduling, and it is
//! collision-resistant under nesting (optimizer step -> particle -> simulation).
inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

//! Child seed for the task at `index` within the stream rooted at `root`.
inline std::uint64_t child_seed(std::uint64_t root, std::uint64_t index)
{
  return splitmix64(splitmix64(root) ^ (index * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL));
}

//! Engine construction goes through splitmix64 so that nearby seeds do not
//! produce correlated initial states.
inline std::mt19937_64 make_engine(std::uint64_t seed)
{
  std::seed_seq seq{ static_cast<std::uint32_t>(splitmix64(seed)),
                     static_cast<std::uint32_t>(splitmix64(seed) >> 32),
                     static_cast<std::uint32_t>(splitmix64(seed + 1)),
                     static_cast<std::uint32_t>(splitmix64(seed + 1) >> 32) };
  return std::mt19937_64(seq);
}

} // namespace ees
