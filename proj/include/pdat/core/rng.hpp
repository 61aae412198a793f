#ifndef PDAT_CORE_RNG_HPP
#define PDAT_CORE_RNG_HPP

#include <cstdint>
#include <random>
#include <string>

namespace pdat {

// FNV-1a, used to derive independent seeds per component so that enabling
// or disabling one module never shifts another module's random stream.
inline uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t derive_seed(uint64_t master, const std::string& component) {
  uint64_t h = fnv1a(component) ^ (master * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
  // splitmix finalizer
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebull;
  h ^= h >> 31;
  return h;
}

inline std::mt19937_64 make_rng(uint64_t master, const std::string& component) {
  return std::mt19937_64(derive_seed(master, component));
}

}  // namespace pdat

#endif
