#include "phasemix/rng.hpp"

#include <stdexcept>

namespace phasemix {

std::uint64_t seed_derive(std::uint64_t master, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(master ^ splitmix64(h));
}

std::uint64_t SeedRegistry::derive(std::string_view label) {
  auto [it, fresh] = used_.emplace(label);
  if (!fresh) throw std::invalid_argument("seed label used twice: " + std::string(label));
  return seed_derive(master_, label);
}

}  // namespace phasemix
