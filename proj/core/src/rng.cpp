#include "hcrnn/rng.hpp"

namespace hcrnn {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view subsystem) {
  // FNV-1a over the name, then mix with the root.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : subsystem) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(root ^ splitmix64(h));
}

}  // namespace hcrnn
