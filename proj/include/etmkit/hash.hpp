#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace etm {

// 64-bit FNV-1a. Used wherever a hash must be stable across runs and
// platforms (std::hash gives no such guarantee).
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b));
}

std::string to_hex(std::uint64_t h);

// FNV-1a over the raw bytes of a file; throws DataError when unreadable.
std::uint64_t hash_file(const std::filesystem::path& path);

}  // namespace etm
