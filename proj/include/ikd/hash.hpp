#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <type_traits>

namespace ikd {

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;

// FNV-1a, used for content hashes embedded in output artifacts.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = kFnvOffset) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t seed = kFnvOffset) {
  return fnv1a64(s.data(), s.size(), seed);
}

template <typename T>
std::uint64_t hash_combine(std::uint64_t h, const T& value) {
  static_assert(std::is_trivially_copyable_v<T>);
  return fnv1a64(&value, sizeof(T), h);
}

}  // namespace ikd
