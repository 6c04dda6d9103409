#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace descdist {

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::string& path);

std::string hex64(std::uint64_t v);

}  // namespace descdist
