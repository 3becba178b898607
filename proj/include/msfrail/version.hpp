#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace msfrail {

inline constexpr std::string_view kVersion = "0.1.0";

// FNV-1a, used to fingerprint serialized configs in reports.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_hash(std::string_view canonical_config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_config)));
  return std::string(buf);
}

}  // namespace msfrail
