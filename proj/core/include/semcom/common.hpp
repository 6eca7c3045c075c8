#pragma once

#include <stdexcept>
#include <string>

namespace semcom {

// Error taxonomy. The CLI maps these onto exit codes:
// ConfigError -> 2, DataError -> 3, NumericalError -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct NumericalError : Error {
  using Error::Error;
};

// FNV-1a, used for config hashes and name-derived seeds.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

}  // namespace semcom
