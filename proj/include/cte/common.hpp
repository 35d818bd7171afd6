// Shared error types and small helpers used across the library.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cte {

// Base class for all library errors. Subclasses map onto the CLI exit codes
// (config -> 2, dependency -> 3, numeric -> 4, everything else -> 1).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input data (ragged level file, bad PNG, bad JSON, ...).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Shape or size mismatch between tensors/grids.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Non-finite values or failed numeric preconditions.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Invalid configuration file or option.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// A pipeline stage was invoked before its prerequisites ran.
class DependencyError : public Error {
 public:
  explicit DependencyError(const std::string& msg) : Error(msg) {}
};

// Hyperparameter search found no acceptable setting.
class TuningError : public Error {
 public:
  explicit TuningError(const std::string& msg) : Error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

inline void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NumericError("non-finite value in " + what);
}

// FNV-1a, used for config hashing and seed derivation. Stable across
// platforms; not cryptographic.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s,
                           std::uint64_t h = 1469598103934665603ull) {
  return fnv1a(s.data(), s.size(), h);
}

// Derives a named child seed from a base seed, so that every random process
// in a run has its own documented stream.
inline std::uint64_t derive_seed(std::uint64_t base, const std::string& name) {
  std::uint64_t h = fnv1a(name);
  return base ^ (h | 1ull);
}

}  // namespace cte
