#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dpoly {

// Thrown for bad inputs: out-of-range parameters, malformed configs,
// precondition violations.  The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a well-formed request cannot be completed: enumeration caps,
// solver non-convergence, unsupported parameter combinations discovered at
// run time.  The CLI maps these to exit code 2.
class ComputeError : public std::runtime_error {
 public:
  explicit ComputeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Saturation guard for diverging recursions.  Values are clamped here and
// flagged rather than raising errors; blowup is a measured outcome.
inline constexpr double kDivergenceCap = 1e300;

// Doubles are serialized with 17 significant digits so that output files
// round-trip bit-exactly.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace dpoly
