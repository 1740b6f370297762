#pragma once

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace starforge {

// Every domain failure carries a stable machine-readable code plus the
// operation that raised it. The CLI serializes these verbatim.
struct Error : std::runtime_error {
  std::string code;
  std::string location;

  Error(std::string code_, const std::string& message, std::string location_)
      : std::runtime_error(message),
        code(std::move(code_)),
        location(std::move(location_)) {}
};

[[noreturn]] inline void fail(const std::string& code, const std::string& message,
                              const std::string& location) {
  throw Error(code, message, location);
}

// Global term-count fuse. Any canonical container that would exceed the limit
// raises E_TERM_LIMIT instead of truncating.
inline std::size_t term_limit() {
  static const std::size_t limit = [] {
    if (const char* env = std::getenv("STARFORGE_MAX_TERMS")) {
      char* end = nullptr;
      unsigned long long v = std::strtoull(env, &end, 10);
      if (end && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return static_cast<std::size_t>(5'000'000);
  }();
  return limit;
}

inline void check_term_limit(std::size_t n, const std::string& location) {
  if (n > term_limit())
    fail("E_TERM_LIMIT",
         "term count " + std::to_string(n) + " exceeds STARFORGE_MAX_TERMS limit " +
             std::to_string(term_limit()),
         location);
}

}  // namespace starforge
