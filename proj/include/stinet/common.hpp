#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace stinet {

namespace detail {
inline void format_into(std::ostringstream&) {}
template <typename T, typename... Rest>
void format_into(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  format_into(os, rest...);
}
}  // namespace detail

template <typename... Args>
[[noreturn]] void fail(const Args&... args) {
  std::ostringstream os;
  detail::format_into(os, args...);
  throw std::invalid_argument(os.str());
}

}  // namespace stinet

// Argument/shape validation. Throws std::invalid_argument so callers and
// tests can catch contract violations uniformly.
#define STINET_CHECK(cond, ...)                                    \
  do {                                                             \
    if (!(cond)) ::stinet::fail("check failed: ", #cond, ": ", __VA_ARGS__); \
  } while (0)
