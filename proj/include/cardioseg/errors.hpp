#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace cardioseg {

// Error taxonomy shared across the library. Every throwing operation raises
// Error with one of these codes so callers (and tests) can dispatch without
// string matching.
enum class Errc {
  io,
  format,
  truncation,
  unsupported_type,
  invalid_mode,
  shape,
  empty_foreground,
  degenerate_intensity,
  manifest,
  sampling,
  config,
  numeric,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace cardioseg
