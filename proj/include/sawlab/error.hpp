#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sawlab {

enum class ErrorKind {
  shape,
  non_finite,
  invalid_argument,
  invalid_state,
  malformed_header,
  truncated_payload,
  dimension_mismatch,
  io,
  config,
  degenerate_critic,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and the
// CLI) can report it in one machine-parseable line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace sawlab
