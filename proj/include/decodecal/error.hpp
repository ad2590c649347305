#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace decodecal {

enum class ErrorKind {
  invalid_input,
  invalid_parameter,
  configuration,
  degenerate_support,
  missing_entry,
  enumeration_too_large,
  invalid_spec,
  unknown_preset,
  io,
  parse,
  transport,
  http,
  auth,
  timeout,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace decodecal
