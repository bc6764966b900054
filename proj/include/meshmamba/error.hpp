#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace meshmamba {

enum class ErrorKind {
  Format,
  UnsupportedTopology,
  DegenerateGeometry,
  Config,
  Numeric,
  TextureAbsent,
  NoFixations,
  ConstantMap,
  LengthMismatch,
  Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Warnings go to stderr unless silenced; tests silence them.
void warn(const std::string& message);
void set_warnings_enabled(bool enabled);

}  // namespace meshmamba
