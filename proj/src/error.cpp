#include "meshmamba/error.hpp"

#include <atomic>
#include <iostream>

namespace meshmamba {

namespace {
std::atomic<bool> g_warnings_enabled{true};
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Format: return "format";
    case ErrorKind::UnsupportedTopology: return "unsupported-topology";
    case ErrorKind::DegenerateGeometry: return "degenerate-geometry";
    case ErrorKind::Config: return "config";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::TextureAbsent: return "texture-absent";
    case ErrorKind::NoFixations: return "no-fixations";
    case ErrorKind::ConstantMap: return "constant-map";
    case ErrorKind::LengthMismatch: return "length-mismatch";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

void warn(const std::string& message) {
  if (g_warnings_enabled.load(std::memory_order_relaxed)) {
    std::cerr << "warning: " << message << '\n';
  }
}

void set_warnings_enabled(bool enabled) { g_warnings_enabled.store(enabled); }

}  // namespace meshmamba
