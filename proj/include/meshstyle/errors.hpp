#ifndef MESHSTYLE_ERRORS_HPP
#define MESHSTYLE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace meshstyle {

// Failure categories. The CLI maps them to its exit codes.
enum struct error_kind {
  io,             // unreadable or unwritable file
  precondition,   // input violates a documented precondition
  compatibility,  // cache / mesh / weight mismatch
  numerical,      // NaN or runaway computation
};

struct error : std::runtime_error {
  error(error_kind kind, const std::string& message)
      : std::runtime_error(message), kind(kind) {}
  error_kind kind;
};

inline error io_error(const std::string& message) {
  return {error_kind::io, message};
}
inline error precondition_error(const std::string& message) {
  return {error_kind::precondition, message};
}
inline error compatibility_error(const std::string& message) {
  return {error_kind::compatibility, message};
}
inline error numerical_error(const std::string& message) {
  return {error_kind::numerical, message};
}

}  // namespace meshstyle

#endif
