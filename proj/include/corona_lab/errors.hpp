#pragma once

#include <stdexcept>
#include <string>

namespace corona_lab {

enum class ErrorKind {
  Parameter,
  Resolution,
  Domain,
  Containment,
  Disjointness,
  Degenerate,
  Classification,
  Convergence,
  Assertion,
  Config,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace corona_lab
