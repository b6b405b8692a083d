#pragma once

#include <stdexcept>
#include <string>

namespace loadbench {

enum class ErrorKind {
  Usage,      // bad arguments or configuration
  Data,       // malformed or unusable input data
  Domain,     // value outside a transform's domain
  Range,      // index out of range
  Integrity,  // on-disk structures inconsistent with each other
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace loadbench
