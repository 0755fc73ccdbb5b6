#pragma once

#include <stdexcept>
#include <string>

namespace oasic {

enum class ErrorKind {
  kInvalidArgument,  // caller violated a precondition
  kIo,               // file missing or unwritable
  kFormat,           // corrupt or truncated file content
  kDegenerate,       // data cannot support the requested computation
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

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::kInvalidArgument, what);
}

}  // namespace oasic
