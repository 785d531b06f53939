#pragma once

#include <stdexcept>
#include <string>

namespace pingsim {

// Error categories surfaced through the C API as status codes.
enum class ErrorCode {
  InvalidArgument = 1,
  Config = 2,
  Runtime = 3,
  Io = 4,
  Singular = 5,
  NoStrike = 6,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::InvalidArgument, what);
}

}  // namespace pingsim
