#pragma once

#include <stdexcept>
#include <string>

namespace polydepth {

enum class ErrorCode {
  InvalidArgument = 1,
  DimensionMismatch = 2,
  Domain = 3,
  Numeric = 4,
  Parse = 5,
  Io = 6,
  VerificationFailed = 7,
};

/// Every failure raised by the core library carries one of the codes above;
/// the C API maps them 1:1 onto pd_status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace polydepth
