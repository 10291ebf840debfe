#pragma once

#include <stdexcept>
#include <string>

namespace blsat {

enum class ErrorCode {
  InvalidInput,
  NotPositiveSemidefinite,
  NotPositiveDefinite,
  Infeasible,
  Unbounded,
  NotConverged,
  UnsupportedDatum,
  UnsupportedScale,
  GridTooSmall,
  NotConvex,
  ConfigError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace blsat
