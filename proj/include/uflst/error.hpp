#pragma once

#include <stdexcept>
#include <string>

namespace uflst {

enum class ErrorKind {
  kInvalidArchitecture,
  kInput,
  kContractViolation,
  kInfeasibleCheck,
  kEmptyClustering,
  kEpisodeInfeasible,
  kProtocolInfeasible,
  kFormat,
  kParse,
  kIo,
  kRoundFailed,
  kConfig,
};

const char* to_string(ErrorKind kind) noexcept;

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace uflst
