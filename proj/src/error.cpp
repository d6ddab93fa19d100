#include "uflst/error.hpp"

namespace uflst {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidArchitecture: return "invalid-architecture";
    case ErrorKind::kInput: return "input-error";
    case ErrorKind::kContractViolation: return "contract-violation";
    case ErrorKind::kInfeasibleCheck: return "infeasible-check";
    case ErrorKind::kEmptyClustering: return "empty-clustering";
    case ErrorKind::kEpisodeInfeasible: return "episode-infeasible";
    case ErrorKind::kProtocolInfeasible: return "protocol-infeasible";
    case ErrorKind::kFormat: return "format-error";
    case ErrorKind::kParse: return "parse-error";
    case ErrorKind::kIo: return "io-error";
    case ErrorKind::kRoundFailed: return "round-failed";
    case ErrorKind::kConfig: return "config-error";
  }
  return "error";
}

}  // namespace uflst
