#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bsmd {

// Error codes are stable: the C API returns them verbatim (as negated values).
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kChainMismatch = 2,
  kUnsigned = 3,
  kPayloadLeak = 4,
  kEmptyBatch = 5,
  kKindMismatch = 6,
  kUntrustedIssuer = 7,
  kDuplicateSchema = 8,
  kUnknownSchema = 9,
  kNoProof = 10,
  kBadRadii = 11,
  kBadEpsilon = 12,
  kRadiusViolation = 13,
  kUnverifiedBroker = 14,
  kNotMatched = 15,
  kInactiveContract = 16,
  kChannelClosed = 17,
  kNotOwner = 18,
  kNotProposer = 19,
  kDuplicateContract = 20,
  kUnknownEntity = 21,
  kParse = 22,
  kIo = 23,
  kConfig = 24,
  kCrypto = 25,
  kInternal = 99,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bsmd
