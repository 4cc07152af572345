#include "bsmd/error.hpp"

namespace bsmd {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kOk: return "Ok";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kChainMismatch: return "ChainMismatch";
    case ErrorCode::kUnsigned: return "Unsigned";
    case ErrorCode::kPayloadLeak: return "PayloadLeak";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kKindMismatch: return "KindMismatch";
    case ErrorCode::kUntrustedIssuer: return "Untrusted";
    case ErrorCode::kDuplicateSchema: return "DuplicateSchema";
    case ErrorCode::kUnknownSchema: return "UnknownSchema";
    case ErrorCode::kNoProof: return "NoProof";
    case ErrorCode::kBadRadii: return "BadRadii";
    case ErrorCode::kBadEpsilon: return "BadEpsilon";
    case ErrorCode::kRadiusViolation: return "RadiusViolation";
    case ErrorCode::kUnverifiedBroker: return "UnverifiedBroker";
    case ErrorCode::kNotMatched: return "NotMatched";
    case ErrorCode::kInactiveContract: return "InactiveContract";
    case ErrorCode::kChannelClosed: return "ChannelClosed";
    case ErrorCode::kNotOwner: return "NotOwner";
    case ErrorCode::kNotProposer: return "NotProposer";
    case ErrorCode::kDuplicateContract: return "DuplicateContract";
    case ErrorCode::kUnknownEntity: return "UnknownEntity";
    case ErrorCode::kParse: return "Parse";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kConfig: return "Config";
    case ErrorCode::kCrypto: return "Crypto";
    case ErrorCode::kInternal: return "Internal";
  }
  return "Unknown";
}

}  // namespace bsmd
