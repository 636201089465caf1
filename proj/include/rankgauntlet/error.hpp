#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rankgauntlet {

enum class ErrorCode {
  kInvalidRanking,
  kMalformedMatrix,
  kDimensionMismatch,
  kAllZeroTrust,
  kInvalidSparsity,
  kInvalidArchitecture,
  kEmptyDataset,
  kInvalidConfig,
  kInvalidZeta,
  kNoMaliciousClients,
  kNoHistory,
  kEmptyRange,
  kEmptyTrueSet,
  kEmptyInput,
  kNumericOverflow,
  kMissingKnowledge,
  kTooFewClients,
  kMissingRootData,
  kTooFewSamples,
  kParseError,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception; `code()` identifies the
// contract that was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rankgauntlet
