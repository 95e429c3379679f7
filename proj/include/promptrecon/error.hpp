// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace promptrecon {

enum class ErrorCode {
  // shared
  kDimMismatch,
  kZeroVector,
  kBadK,
  kInvalidArgument,
  kIo,
  kParse,
  // corpus
  kNegativeEpoch,
  // modifiers
  kEmptyVocabulary,
  // bank
  kEmptyBank,
  kBadMagic,
  kVersionUnsupported,
  kTruncatedFile,
  kChecksumMismatch,
  kTrailingData,
  kNotNormalized,
  kMissingGroundTruth,
  // classifier
  kNonFiniteParameter,
  kEmptyDataset,
  kNoEvalSamples,
  // promptgen
  kMissingExample,
  kEmptyModifierList,
  kEmptyHistory,
  kTemplate,
  // orchestrator
  kEmptySet,
  kBackend,
  // eval
  kEmptyGroup,
  kScoreOutOfRange,
  // cost
  kUnknownBackend,
  kMissingUsage,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Library-wide exception. Every failure raised by promptrecon carries a code
/// so callers (and the CLI exit-code mapping) can branch without string
/// matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace promptrecon
