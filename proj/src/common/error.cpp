// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include "promptrecon/error.hpp"

namespace promptrecon {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kBadK: return "BadK";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kNegativeEpoch: return "NegativeEpoch";
    case ErrorCode::kEmptyVocabulary: return "EmptyVocabulary";
    case ErrorCode::kEmptyBank: return "EmptyBank";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kVersionUnsupported: return "VersionUnsupported";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::kTrailingData: return "TrailingData";
    case ErrorCode::kNotNormalized: return "NotNormalized";
    case ErrorCode::kMissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::kNonFiniteParameter: return "NonFiniteParameter";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kNoEvalSamples: return "NoEvalSamples";
    case ErrorCode::kMissingExample: return "MissingExample";
    case ErrorCode::kEmptyModifierList: return "EmptyModifierList";
    case ErrorCode::kEmptyHistory: return "EmptyHistory";
    case ErrorCode::kTemplate: return "TemplateError";
    case ErrorCode::kEmptySet: return "EmptySet";
    case ErrorCode::kBackend: return "BackendError";
    case ErrorCode::kEmptyGroup: return "EmptyGroup";
    case ErrorCode::kScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::kUnknownBackend: return "UnknownBackend";
    case ErrorCode::kMissingUsage: return "MissingUsage";
  }
  return "Unknown";
}

}  // namespace promptrecon
