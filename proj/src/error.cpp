// Copyright 2026 The Visor Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "visor/error.hpp"

namespace visor {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Ok: return "Ok";
    case ErrorCode::UnbalancedTags: return "UnbalancedTags";
    case ErrorCode::UnknownModule: return "UnknownModule";
    case ErrorCode::MalformedRegion: return "MalformedRegion";
    case ErrorCode::NonCanonicalBox: return "NonCanonicalBox";
    case ErrorCode::MalformedPhraseLine: return "MalformedPhraseLine";
    case ErrorCode::MissingSpan: return "MissingSpan";
    case ErrorCode::SpanOnImage: return "SpanOnImage";
    case ErrorCode::InvalidSpan: return "InvalidSpan";
    case ErrorCode::DuplicateBlock: return "DuplicateBlock";
    case ErrorCode::IncompleteTask: return "IncompleteTask";
    case ErrorCode::MalformedAnswer: return "MalformedAnswer";
    case ErrorCode::DegenerateBoxes: return "DegenerateBoxes";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BothEmpty: return "BothEmpty";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::IndexOutOfVocab: return "IndexOutOfVocab";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::SpecialistFailure: return "SpecialistFailure";
    case ErrorCode::UnsupportedTask: return "UnsupportedTask";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace visor
