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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace visor {

/// Every failure the core can report. The numeric values are part of the C
/// ABI (see visor.h) and must never be reordered.
enum class ErrorCode : int {
  Ok = 0,
  // protocol
  UnbalancedTags = 1,
  UnknownModule = 2,
  MalformedRegion = 3,
  NonCanonicalBox = 4,
  MalformedPhraseLine = 5,
  MissingSpan = 6,
  SpanOnImage = 7,
  InvalidSpan = 8,
  DuplicateBlock = 9,
  IncompleteTask = 10,
  MalformedAnswer = 11,
  // geometry
  DegenerateBoxes = 20,
  DimensionMismatch = 21,
  BothEmpty = 22,
  EmptyDataset = 23,
  EmptyReference = 24,
  // region encoder
  EmptyMask = 30,
  // signal bus
  ShapeMismatch = 40,
  IndexOutOfVocab = 41,
  NonFiniteLoss = 42,
  // synergy
  EmptySequence = 50,
  DivergenceDetected = 51,
  // dispatch
  SpecialistFailure = 60,
  // datagen
  UnsupportedTask = 70,
  // plumbing
  InvalidArgument = 90,
  ConfigError = 91,
  IoError = 92,
  Internal = 99,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace visor
