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

#include <Eigen/Dense>

namespace visor {

/// Signal embedding handed to a backend module alongside the text
/// instruction: a task-specific half followed by a task-invariant half.
struct SignalEmbedding {
  Eigen::VectorXd task_specific;
  Eigen::VectorXd task_invariant;

  Eigen::Index dim() const { return task_specific.size() + task_invariant.size(); }

  friend bool operator==(const SignalEmbedding& a, const SignalEmbedding& b) {
    return a.task_specific.size() == b.task_specific.size() &&
           a.task_invariant.size() == b.task_invariant.size() &&
           a.task_specific == b.task_specific && a.task_invariant == b.task_invariant;
  }
};

}  // namespace visor
