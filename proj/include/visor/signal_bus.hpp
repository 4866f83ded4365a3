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

// Continuous half of the hybrid message: the split signal embedding, the
// decoding-side projections into each module's condition space, and the two
// decoder-alignment losses (signal-token NLL and l2 caption alignment).

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "visor/embedding.hpp"
#include "visor/nn.hpp"
#include "visor/protocol.hpp"
#include "visor/rng.hpp"

namespace visor {

inline constexpr int kDefaultTaskSpecificDim = 32;
inline constexpr int kDefaultTaskInvariantDim = 32;

/// v = [v^p; v^s].
Eigen::VectorXd concat(const SignalEmbedding& embedding);
SignalEmbedding split(const Eigen::VectorXd& v, Eigen::Index task_specific_dim);

struct Projection {
  Eigen::MatrixXd weight;  // d_out x (d_p + d_s)
  Eigen::VectorXd bias;

  static Projection identity(Eigen::Index dim);
  static Projection random(Eigen::Index in, Eigen::Index out, Rng& rng);
};

Eigen::VectorXd project(const Projection& projection, const Eigen::VectorXd& v);

/// Squared euclidean distance; `grad` (if given) receives d/d projected.
double alignment_loss(const Eigen::VectorXd& projected, const Eigen::VectorXd& target,
                      Eigen::VectorXd* grad = nullptr);

/// Mean over positions of -log softmax(logits_t)[target_t]; `grad` (if given)
/// receives d/d logits.
double signal_token_nll(const Eigen::MatrixXd& logits, std::span<const int> targets,
                        Eigen::MatrixXd* grad = nullptr);

/// Loss with analytic gradient written into `grad` when non-null.
using LossFunction = std::function<double(const Eigen::VectorXd& params, Eigen::VectorXd* grad)>;

/// max_i |analytic_i - numeric_i| / max(1, |numeric_i|) with central differences.
double grad_check(const LossFunction& loss, const Eigen::VectorXd& params, double eps = 1e-5);

// ---------------------------------------------------------------------------
// Decoder alignment training

struct AlignConfig {
  int task_specific_dim = kDefaultTaskSpecificDim;
  int task_invariant_dim = kDefaultTaskInvariantDim;
  int caption_dim = 16;
  int condition_dim = 24;
  int signal_tokens = 4;
  int filler_tokens = 8;
  int samples_per_module = 48;
  int epochs = 60;
  int batch_size = 16;
  double learning_rate = 0.05;
  double alignment_weight = 1.0;
  std::uint64_t seed = 7;
};

/// Decision-model stub: caption features plus a module indicator are mapped to
/// a signal embedding, which emits signal tokens and, after per-module
/// projection, should match the module's frozen condition encoder.
class AlignmentModel {
 public:
  AlignmentModel(const AlignConfig& cfg, Rng& rng);

  int vocab_size() const { return vocab_; }
  int embedding_dim() const { return cfg_.task_specific_dim + cfg_.task_invariant_dim; }
  const AlignConfig& config() const { return cfg_; }

  /// Signal embedding for a caption addressed to `module`.
  SignalEmbedding embed(const Eigen::VectorXd& caption, ModuleName module) const;
  Eigen::MatrixXd token_logits(const Eigen::VectorXd& v) const;
  std::vector<int> signal_token_ids(ModuleName module) const;
  Projection projection(ModuleName module) const;

  struct Losses {
    double nll = 0.0;
    double alignment = 0.0;
    double total = 0.0;  // nll + alignment_weight * alignment
  };

  /// Per-sample losses; accumulates gradients when `backward` is set.
  Losses loss(const Eigen::VectorXd& caption, ModuleName module, const Eigen::VectorXd& target,
              bool backward);

  nn::ParamList params();

  std::string to_json() const;

 private:
  Eigen::VectorXd input(const Eigen::VectorXd& caption, ModuleName module) const;

  AlignConfig cfg_;
  int vocab_;
  nn::Affine encoder_;     // (caption_dim + modules) -> d_p + d_s
  nn::Affine token_head_;  // (d_p + d_s) -> signal_tokens * vocab
  std::vector<nn::Affine> projections_;
};

/// Frozen per-module condition encoders standing in for the specialists'
/// text-condition encoders.
struct ConditionEncoders {
  std::vector<Eigen::MatrixXd> maps;  // one condition_dim x caption_dim map per module
  Eigen::VectorXd encode(const Eigen::VectorXd& caption, ModuleName module) const;
  static ConditionEncoders seeded(const AlignConfig& cfg);
};

struct AlignSample {
  Eigen::VectorXd caption;
  ModuleName module;
  Eigen::VectorXd target;
};

std::vector<AlignSample> make_align_samples(const AlignConfig& cfg, const ConditionEncoders& enc,
                                            std::uint64_t seed);

struct AlignEpoch {
  int epoch = 0;
  double nll = 0.0;
  double alignment = 0.0;
};

struct AlignResult {
  std::vector<AlignEpoch> history;  // epoch 0 is the initialization
  std::string checkpoint_json;
  double heldout_alignment = 0.0;
};

AlignResult train_alignment(const AlignConfig& cfg);

std::string align_history_csv(const std::vector<AlignEpoch>& history);

}  // namespace visor
