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

// Cross-task synergy learning.
//
// Each task k predicts y_k = M_k([v^p; v^s]) from a task-specific feature v^p
// and a shared feature v^s. A task discriminator reads only the shared
// feature tokens and predicts which task produced them. Training minimizes
//
//     sum_k L_k + L^syn
//
// where the discriminator descends on L^syn (cross-entropy of the task id)
// while the shared encoder receives -lambda * dL^syn through a gradient
// reversal, so the shared features are pushed towards carrying no task
// identity.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "visor/nn.hpp"
#include "visor/rng.hpp"

namespace visor::synergy {

using nn::Matrix;
using nn::Vector;

// ---------------------------------------------------------------------------
// Gradient reversal

/// Forward is the identity.
inline const Matrix& grl_forward(const Matrix& x) { return x; }
/// Backward scales the incoming gradient by -lambda.
inline Matrix grl_backward(const Matrix& grad_out, double lambda) { return -lambda * grad_out; }

// ---------------------------------------------------------------------------
// Task head

/// Two-layer map from [v^p; v^s] to the task output. hidden == 0 gives a
/// single affine layer.
class TaskHead {
 public:
  TaskHead(int input_dim, int hidden, int output_dim, Rng& rng);
  static TaskHead zeros(int input_dim, int hidden, int output_dim);

  int input_dim() const { return static_cast<int>(first_.in()); }
  int output_dim() const;

  /// Rows are samples.
  Matrix forward(const Matrix& v) const;
  /// Accumulates parameter gradients and returns dL/dv.
  Matrix backward(const Matrix& v, const Matrix& grad_out);

  Vector forward_one(const Vector& v) const;

  void append_params(nn::ParamList& params, const std::string& prefix);

  nn::Affine& first() { return first_; }
  std::optional<nn::Affine>& second() { return second_; }

 private:
  TaskHead() = default;
  nn::Affine first_;
  std::optional<nn::Affine> second_;
};

// ---------------------------------------------------------------------------
// Discriminator

struct DiscriminatorConfig {
  int layers = 2;
  int width = 32;
  int ffn_hidden = 64;
  int head_hidden = 32;
};

/// Per-token LayerNorm with learned gain and bias.
struct LayerNorm {
  Vector gain;
  Vector bias;
  Vector grad_gain;
  Vector grad_bias;

  explicit LayerNorm(Eigen::Index dim = 0);
  Matrix forward(const Matrix& x) const;
  Matrix backward(const Matrix& x, const Matrix& grad_out);
  void append_params(nn::ParamList& params, const std::string& prefix);
};

/// Pre-norm transformer encoder over each sample's token sequence, mean-pooled
/// and classified by a two-layer FFN with softmax over the K tasks.
class Discriminator {
 public:
  Discriminator(int input_dim, int tasks, const DiscriminatorConfig& cfg, Rng& rng);

  int input_dim() const { return static_cast<int>(input_.in()); }
  int tasks() const { return tasks_; }
  const DiscriminatorConfig& config() const { return cfg_; }

  /// tokens: (batch * seq_len) x input_dim, sequences contiguous.
  /// Returns batch x K probabilities.
  Matrix forward(const Matrix& tokens, int seq_len) const;

  /// Probability vector for one sequence (rows are tokens).
  Vector predict(const Matrix& sequence) const;

  /// Mean cross-entropy of the true task ids. With `backward`, parameter
  /// gradients are accumulated and dL/dtokens is written to `grad_tokens`
  /// when it is non-null.
  double loss(const Matrix& tokens, int seq_len, const std::vector<int>& task_ids,
              bool backward, Matrix* grad_tokens = nullptr,
              Matrix* probabilities = nullptr);

  void append_params(nn::ParamList& params, const std::string& prefix = "disc");

  struct Layer {
    LayerNorm norm1;
    nn::Affine query;
    nn::Affine key;
    nn::Affine value;
    nn::Affine output;
    LayerNorm norm2;
    nn::Affine ffn_in;
    nn::Affine ffn_out;
  };

  // Exposed for white-box verification.
  nn::Affine& input_layer() { return input_; }
  std::vector<Layer>& layers() { return layers_; }
  LayerNorm& final_norm() { return final_norm_; }
  nn::Affine& head_in() { return head_in_; }
  nn::Affine& head_out() { return head_out_; }

 private:
  struct LayerCache;
  Matrix encode(const Matrix& tokens, int seq_len, std::vector<LayerCache>* caches,
                Matrix* h0, Matrix* pre_final) const;

  DiscriminatorConfig cfg_;
  int tasks_;
  nn::Affine input_;
  std::vector<Layer> layers_;
  LayerNorm final_norm_;
  nn::Affine head_in_;
  nn::Affine head_out_;
};

/// -log(pred[k]) with the probability clamped at 1e-12.
double adversarial_loss(const Vector& prediction, int true_task);

// ---------------------------------------------------------------------------
// Synthetic benchmark

enum class LabelSource { Shared, Private };

struct TaskDefinition {
  LabelSource source = LabelSource::Shared;
  int label_function = 0;  // tasks with equal id and source share g_k
};

struct SynergyConfig {
  std::vector<TaskDefinition> tasks = {
      {LabelSource::Shared, 0}, {LabelSource::Shared, 0},
      {LabelSource::Private, 1}, {LabelSource::Private, 2}};
  int shared_latent = 4;
  int private_latent = 4;
  int shared_input = 16;
  int private_input = 8;
  int shared_dim = 16;   // d_s
  int private_dim = 8;   // d_p
  int seq_len = 2;
  int head_hidden = 16;
  double input_noise = 0.1;
  double signature_scale = 0.25;
  int train_per_task = 200;
  int heldout_per_task = 200;

  int epochs = 200;
  int batch_size = 128;
  double learning_rate = 0.05;
  double disc_learning_rate = 0.2;
  double weight_decay = 0.0;  // producer parameters only
  double lambda = 1.0;
  int warmup_epochs = 0;
  bool alternating = false;
  int inner_steps = 1;
  DiscriminatorConfig disc;

  int probe_epochs = 60;
  double probe_learning_rate = 0.1;
  int probe_batch_size = 32;
  std::uint64_t seed = 7;
};

/// Samples of one task. Shared tokens are (n * seq_len) x shared_input, the
/// private input n x private_input, labels n x 1.
struct TaskSplit {
  Matrix shared_tokens;
  Matrix private_input;
  Matrix labels;
  Eigen::Index size() const { return labels.rows(); }
};

/// Latent-variable benchmark with known ground truth. The shared input
/// carries z_shared plus a per-task signature in a hidden subspace; labels
/// depend on z_shared or on the task's private latent. Every task's data is
/// a function of (seed, task index, label function) only.
class SyntheticTaskSet {
 public:
  static SyntheticTaskSet generate(const SynergyConfig& cfg);
  /// Subset of tasks, renumbered 0..n-1, with their original data.
  SyntheticTaskSet subset(const std::vector<int>& task_indices) const;

  int tasks() const { return static_cast<int>(train_.size()); }
  /// Index of task k in the set it was generated with.
  int origin(int k) const { return origins_[static_cast<std::size_t>(k)]; }
  const std::vector<int>& origins() const { return origins_; }
  const TaskSplit& train(int k) const { return train_[static_cast<std::size_t>(k)]; }
  const TaskSplit& heldout(int k) const { return heldout_[static_cast<std::size_t>(k)]; }
  const TaskDefinition& definition(int k) const { return defs_[static_cast<std::size_t>(k)]; }
  int seq_len() const { return seq_len_; }

 private:
  std::vector<TaskDefinition> defs_;
  std::vector<TaskSplit> train_;
  std::vector<TaskSplit> heldout_;
  std::vector<int> origins_;
  int seq_len_ = 1;
};

// ---------------------------------------------------------------------------
// Model and trainer

struct Batch {
  Matrix shared_tokens;   // (n * seq_len) x shared_input
  Matrix private_input;   // n x private_input
  Matrix labels;          // n x 1
  std::vector<int> task_ids;
};

Batch make_batch(const SyntheticTaskSet& data, const std::vector<std::pair<int, Eigen::Index>>& picks,
                 bool heldout = false);

struct ObjectiveTerms {
  std::vector<double> task_losses;  // per task mean squared error (0 if absent)
  double task_total = 0.0;          // sum_k L_k
  double adversarial = 0.0;         // L^syn
  double disc_accuracy = 0.0;
};

class SynergyModel {
 public:
  /// Per-task parameters are seeded by the task's origin index, so a task
  /// starts from the same weights whichever tasks it is trained with.
  SynergyModel(const SynergyConfig& cfg, const std::vector<int>& task_origins);

  int tasks() const { return static_cast<int>(heads_.size()); }

  /// Shared features for the tokens: tanh(W x + b), one row per token.
  Matrix shared_features(const Matrix& shared_tokens) const;

  /// Forward pass; with `backward`, gradients are accumulated so that the
  /// producer parameters (shared/private encoders, heads) hold
  /// d(sum L_k)/dtheta - lambda * dL^syn/dtheta and the discriminator holds
  /// dL^syn/dD.
  ObjectiveTerms objective(const Batch& batch, double lambda, bool backward);

  /// Held-out mean squared error of every task.
  std::vector<double> heldout_losses(const SyntheticTaskSet& data) const;

  nn::ParamList producer_params();
  nn::ParamList discriminator_params();

  Discriminator& discriminator() { return disc_; }
  TaskHead& head(int k) { return heads_[static_cast<std::size_t>(k)]; }

 private:
  Matrix private_features(int k, const Matrix& input) const;

  SynergyConfig cfg_;
  nn::Affine shared_encoder_;
  std::vector<nn::Affine> private_encoders_;
  std::vector<TaskHead> heads_;
  Discriminator disc_;
};

struct LossReport {
  int epoch = 0;
  std::vector<double> task_losses;
  double adversarial = 0.0;
  double disc_accuracy = 0.0;
};

struct ProbeResult {
  double train_accuracy = 0.0;
  double heldout_accuracy = 0.0;
};

struct SynergyResult {
  std::vector<LossReport> history;
  std::vector<double> heldout_task_losses;
  ProbeResult probe;
  nn::Vector producer_parameters;
  nn::Vector discriminator_parameters;
};

/// Trains on `data` with `cfg` (cfg.tasks is ignored in favour of the data).
SynergyResult train_synergy(const SyntheticTaskSet& data, const SynergyConfig& cfg);

/// Fresh discriminator trained on frozen shared features; accuracy on the
/// held-out split.
ProbeResult probe_shared_features(SynergyModel& model, const SyntheticTaskSet& data,
                                  const SynergyConfig& cfg);

struct SynergyMatrix {
  std::vector<std::vector<double>> improvement;  // [i][j]
  std::vector<double> solo_losses;
};

/// improvement[i][j] = solo held-out loss of task i minus its held-out loss
/// when co-trained with task j; the diagonal is 0.
SynergyMatrix pairwise_synergy(const SyntheticTaskSet& data,
                               const std::vector<std::pair<int, int>>& pairs,
                               const SynergyConfig& cfg);

std::string history_csv(const std::vector<LossReport>& history);
std::string matrix_csv(const SynergyMatrix& matrix);

}  // namespace visor::synergy
