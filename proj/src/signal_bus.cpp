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

#include "visor/signal_bus.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "visor/error.hpp"

namespace visor {

Eigen::VectorXd concat(const SignalEmbedding& embedding) {
  Eigen::VectorXd v(embedding.dim());
  v << embedding.task_specific, embedding.task_invariant;
  return v;
}

SignalEmbedding split(const Eigen::VectorXd& v, Eigen::Index task_specific_dim) {
  if (task_specific_dim < 0 || task_specific_dim > v.size()) {
    fail(ErrorCode::ShapeMismatch, "split point outside the embedding");
  }
  return SignalEmbedding{v.head(task_specific_dim), v.tail(v.size() - task_specific_dim)};
}

Projection Projection::identity(Eigen::Index dim) {
  return Projection{Eigen::MatrixXd::Identity(dim, dim), Eigen::VectorXd::Zero(dim)};
}

Projection Projection::random(Eigen::Index in, Eigen::Index out, Rng& rng) {
  Projection p{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) p.weight(r, c) = rng.normal() * scale;
  }
  return p;
}

Eigen::VectorXd project(const Projection& projection, const Eigen::VectorXd& v) {
  if (projection.weight.cols() != v.size() || projection.bias.size() != projection.weight.rows()) {
    fail(ErrorCode::ShapeMismatch, "projection expects input of size " +
                                       std::to_string(projection.weight.cols()) + ", got " +
                                       std::to_string(v.size()));
  }
  return projection.weight * v + projection.bias;
}

double alignment_loss(const Eigen::VectorXd& projected, const Eigen::VectorXd& target,
                      Eigen::VectorXd* grad) {
  if (projected.size() != target.size()) {
    fail(ErrorCode::ShapeMismatch, "alignment_loss operands differ in length");
  }
  const Eigen::VectorXd diff = projected - target;
  if (grad) *grad = 2.0 * diff;
  return diff.squaredNorm();
}

double signal_token_nll(const Eigen::MatrixXd& logits, std::span<const int> targets,
                        Eigen::MatrixXd* grad) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) {
    fail(ErrorCode::ShapeMismatch, "one target per logit row required");
  }
  if (targets.empty()) fail(ErrorCode::ShapeMismatch, "no token positions");
  const auto vocab = logits.cols();
  for (int t : targets) {
    if (t < 0 || t >= vocab) {
      fail(ErrorCode::IndexOutOfVocab,
           "target " + std::to_string(t) + " outside vocabulary of " + std::to_string(vocab));
    }
  }
  const double positions = static_cast<double>(targets.size());
  double total = 0.0;
  if (grad) grad->resize(logits.rows(), vocab);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    const Eigen::ArrayXd shifted = logits.row(r).array().transpose() - m;
    const double log_z = std::log(shifted.exp().sum());
    const int target = targets[static_cast<std::size_t>(r)];
    total -= shifted[target] - log_z;
    if (grad) {
      grad->row(r) = ((shifted - log_z).exp() / positions).matrix().transpose();
      (*grad)(r, target) -= 1.0 / positions;
    }
  }
  return total / positions;
}

double grad_check(const LossFunction& loss, const Eigen::VectorXd& params, double eps) {
  if (!(eps > 0.0)) fail(ErrorCode::InvalidArgument, "grad_check eps must be positive");
  Eigen::VectorXd analytic(params.size());
  const double base = loss(params, &analytic);
  if (!std::isfinite(base)) fail(ErrorCode::NonFiniteLoss, "loss is not finite at the base point");
  double worst = 0.0;
  Eigen::VectorXd probe = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    probe[i] = params[i] + eps;
    const double up = loss(probe, nullptr);
    probe[i] = params[i] - eps;
    const double down = loss(probe, nullptr);
    probe[i] = params[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      fail(ErrorCode::NonFiniteLoss, "loss is not finite near parameter " + std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

// ---------------------------------------------------------------------------

namespace {
constexpr int kModuleCount = static_cast<int>(std::size(kAllModules));
}

AlignmentModel::AlignmentModel(const AlignConfig& cfg, Rng& rng)
    : cfg_(cfg), vocab_(kModuleCount * cfg.signal_tokens + cfg.filler_tokens) {
  if (cfg.task_specific_dim < 1 || cfg.task_invariant_dim < 1 || cfg.caption_dim < 1 ||
      cfg.condition_dim < 1 || cfg.signal_tokens < 1 || cfg.filler_tokens < 0) {
    fail(ErrorCode::ConfigError, "alignment dimensions must be positive");
  }
  const int dv = embedding_dim();
  encoder_ = nn::Affine::init(cfg.caption_dim + kModuleCount, dv, rng);
  token_head_ = nn::Affine::init(dv, cfg.signal_tokens * vocab_, rng);
  for (int m = 0; m < kModuleCount; ++m) {
    projections_.push_back(nn::Affine::init(dv, cfg.condition_dim, rng));
  }
}

Eigen::VectorXd AlignmentModel::input(const Eigen::VectorXd& caption, ModuleName module) const {
  if (caption.size() != cfg_.caption_dim) fail(ErrorCode::ShapeMismatch, "caption feature size");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(cfg_.caption_dim + kModuleCount);
  x.head(cfg_.caption_dim) = caption;
  x[cfg_.caption_dim + static_cast<int>(module)] = 1.0;
  return x;
}

SignalEmbedding AlignmentModel::embed(const Eigen::VectorXd& caption, ModuleName module) const {
  const Eigen::VectorXd v = encoder_.forward(input(caption, module).transpose()).transpose();
  return split(v, cfg_.task_specific_dim);
}

Eigen::MatrixXd AlignmentModel::token_logits(const Eigen::VectorXd& v) const {
  const Eigen::VectorXd flat = token_head_.forward(v.transpose()).transpose();
  // Row t holds the logits of signal-token position t.
  return Eigen::Map<const Eigen::MatrixXd>(flat.data(), vocab_, cfg_.signal_tokens).transpose();
}

std::vector<int> AlignmentModel::signal_token_ids(ModuleName module) const {
  std::vector<int> ids;
  for (int t = 0; t < cfg_.signal_tokens; ++t) {
    ids.push_back(static_cast<int>(module) * cfg_.signal_tokens + t);
  }
  return ids;
}

Projection AlignmentModel::projection(ModuleName module) const {
  const auto& layer = projections_[static_cast<std::size_t>(module)];
  return Projection{layer.weight, layer.bias};
}

AlignmentModel::Losses AlignmentModel::loss(const Eigen::VectorXd& caption, ModuleName module,
                                            const Eigen::VectorXd& target, bool backward) {
  const Eigen::MatrixXd x = input(caption, module).transpose();
  const Eigen::MatrixXd v = encoder_.forward(x);  // 1 x dv
  const Eigen::MatrixXd flat = token_head_.forward(v);
  const Eigen::MatrixXd logits =
      Eigen::Map<const Eigen::MatrixXd>(flat.data(), vocab_, cfg_.signal_tokens).transpose();
  auto& proj = projections_[static_cast<std::size_t>(module)];
  const Eigen::MatrixXd projected = proj.forward(v);

  Losses out;
  const auto ids = signal_token_ids(module);
  Eigen::MatrixXd grad_logits;
  Eigen::VectorXd grad_projected;
  out.nll = signal_token_nll(logits, ids, backward ? &grad_logits : nullptr);
  out.alignment = alignment_loss(projected.transpose(), target, backward ? &grad_projected : nullptr);
  out.total = out.nll + cfg_.alignment_weight * out.alignment;
  if (!backward) return out;

  const Eigen::MatrixXd grad_logits_t = grad_logits.transpose();
  const Eigen::MatrixXd grad_flat =
      Eigen::Map<const Eigen::MatrixXd>(grad_logits_t.data(), 1, grad_logits_t.size());
  Eigen::MatrixXd grad_v = token_head_.backward(v, grad_flat);
  grad_v += proj.backward(v, cfg_.alignment_weight * grad_projected.transpose());
  encoder_.backward(x, grad_v);
  return out;
}

nn::ParamList AlignmentModel::params() {
  nn::ParamList list;
  encoder_.append_params(list, "encoder");
  token_head_.append_params(list, "token_head");
  for (std::size_t m = 0; m < projections_.size(); ++m) {
    projections_[m].append_params(list, "projection." + std::to_string(m));
  }
  return list;
}

namespace {

nlohmann::json tensor_json(const std::string& name, const Eigen::MatrixXd& m) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"name", name}, {"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

}  // namespace

std::string AlignmentModel::to_json() const {
  nlohmann::json params = nlohmann::json::array();
  auto add = [&](const std::string& prefix, const nn::Affine& layer) {
    params.push_back(tensor_json(prefix + ".weight", layer.weight));
    params.push_back(tensor_json(prefix + ".bias", layer.bias));
  };
  add("encoder", encoder_);
  add("token_head", token_head_);
  for (std::size_t m = 0; m < projections_.size(); ++m) {
    add("projection." + std::string(module_display_name(kAllModules[m])), projections_[m]);
  }
  nlohmann::json doc = {
      {"schema", "visor.align-checkpoint.v1"},
      {"task_specific_dim", cfg_.task_specific_dim},
      {"task_invariant_dim", cfg_.task_invariant_dim},
      {"caption_dim", cfg_.caption_dim},
      {"condition_dim", cfg_.condition_dim},
      {"signal_tokens", cfg_.signal_tokens},
      {"vocab_size", vocab_},
      {"params", std::move(params)},
  };
  return doc.dump(1);
}

Eigen::VectorXd ConditionEncoders::encode(const Eigen::VectorXd& caption,
                                          ModuleName module) const {
  return maps[static_cast<std::size_t>(module)] * caption;
}

ConditionEncoders ConditionEncoders::seeded(const AlignConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "condition-encoders"));
  ConditionEncoders enc;
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.caption_dim));
  for (int m = 0; m < kModuleCount; ++m) {
    Eigen::MatrixXd map(cfg.condition_dim, cfg.caption_dim);
    for (Eigen::Index r = 0; r < map.rows(); ++r) {
      for (Eigen::Index c = 0; c < map.cols(); ++c) map(r, c) = rng.normal() * scale;
    }
    enc.maps.push_back(std::move(map));
  }
  return enc;
}

std::vector<AlignSample> make_align_samples(const AlignConfig& cfg, const ConditionEncoders& enc,
                                            std::uint64_t seed) {
  Rng rng(seed);
  std::vector<AlignSample> samples;
  for (int m = 0; m < kModuleCount; ++m) {
    for (int i = 0; i < cfg.samples_per_module; ++i) {
      Eigen::VectorXd caption(cfg.caption_dim);
      for (auto& c : caption) c = rng.normal();
      const auto module = kAllModules[m];
      samples.push_back({caption, module, enc.encode(caption, module)});
    }
  }
  return samples;
}

namespace {

AlignEpoch evaluate(AlignmentModel& model, const std::vector<AlignSample>& samples, int epoch) {
  AlignEpoch row;
  row.epoch = epoch;
  for (const auto& s : samples) {
    const auto l = model.loss(s.caption, s.module, s.target, false);
    row.nll += l.nll;
    row.alignment += l.alignment;
  }
  row.nll /= static_cast<double>(samples.size());
  row.alignment /= static_cast<double>(samples.size());
  if (!std::isfinite(row.nll) || !std::isfinite(row.alignment)) {
    fail(ErrorCode::DivergenceDetected,
         "alignment training diverged at epoch " + std::to_string(epoch));
  }
  return row;
}

}  // namespace

AlignResult train_alignment(const AlignConfig& cfg) {
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.samples_per_module < 1) {
    fail(ErrorCode::ConfigError, "alignment epochs/batch/sample counts out of range");
  }
  Rng init_rng(derive_seed(cfg.seed, "align-init"));
  AlignmentModel model(cfg, init_rng);
  const auto encoders = ConditionEncoders::seeded(cfg);
  const auto train = make_align_samples(cfg, encoders, derive_seed(cfg.seed, "align-train"));
  const auto heldout = make_align_samples(cfg, encoders, derive_seed(cfg.seed, "align-heldout"));
  Rng order_rng(derive_seed(cfg.seed, "align-order"));

  AlignResult result;
  result.history.push_back(evaluate(model, train, 0));
  auto params = model.params();
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      nn::zero_grads(params);
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = train[order[i]];
        model.loss(s.caption, s.module, s.target, true);
      }
      nn::sgd_step(params, cfg.learning_rate / static_cast<double>(end - start));
    }
    result.history.push_back(evaluate(model, train, epoch));
  }
  result.heldout_alignment = evaluate(model, heldout, cfg.epochs).alignment;
  result.checkpoint_json = model.to_json();
  return result;
}

std::string align_history_csv(const std::vector<AlignEpoch>& history) {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,nll,alignment\n";
  for (const auto& row : history) {
    out << row.epoch << ',' << row.nll << ',' << row.alignment << '\n';
  }
  return out.str();
}

}  // namespace visor
