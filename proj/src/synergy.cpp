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

#include "visor/synergy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "visor/error.hpp"

namespace visor::synergy {

// ---------------------------------------------------------------------------
// TaskHead

TaskHead::TaskHead(int input_dim, int hidden, int output_dim, Rng& rng) {
  if (hidden > 0) {
    first_ = nn::Affine::init(input_dim, hidden, rng);
    second_ = nn::Affine::init(hidden, output_dim, rng);
  } else {
    first_ = nn::Affine::init(input_dim, output_dim, rng);
  }
}

TaskHead TaskHead::zeros(int input_dim, int hidden, int output_dim) {
  TaskHead head;
  if (hidden > 0) {
    head.first_ = nn::Affine(input_dim, hidden);
    head.second_ = nn::Affine(hidden, output_dim);
  } else {
    head.first_ = nn::Affine(input_dim, output_dim);
  }
  return head;
}

int TaskHead::output_dim() const {
  return static_cast<int>(second_ ? second_->out() : first_.out());
}

Matrix TaskHead::forward(const Matrix& v) const {
  if (v.cols() != first_.in()) {
    fail(ErrorCode::ShapeMismatch, "task head expects input of size " +
                                       std::to_string(first_.in()) + ", got " +
                                       std::to_string(v.cols()));
  }
  if (!second_) return first_.forward(v);
  return second_->forward(nn::tanh_forward(first_.forward(v)));
}

Matrix TaskHead::backward(const Matrix& v, const Matrix& grad_out) {
  if (!second_) return first_.backward(v, grad_out);
  const Matrix hidden = nn::tanh_forward(first_.forward(v));
  const Matrix grad_hidden = second_->backward(hidden, grad_out);
  return first_.backward(v, nn::tanh_backward(hidden, grad_hidden));
}

Vector TaskHead::forward_one(const Vector& v) const { return forward(v.transpose()).transpose(); }

void TaskHead::append_params(nn::ParamList& params, const std::string& prefix) {
  first_.append_params(params, prefix + ".0");
  if (second_) second_->append_params(params, prefix + ".1");
}

// ---------------------------------------------------------------------------
// LayerNorm

namespace {
constexpr double kLayerNormEps = 1e-5;
}

LayerNorm::LayerNorm(Eigen::Index dim)
    : gain(Vector::Ones(dim)),
      bias(Vector::Zero(dim)),
      grad_gain(Vector::Zero(dim)),
      grad_bias(Vector::Zero(dim)) {}

Matrix LayerNorm::forward(const Matrix& x) const {
  Matrix y(x.rows(), x.cols());
  const double n = static_cast<double>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().sum() / n;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    y.row(r) = ((x.row(r).array() - mean) * inv * gain.transpose().array() +
                bias.transpose().array())
                   .matrix();
  }
  return y;
}

Matrix LayerNorm::backward(const Matrix& x, const Matrix& grad_out) {
  Matrix dx(x.rows(), x.cols());
  const double n = static_cast<double>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().sum() / n;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    const Eigen::ArrayXd xhat = (x.row(r).array().transpose() - mean) * inv;
    const Eigen::ArrayXd dy = grad_out.row(r).array().transpose();
    grad_gain.array() += dy * xhat;
    grad_bias.array() += dy;
    const Eigen::ArrayXd dxhat = dy * gain.array();
    dx.row(r) = (inv * (dxhat - dxhat.mean() - xhat * (dxhat * xhat).mean())).matrix().transpose();
  }
  return dx;
}

void LayerNorm::append_params(nn::ParamList& params, const std::string& prefix) {
  params.push_back({prefix + ".gain", gain.data(), grad_gain.data(), gain.size()});
  params.push_back({prefix + ".bias", bias.data(), grad_bias.data(), bias.size()});
}

// ---------------------------------------------------------------------------
// Discriminator

struct Discriminator::LayerCache {
  Matrix input;     // H
  Matrix normed;    // LN1(H)
  Matrix q, k, v;
  std::vector<Matrix> attention;  // per sample seq x seq
  Matrix mixed;     // attention-weighted values
  Matrix residual;  // H1 = H + attn
  Matrix normed2;   // LN2(H1)
  Matrix pre_act;   // ffn_in(LN2(H1))
  Matrix act;       // gelu(pre_act)
};

Discriminator::Discriminator(int input_dim, int tasks, const DiscriminatorConfig& cfg, Rng& rng)
    : cfg_(cfg), tasks_(tasks) {
  if (input_dim < 1 || tasks < 1 || cfg.layers < 0 || cfg.width < 1 || cfg.ffn_hidden < 1 ||
      cfg.head_hidden < 1) {
    fail(ErrorCode::ConfigError, "discriminator dimensions must be positive");
  }
  input_ = nn::Affine::init(input_dim, cfg.width, rng);
  for (int l = 0; l < cfg.layers; ++l) {
    Layer layer{LayerNorm(cfg.width),
                nn::Affine::init(cfg.width, cfg.width, rng),
                nn::Affine::init(cfg.width, cfg.width, rng),
                nn::Affine::init(cfg.width, cfg.width, rng),
                nn::Affine::init(cfg.width, cfg.width, rng),
                LayerNorm(cfg.width),
                nn::Affine::init(cfg.width, cfg.ffn_hidden, rng),
                nn::Affine::init(cfg.ffn_hidden, cfg.width, rng)};
    layers_.push_back(std::move(layer));
  }
  final_norm_ = LayerNorm(cfg.width);
  head_in_ = nn::Affine::init(cfg.width, cfg.head_hidden, rng);
  head_out_ = nn::Affine::init(cfg.head_hidden, tasks, rng);
}

Matrix Discriminator::encode(const Matrix& tokens, int seq_len, std::vector<LayerCache>* caches,
                             Matrix* h0, Matrix* pre_final) const {
  if (tokens.rows() == 0 || seq_len < 1) fail(ErrorCode::EmptySequence, "no tokens to classify");
  if (tokens.rows() % seq_len != 0) {
    fail(ErrorCode::ShapeMismatch, "token count is not a multiple of the sequence length");
  }
  if (tokens.cols() != input_.in()) {
    fail(ErrorCode::ShapeMismatch, "discriminator expects tokens of size " +
                                       std::to_string(input_.in()) + ", got " +
                                       std::to_string(tokens.cols()));
  }
  const Eigen::Index batch = tokens.rows() / seq_len;
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.width));
  Matrix h = input_.forward(tokens);
  if (h0) *h0 = h;
  for (const auto& layer : layers_) {
    LayerCache cache;
    cache.input = h;
    cache.normed = layer.norm1.forward(h);
    cache.q = layer.query.forward(cache.normed);
    cache.k = layer.key.forward(cache.normed);
    cache.v = layer.value.forward(cache.normed);
    cache.mixed.resize(h.rows(), h.cols());
    for (Eigen::Index b = 0; b < batch; ++b) {
      const auto rows = Eigen::seqN(b * seq_len, seq_len);
      Matrix scores = cache.q(rows, Eigen::all) * cache.k(rows, Eigen::all).transpose() * scale;
      Matrix weights = nn::softmax_rows(scores);
      cache.mixed(rows, Eigen::all) = weights * cache.v(rows, Eigen::all);
      cache.attention.push_back(std::move(weights));
    }
    cache.residual = h + layer.output.forward(cache.mixed);
    cache.normed2 = layer.norm2.forward(cache.residual);
    cache.pre_act = layer.ffn_in.forward(cache.normed2);
    cache.act = nn::gelu_forward(cache.pre_act);
    h = cache.residual + layer.ffn_out.forward(cache.act);
    if (caches) caches->push_back(std::move(cache));
  }
  if (pre_final) *pre_final = h;
  const Matrix normed = final_norm_.forward(h);
  Matrix pooled(batch, normed.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    pooled.row(b) = normed(Eigen::seqN(b * seq_len, seq_len), Eigen::all).colwise().mean();
  }
  return pooled;
}

Matrix Discriminator::forward(const Matrix& tokens, int seq_len) const {
  const Matrix pooled = encode(tokens, seq_len, nullptr, nullptr, nullptr);
  return nn::softmax_rows(head_out_.forward(nn::gelu_forward(head_in_.forward(pooled))));
}

Vector Discriminator::predict(const Matrix& sequence) const {
  return forward(sequence, static_cast<int>(sequence.rows())).row(0).transpose();
}

double Discriminator::loss(const Matrix& tokens, int seq_len, const std::vector<int>& task_ids,
                           bool backward, Matrix* grad_tokens, Matrix* probabilities) {
  std::vector<LayerCache> caches;
  Matrix h0;
  Matrix pre_final;
  const Matrix pooled = encode(tokens, seq_len, backward ? &caches : nullptr, nullptr,
                               backward ? &pre_final : nullptr);
  const Eigen::Index batch = pooled.rows();
  if (static_cast<Eigen::Index>(task_ids.size()) != batch) {
    fail(ErrorCode::ShapeMismatch, "one task id per sequence required");
  }
  const Matrix head_pre = head_in_.forward(pooled);
  const Matrix head_act = nn::gelu_forward(head_pre);
  const Matrix probs = nn::softmax_rows(head_out_.forward(head_act));
  if (probabilities) *probabilities = probs;

  double total = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int k = task_ids[static_cast<std::size_t>(b)];
    if (k < 0 || k >= tasks_) fail(ErrorCode::InvalidArgument, "task id outside [0, K)");
    total += adversarial_loss(probs.row(b).transpose(), k);
  }
  const double mean = total / static_cast<double>(batch);
  if (!backward) return mean;

  Matrix grad_logits = probs / static_cast<double>(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    grad_logits(b, task_ids[static_cast<std::size_t>(b)]) -= 1.0 / static_cast<double>(batch);
  }
  const Matrix grad_act = head_out_.backward(head_act, grad_logits);
  const Matrix grad_pooled = head_in_.backward(pooled, nn::gelu_backward(head_pre, grad_act));

  Matrix grad_normed(tokens.rows(), pooled.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int t = 0; t < seq_len; ++t) {
      grad_normed.row(b * seq_len + t) = grad_pooled.row(b) / static_cast<double>(seq_len);
    }
  }
  Matrix grad_h = final_norm_.backward(pre_final, grad_normed);

  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.width));
  for (std::size_t l = layers_.size(); l-- > 0;) {
    auto& layer = layers_[l];
    const auto& cache = caches[l];
    // h = residual + ffn_out(gelu(ffn_in(norm2(residual))))
    Matrix grad_residual = grad_h;
    const Matrix grad_act_ffn = layer.ffn_out.backward(cache.act, grad_h);
    const Matrix grad_pre = nn::gelu_backward(cache.pre_act, grad_act_ffn);
    const Matrix grad_normed2 = layer.ffn_in.backward(cache.normed2, grad_pre);
    grad_residual += layer.norm2.backward(cache.residual, grad_normed2);

    // residual = input + output(attention(norm1(input)))
    Matrix grad_input = grad_residual;
    const Matrix grad_mixed = layer.output.backward(cache.mixed, grad_residual);
    Matrix grad_q(cache.q.rows(), cache.q.cols());
    Matrix grad_k(cache.k.rows(), cache.k.cols());
    Matrix grad_v(cache.v.rows(), cache.v.cols());
    for (Eigen::Index b = 0; b < batch; ++b) {
      const auto rows = Eigen::seqN(b * seq_len, seq_len);
      const Matrix& weights = cache.attention[static_cast<std::size_t>(b)];
      const Matrix grad_out = grad_mixed(rows, Eigen::all);
      const Matrix grad_weights = grad_out * cache.v(rows, Eigen::all).transpose();
      grad_v(rows, Eigen::all) = weights.transpose() * grad_out;
      Matrix grad_scores = weights.cwiseProduct(
          grad_weights - (grad_weights.cwiseProduct(weights)).rowwise().sum().replicate(1, seq_len));
      grad_scores *= scale;
      grad_q(rows, Eigen::all) = grad_scores * cache.k(rows, Eigen::all);
      grad_k(rows, Eigen::all) = grad_scores.transpose() * cache.q(rows, Eigen::all);
    }
    Matrix grad_normed1 = layer.query.backward(cache.normed, grad_q);
    grad_normed1 += layer.key.backward(cache.normed, grad_k);
    grad_normed1 += layer.value.backward(cache.normed, grad_v);
    grad_input += layer.norm1.backward(cache.input, grad_normed1);
    grad_h = std::move(grad_input);
  }
  const Matrix grad_in = input_.backward(tokens, grad_h);
  if (grad_tokens) *grad_tokens = grad_in;
  return mean;
}

void Discriminator::append_params(nn::ParamList& params, const std::string& prefix) {
  input_.append_params(params, prefix + ".input");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l);
    auto& layer = layers_[l];
    layer.norm1.append_params(params, p + ".norm1");
    layer.query.append_params(params, p + ".query");
    layer.key.append_params(params, p + ".key");
    layer.value.append_params(params, p + ".value");
    layer.output.append_params(params, p + ".output");
    layer.norm2.append_params(params, p + ".norm2");
    layer.ffn_in.append_params(params, p + ".ffn_in");
    layer.ffn_out.append_params(params, p + ".ffn_out");
  }
  final_norm_.append_params(params, prefix + ".final_norm");
  head_in_.append_params(params, prefix + ".head_in");
  head_out_.append_params(params, prefix + ".head_out");
}

double adversarial_loss(const Vector& prediction, int true_task) {
  if (true_task < 0 || true_task >= prediction.size()) {
    fail(ErrorCode::InvalidArgument, "true task outside the prediction vector");
  }
  return -std::log(std::max(prediction[true_task], 1e-12));
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.normal() * scale;
  }
  return m;
}

struct Generators {
  Matrix rotation;                    // shared_input x shared_input orthogonal
  std::vector<Matrix> token_mixing;   // per token: content x shared_latent
  Matrix private_mixing;              // private_input x private_latent
  int content_dim = 0;
};

Generators make_generators(const SynergyConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "synergy-generators"));
  Generators g;
  const int signature_dim = std::max(1, cfg.shared_input / 4);
  g.content_dim = cfg.shared_input - signature_dim;
  if (g.content_dim < 1) fail(ErrorCode::ConfigError, "shared_input too small");
  const Matrix raw = gaussian(cfg.shared_input, cfg.shared_input, rng);
  g.rotation = Eigen::HouseholderQR<Matrix>(raw).householderQ();
  for (int t = 0; t < cfg.seq_len; ++t) {
    g.token_mixing.push_back(
        gaussian(g.content_dim, cfg.shared_latent, rng, 1.0 / std::sqrt(cfg.shared_latent)));
  }
  g.private_mixing =
      gaussian(cfg.private_input, cfg.private_latent, rng, 1.0 / std::sqrt(cfg.private_latent));
  return g;
}

Vector label_weights(const SynergyConfig& cfg, const TaskDefinition& def) {
  const int dim = def.source == LabelSource::Shared ? cfg.shared_latent : cfg.private_latent;
  Rng rng(derive_seed(cfg.seed, "label-" + std::to_string(static_cast<int>(def.source)) + "-" +
                                    std::to_string(def.label_function)));
  Vector w(dim);
  for (auto& x : w) x = rng.normal();
  return w * (1.5 / w.norm());
}

// Tasks sit on the vertices of a randomly rotated regular simplex when they
// fit, so every pair of tasks is equally far apart.
Vector task_signature(const SynergyConfig& cfg, int task, int signature_dim) {
  const int k = static_cast<int>(cfg.tasks.size());
  if (k >= 2 && k <= signature_dim) {
    Rng rng(derive_seed(cfg.seed, "signature-basis"));
    const Matrix basis = Eigen::HouseholderQR<Matrix>(gaussian(signature_dim, signature_dim, rng)).householderQ();
    Vector vertex = Vector::Constant(signature_dim, 0.0);
    vertex.head(k).setConstant(-1.0 / k);
    vertex[task] += 1.0;
    return basis * vertex * (cfg.signature_scale / vertex.norm());
  }
  Rng rng(derive_seed(cfg.seed, "signature-" + std::to_string(task)));
  Vector s(signature_dim);
  for (auto& x : s) x = rng.normal();
  return s * (cfg.signature_scale / s.norm());
}

TaskSplit make_split(const SynergyConfig& cfg, const Generators& g, int task, int count,
                     std::uint64_t seed) {
  const auto& def = cfg.tasks[static_cast<std::size_t>(task)];
  const Vector w = label_weights(cfg, def);
  const int signature_dim = cfg.shared_input - g.content_dim;
  const Vector signature = task_signature(cfg, task, signature_dim);
  Rng rng(seed);
  TaskSplit split;
  split.shared_tokens.resize(static_cast<Eigen::Index>(count) * cfg.seq_len, cfg.shared_input);
  split.private_input.resize(count, cfg.private_input);
  split.labels.resize(count, 1);
  for (int i = 0; i < count; ++i) {
    Vector z_shared(cfg.shared_latent);
    for (auto& x : z_shared) x = rng.normal();
    Vector z_private(cfg.private_latent);
    for (auto& x : z_private) x = rng.normal();
    for (int t = 0; t < cfg.seq_len; ++t) {
      Vector hidden(cfg.shared_input);
      hidden << g.token_mixing[static_cast<std::size_t>(t)] * z_shared, signature;
      Vector token = g.rotation * hidden;
      for (auto& x : token) x += cfg.input_noise * rng.normal();
      split.shared_tokens.row(static_cast<Eigen::Index>(i) * cfg.seq_len + t) = token.transpose();
    }
    Vector priv = g.private_mixing * z_private;
    for (auto& x : priv) x += cfg.input_noise * rng.normal();
    split.private_input.row(i) = priv.transpose();
    const Vector& z = def.source == LabelSource::Shared ? z_shared : z_private;
    split.labels(i, 0) = std::tanh(w.dot(z));
  }
  return split;
}

}  // namespace

SyntheticTaskSet SyntheticTaskSet::generate(const SynergyConfig& cfg) {
  if (cfg.tasks.empty()) fail(ErrorCode::ConfigError, "synthetic benchmark needs tasks");
  if (cfg.seq_len < 1 || cfg.shared_latent < 1 || cfg.private_latent < 1 ||
      cfg.private_input < 1 || cfg.train_per_task < 1 || cfg.heldout_per_task < 1) {
    fail(ErrorCode::ConfigError, "synthetic benchmark dimensions must be positive");
  }
  const auto g = make_generators(cfg);
  SyntheticTaskSet set;
  set.seq_len_ = cfg.seq_len;
  set.defs_ = cfg.tasks;
  for (int k = 0; k < static_cast<int>(cfg.tasks.size()); ++k) {
    const std::string tag = std::to_string(k);
    set.train_.push_back(
        make_split(cfg, g, k, cfg.train_per_task, derive_seed(cfg.seed, "train-" + tag)));
    set.heldout_.push_back(
        make_split(cfg, g, k, cfg.heldout_per_task, derive_seed(cfg.seed, "heldout-" + tag)));
    set.origins_.push_back(k);
  }
  return set;
}

SyntheticTaskSet SyntheticTaskSet::subset(const std::vector<int>& task_indices) const {
  SyntheticTaskSet out;
  out.seq_len_ = seq_len_;
  for (int k : task_indices) {
    if (k < 0 || k >= tasks()) fail(ErrorCode::InvalidArgument, "task index out of range");
    out.defs_.push_back(defs_[static_cast<std::size_t>(k)]);
    out.train_.push_back(train_[static_cast<std::size_t>(k)]);
    out.heldout_.push_back(heldout_[static_cast<std::size_t>(k)]);
    out.origins_.push_back(origins_[static_cast<std::size_t>(k)]);
  }
  return out;
}

Batch make_batch(const SyntheticTaskSet& data,
                 const std::vector<std::pair<int, Eigen::Index>>& picks, bool heldout) {
  const int seq = data.seq_len();
  const auto& first = heldout ? data.heldout(0) : data.train(0);
  Batch batch;
  const auto n = static_cast<Eigen::Index>(picks.size());
  batch.shared_tokens.resize(n * seq, first.shared_tokens.cols());
  batch.private_input.resize(n, first.private_input.cols());
  batch.labels.resize(n, first.labels.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [task, row] = picks[static_cast<std::size_t>(i)];
    const auto& split = heldout ? data.heldout(task) : data.train(task);
    batch.shared_tokens.middleRows(i * seq, seq) = split.shared_tokens.middleRows(row * seq, seq);
    batch.private_input.row(i) = split.private_input.row(row);
    batch.labels.row(i) = split.labels.row(row);
    batch.task_ids.push_back(task);
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Model

SynergyModel::SynergyModel(const SynergyConfig& cfg, const std::vector<int>& task_origins)
    : cfg_(cfg),
      disc_([&] {
        Rng rng(derive_seed(cfg.seed, "disc-init"));
        return Discriminator(cfg.shared_dim, static_cast<int>(task_origins.size()), cfg.disc, rng);
      }()) {
  if (cfg.shared_dim < 1 || cfg.private_dim < 1) {
    fail(ErrorCode::ConfigError, "feature dimensions must be positive");
  }
  Rng shared_rng(derive_seed(cfg.seed, "shared-encoder-init"));
  shared_encoder_ = nn::Affine::init(cfg.shared_input, cfg.shared_dim, shared_rng);
  for (int origin : task_origins) {
    Rng rng(derive_seed(cfg.seed, "task-init-" + std::to_string(origin)));
    private_encoders_.push_back(nn::Affine::init(cfg.private_input, cfg.private_dim, rng));
    heads_.emplace_back(cfg.private_dim + cfg.shared_dim, cfg.head_hidden, 1, rng);
  }
}

Matrix SynergyModel::shared_features(const Matrix& shared_tokens) const {
  return nn::tanh_forward(shared_encoder_.forward(shared_tokens));
}

Matrix SynergyModel::private_features(int k, const Matrix& input) const {
  return nn::tanh_forward(private_encoders_[static_cast<std::size_t>(k)].forward(input));
}

ObjectiveTerms SynergyModel::objective(const Batch& batch, double lambda, bool backward) {
  const int seq = cfg_.seq_len;
  const Eigen::Index n = batch.labels.rows();
  if (n == 0) fail(ErrorCode::EmptySequence, "empty batch");
  const Matrix shared = shared_features(batch.shared_tokens);
  Matrix pooled(n, shared.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    pooled.row(i) = shared.middleRows(i * seq, seq).colwise().mean();
  }

  ObjectiveTerms terms;
  terms.task_losses.assign(static_cast<std::size_t>(tasks()), 0.0);
  Matrix grad_pooled = Matrix::Zero(n, shared.cols());

  std::map<int, std::vector<Eigen::Index>> rows_by_task;
  for (Eigen::Index i = 0; i < n; ++i) rows_by_task[batch.task_ids[static_cast<std::size_t>(i)]].push_back(i);
  for (const auto& [k, rows] : rows_by_task) {
    const auto count = static_cast<Eigen::Index>(rows.size());
    Matrix priv_in(count, batch.private_input.cols());
    Matrix task_pooled(count, pooled.cols());
    Matrix labels(count, batch.labels.cols());
    for (Eigen::Index r = 0; r < count; ++r) {
      priv_in.row(r) = batch.private_input.row(rows[static_cast<std::size_t>(r)]);
      task_pooled.row(r) = pooled.row(rows[static_cast<std::size_t>(r)]);
      labels.row(r) = batch.labels.row(rows[static_cast<std::size_t>(r)]);
    }
    const Matrix priv = private_features(k, priv_in);
    Matrix features(count, priv.cols() + task_pooled.cols());
    features << priv, task_pooled;
    auto& head = heads_[static_cast<std::size_t>(k)];
    const Matrix residual = head.forward(features) - labels;
    const double loss = residual.squaredNorm() / static_cast<double>(count);
    terms.task_losses[static_cast<std::size_t>(k)] = loss;
    terms.task_total += loss;
    if (!backward) continue;
    const Matrix grad_features = head.backward(features, 2.0 * residual / static_cast<double>(count));
    const Matrix grad_priv = nn::tanh_backward(priv, grad_features.leftCols(priv.cols()));
    private_encoders_[static_cast<std::size_t>(k)].backward(priv_in, grad_priv);
    for (Eigen::Index r = 0; r < count; ++r) {
      grad_pooled.row(rows[static_cast<std::size_t>(r)]) +=
          grad_features.row(r).tail(task_pooled.cols());
    }
  }

  Matrix probs;
  Matrix grad_shared_disc;
  terms.adversarial = disc_.loss(grl_forward(shared), seq, batch.task_ids, backward,
                                 backward ? &grad_shared_disc : nullptr, &probs);
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    probs.row(i).maxCoeff(&best);
    if (best == batch.task_ids[static_cast<std::size_t>(i)]) ++correct;
  }
  terms.disc_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  if (!backward) return terms;

  Matrix grad_shared = grl_backward(grad_shared_disc, lambda);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int t = 0; t < seq; ++t) {
      grad_shared.row(i * seq + t) += grad_pooled.row(i) / static_cast<double>(seq);
    }
  }
  shared_encoder_.backward(batch.shared_tokens, nn::tanh_backward(shared, grad_shared));
  return terms;
}

std::vector<double> SynergyModel::heldout_losses(const SyntheticTaskSet& data) const {
  std::vector<double> losses;
  const int seq = cfg_.seq_len;
  for (int k = 0; k < data.tasks(); ++k) {
    const auto& split = data.heldout(k);
    const Matrix shared = shared_features(split.shared_tokens);
    Matrix pooled(split.size(), shared.cols());
    for (Eigen::Index i = 0; i < split.size(); ++i) {
      pooled.row(i) = shared.middleRows(i * seq, seq).colwise().mean();
    }
    const Matrix priv = private_features(k, split.private_input);
    Matrix features(split.size(), priv.cols() + pooled.cols());
    features << priv, pooled;
    const Matrix residual = heads_[static_cast<std::size_t>(k)].forward(features) - split.labels;
    losses.push_back(residual.squaredNorm() / static_cast<double>(split.size()));
  }
  return losses;
}

nn::ParamList SynergyModel::producer_params() {
  nn::ParamList params;
  shared_encoder_.append_params(params, "shared_encoder");
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    private_encoders_[k].append_params(params, "private_encoder." + std::to_string(k));
    heads_[k].append_params(params, "head." + std::to_string(k));
  }
  return params;
}

nn::ParamList SynergyModel::discriminator_params() {
  nn::ParamList params;
  disc_.append_params(params);
  return params;
}

// ---------------------------------------------------------------------------
// Training

namespace {

std::vector<std::pair<int, Eigen::Index>> all_picks(const SyntheticTaskSet& data, bool heldout) {
  std::vector<std::pair<int, Eigen::Index>> picks;
  for (int k = 0; k < data.tasks(); ++k) {
    const auto n = heldout ? data.heldout(k).size() : data.train(k).size();
    for (Eigen::Index i = 0; i < n; ++i) picks.emplace_back(k, i);
  }
  return picks;
}

void check_finite(const ObjectiveTerms& terms, int epoch) {
  bool ok = std::isfinite(terms.adversarial);
  for (double l : terms.task_losses) ok = ok && std::isfinite(l);
  if (!ok) {
    fail(ErrorCode::DivergenceDetected,
         "synergy training produced a non-finite loss at epoch " + std::to_string(epoch));
  }
}

LossReport evaluate(SynergyModel& model, const Batch& full, int epoch) {
  const auto terms = model.objective(full, 0.0, false);
  check_finite(terms, epoch);
  return LossReport{epoch, terms.task_losses, terms.adversarial, terms.disc_accuracy};
}

Matrix frozen_features(SynergyModel& model, const Batch& batch) {
  return model.shared_features(batch.shared_tokens);
}

}  // namespace

SynergyResult train_synergy(const SyntheticTaskSet& data, const SynergyConfig& cfg) {
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.probe_batch_size < 1) {
    fail(ErrorCode::ConfigError, "epochs/batch out of range");
  }
  if (cfg.lambda < 0.0) fail(ErrorCode::ConfigError, "lambda must be >= 0");
  SynergyModel model(cfg, data.origins());
  auto producer = model.producer_params();
  auto disc = model.discriminator_params();

  const auto picks = all_picks(data, false);
  const Batch full = make_batch(data, picks, false);
  Rng order_rng(derive_seed(cfg.seed, "synergy-order"));
  std::vector<std::size_t> order(picks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  SynergyResult result;
  result.history.push_back(evaluate(model, full, 0));
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lambda =
        cfg.warmup_epochs > 0
            ? cfg.lambda * std::min(1.0, static_cast<double>(epoch) / cfg.warmup_epochs)
            : cfg.lambda;
    order_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<std::pair<int, Eigen::Index>> chosen;
      for (std::size_t i = start; i < end; ++i) chosen.push_back(picks[order[i]]);
      const Batch batch = make_batch(data, chosen, false);
      if (cfg.alternating) {
        for (int s = 0; s < cfg.inner_steps; ++s) {
          nn::zero_grads(disc);
          model.discriminator().loss(frozen_features(model, batch), cfg.seq_len, batch.task_ids,
                                     true);
          nn::sgd_step(disc, cfg.disc_learning_rate);
        }
        nn::zero_grads(producer);
        nn::zero_grads(disc);
        check_finite(model.objective(batch, lambda, true), epoch);
        nn::sgd_step(producer, cfg.learning_rate, cfg.weight_decay);
      } else {
        nn::zero_grads(producer);
        nn::zero_grads(disc);
        check_finite(model.objective(batch, lambda, true), epoch);
        nn::sgd_step(producer, cfg.learning_rate, cfg.weight_decay);
        nn::sgd_step(disc, cfg.disc_learning_rate);
      }
    }
    result.history.push_back(evaluate(model, full, epoch));
  }
  result.heldout_task_losses = model.heldout_losses(data);
  result.probe = probe_shared_features(model, data, cfg);
  result.producer_parameters = nn::flatten_values(producer);
  result.discriminator_parameters = nn::flatten_values(disc);
  return result;
}

ProbeResult probe_shared_features(SynergyModel& model, const SyntheticTaskSet& data,
                                  const SynergyConfig& cfg) {
  const int seq = cfg.seq_len;
  const auto train_picks = all_picks(data, false);
  const auto heldout_picks = all_picks(data, true);
  const Batch train = make_batch(data, train_picks, false);
  const Batch heldout = make_batch(data, heldout_picks, true);
  const Matrix train_features = frozen_features(model, train);
  const Matrix heldout_features = frozen_features(model, heldout);

  Rng rng(derive_seed(cfg.seed, "probe-init"));
  Discriminator probe(cfg.shared_dim, data.tasks(), cfg.disc, rng);
  nn::ParamList params;
  probe.append_params(params, "probe");
  Rng order_rng(derive_seed(cfg.seed, "probe-order"));
  std::vector<Eigen::Index> order(train_picks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);

  for (int epoch = 0; epoch < cfg.probe_epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.probe_batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.probe_batch_size));
      const auto n = static_cast<Eigen::Index>(end - start);
      Matrix tokens(n * seq, train_features.cols());
      std::vector<int> ids;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto src = order[start + static_cast<std::size_t>(i)];
        tokens.middleRows(i * seq, seq) = train_features.middleRows(src * seq, seq);
        ids.push_back(train.task_ids[static_cast<std::size_t>(src)]);
      }
      nn::zero_grads(params);
      probe.loss(tokens, seq, ids, true);
      nn::sgd_step(params, cfg.probe_learning_rate);
    }
  }

  auto accuracy = [&](const Matrix& features, const std::vector<int>& ids) {
    const Matrix probs = probe.forward(features, seq);
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      Eigen::Index best = 0;
      probs.row(i).maxCoeff(&best);
      if (best == ids[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(probs.rows());
  };
  return ProbeResult{accuracy(train_features, train.task_ids),
                     accuracy(heldout_features, heldout.task_ids)};
}

SynergyMatrix pairwise_synergy(const SyntheticTaskSet& data,
                               const std::vector<std::pair<int, int>>& pairs,
                               const SynergyConfig& cfg) {
  const int k = data.tasks();
  SynergyMatrix matrix;
  matrix.improvement.assign(static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(k), 0.0));
  matrix.solo_losses.assign(static_cast<std::size_t>(k), 0.0);
  SynergyConfig run_cfg = cfg;
  run_cfg.probe_epochs = 0;

  std::vector<bool> solved(static_cast<std::size_t>(k), false);
  auto solo = [&](int task) {
    if (!solved[static_cast<std::size_t>(task)]) {
      matrix.solo_losses[static_cast<std::size_t>(task)] =
          train_synergy(data.subset({task}), run_cfg).heldout_task_losses[0];
      solved[static_cast<std::size_t>(task)] = true;
    }
    return matrix.solo_losses[static_cast<std::size_t>(task)];
  };
  for (const auto& [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= k || j >= k) fail(ErrorCode::InvalidArgument, "pair index out of range");
    if (i == j) continue;
    const auto co = train_synergy(data.subset({i, j}), run_cfg).heldout_task_losses;
    matrix.improvement[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = solo(i) - co[0];
    matrix.improvement[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = solo(j) - co[1];
  }
  return matrix;
}

std::string history_csv(const std::vector<LossReport>& history) {
  std::ostringstream out;
  out.precision(10);
  out << "epoch";
  const std::size_t k = history.empty() ? 0 : history.front().task_losses.size();
  for (std::size_t t = 0; t < k; ++t) out << ",task" << t << "_loss";
  out << ",adversarial_loss,disc_accuracy\n";
  for (const auto& row : history) {
    out << row.epoch;
    for (double l : row.task_losses) out << ',' << l;
    out << ',' << row.adversarial << ',' << row.disc_accuracy << '\n';
  }
  return out.str();
}

std::string matrix_csv(const SynergyMatrix& matrix) {
  std::ostringstream out;
  out.precision(10);
  const std::size_t k = matrix.improvement.size();
  out << "task";
  for (std::size_t j = 0; j < k; ++j) out << ",with_task" << j;
  out << ",solo_loss\n";
  for (std::size_t i = 0; i < k; ++i) {
    out << "task" << i;
    for (std::size_t j = 0; j < k; ++j) out << ',' << matrix.improvement[i][j];
    out << ',' << matrix.solo_losses[i] << '\n';
  }
  return out.str();
}

}  // namespace visor::synergy
