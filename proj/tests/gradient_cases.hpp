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

// One finite-difference check per trainable loss, at a seeded random point.
// Each returns the largest relative error over all checked coordinates.

#include <string>
#include <vector>

#include "oracles.hpp"
#include "visor/protocol.hpp"
#include "visor/signal_bus.hpp"
#include "visor/synergy.hpp"

namespace gradcase {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline VectorXd normal_vector(visor::Rng& rng, Eigen::Index n, double scale = 1.0) {
  VectorXd v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

inline MatrixXd normal_matrix(visor::Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

inline visor::AlignConfig small_align_config() {
  visor::AlignConfig cfg;
  cfg.task_specific_dim = 3;
  cfg.task_invariant_dim = 3;
  cfg.caption_dim = 4;
  cfg.condition_dim = 5;
  cfg.signal_tokens = 2;
  cfg.filler_tokens = 2;
  return cfg;
}

// l2 alignment: the analytic alignment part of the gradient is the
// difference between the model at weight 1 and the same model at weight 0.
inline double alignment(std::uint64_t seed) {
  visor::Rng rng(seed);
  auto cfg_on = small_align_config();
  auto cfg_off = cfg_on;
  cfg_off.alignment_weight = 0.0;
  visor::Rng init_a(seed + 1000);
  visor::Rng init_b(seed + 1000);
  visor::AlignmentModel on(cfg_on, init_a);
  visor::AlignmentModel off(cfg_off, init_b);
  const VectorXd caption = normal_vector(rng, cfg_on.caption_dim);
  const VectorXd target = normal_vector(rng, cfg_on.condition_dim);
  const auto module = visor::kAllModules[rng.index(6)];
  auto pa = on.params();
  auto pb = off.params();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (Eigen::Index k = 0; k < pa[i].size; ++k) {
      pa[i].value[k] += 0.3 * rng.normal();
      pb[i].value[k] = pa[i].value[k];
    }
  }
  oracle::zero(pa);
  oracle::zero(pb);
  on.loss(caption, module, target, true);
  off.loss(caption, module, target, true);
  const VectorXd analytic = oracle::analytic_param_gradient(pa) - oracle::analytic_param_gradient(pb);
  const VectorXd numeric = oracle::numeric_param_gradient(
      pa, [&] { return on.loss(caption, module, target, false).alignment; });

  // The bare loss with respect to its input.
  const VectorXd projected = normal_vector(rng, 6);
  const VectorXd goal = normal_vector(rng, 6);
  VectorXd g;
  visor::alignment_loss(projected, goal, &g);
  const VectorXd ng = oracle::numeric_gradient(
      [&](const VectorXd& p) { return visor::alignment_loss(p, goal); }, projected);
  return std::max(oracle::compare(analytic, numeric).max_rel_error, oracle::compare(g, ng).max_rel_error);
}

inline double token_nll(std::uint64_t seed) {
  visor::Rng rng(seed);
  auto cfg = small_align_config();
  cfg.alignment_weight = 0.0;
  visor::Rng init(seed + 2000);
  visor::AlignmentModel model(cfg, init);
  const VectorXd caption = normal_vector(rng, cfg.caption_dim);
  const VectorXd target = normal_vector(rng, cfg.condition_dim);
  const auto module = visor::kAllModules[rng.index(6)];
  auto params = model.params();
  for (const auto& p : params) {
    for (Eigen::Index k = 0; k < p.size; ++k) p.value[k] += 0.3 * rng.normal();
  }
  oracle::zero(params);
  model.loss(caption, module, target, true);
  const VectorXd analytic = oracle::analytic_param_gradient(params);
  const VectorXd numeric =
      oracle::numeric_param_gradient(params, [&] { return model.loss(caption, module, target, false).nll; });

  // The bare loss with respect to its logits.
  const int positions = 3;
  const int vocab = 7;
  MatrixXd logits = normal_matrix(rng, positions, vocab, 2.0);
  std::vector<int> ids;
  for (int t = 0; t < positions; ++t) ids.push_back(static_cast<int>(rng.index(vocab)));
  MatrixXd g;
  visor::signal_token_nll(logits, ids, &g);
  const VectorXd flat = Eigen::Map<const VectorXd>(logits.data(), logits.size());
  const VectorXd ng = oracle::numeric_gradient(
      [&](const VectorXd& x) {
        const MatrixXd l = Eigen::Map<const MatrixXd>(x.data(), positions, vocab);
        return visor::signal_token_nll(l, ids);
      },
      flat);
  const VectorXd ag = Eigen::Map<const VectorXd>(g.data(), g.size());
  return std::max(oracle::compare(analytic, numeric).max_rel_error, oracle::compare(ag, ng).max_rel_error);
}

// Linear functional sum(head(V) .* R) of the head output.
inline double task_head(std::uint64_t seed) {
  visor::Rng rng(seed);
  const int in = 5;
  const int hidden = seed % 4 == 0 ? 0 : 4;
  const int out = 2;
  visor::synergy::TaskHead head(in, hidden, out, rng);
  const MatrixXd v = normal_matrix(rng, 3, in);
  const MatrixXd r = normal_matrix(rng, 3, out);
  visor::nn::ParamList params;
  head.append_params(params, "head");
  for (const auto& p : params) {
    for (Eigen::Index k = 0; k < p.size; ++k) p.value[k] += 0.3 * rng.normal();
  }
  oracle::zero(params);
  const MatrixXd gv = head.backward(v, r);
  const VectorXd analytic = oracle::analytic_param_gradient(params);
  auto value = [&](const MatrixXd& x) { return (head.forward(x).array() * r.array()).sum(); };
  const VectorXd numeric = oracle::numeric_param_gradient(params, [&] { return value(v); });
  const VectorXd flat = Eigen::Map<const VectorXd>(v.data(), v.size());
  const VectorXd ng = oracle::numeric_gradient(
      [&](const VectorXd& x) { return value(Eigen::Map<const MatrixXd>(x.data(), v.rows(), v.cols())); }, flat);
  const VectorXd ag = Eigen::Map<const VectorXd>(gv.data(), gv.size());
  return std::max(oracle::compare(analytic, numeric).max_rel_error, oracle::compare(ag, ng).max_rel_error);
}

inline visor::synergy::DiscriminatorConfig small_disc() {
  visor::synergy::DiscriminatorConfig d;
  d.layers = 2;
  d.width = 6;
  d.ffn_hidden = 8;
  d.head_hidden = 5;
  return d;
}

inline double discriminator(std::uint64_t seed) {
  visor::Rng rng(seed);
  const int input = 4;
  const int tasks = 3;
  const int seq = 3;
  const int batch = 3;
  visor::synergy::Discriminator disc(input, tasks, small_disc(), rng);
  const MatrixXd tokens = normal_matrix(rng, batch * seq, input);
  std::vector<int> ids;
  for (int b = 0; b < batch; ++b) ids.push_back(static_cast<int>(rng.index(tasks)));
  visor::nn::ParamList params;
  disc.append_params(params);
  for (const auto& p : params) {
    for (Eigen::Index k = 0; k < p.size; ++k) p.value[k] += 0.2 * rng.normal();
  }
  oracle::zero(params);
  MatrixXd gt;
  disc.loss(tokens, seq, ids, true, &gt);
  const VectorXd analytic = oracle::analytic_param_gradient(params);
  const VectorXd numeric = oracle::numeric_param_gradient(params, [&] { return disc.loss(tokens, seq, ids, false); });
  const VectorXd flat = Eigen::Map<const VectorXd>(tokens.data(), tokens.size());
  const VectorXd ng = oracle::numeric_gradient(
      [&](const VectorXd& x) {
        return disc.loss(Eigen::Map<const MatrixXd>(x.data(), tokens.rows(), tokens.cols()), seq, ids, false);
      },
      flat);
  const VectorXd ag = Eigen::Map<const VectorXd>(gt.data(), gt.size());
  return std::max(oracle::compare(analytic, numeric).max_rel_error, oracle::compare(ag, ng).max_rel_error);
}

inline visor::synergy::SynergyConfig small_synergy(std::uint64_t seed) {
  visor::synergy::SynergyConfig cfg;
  cfg.shared_latent = 2;
  cfg.private_latent = 2;
  cfg.shared_input = 4;
  cfg.private_input = 3;
  cfg.shared_dim = 3;
  cfg.private_dim = 2;
  cfg.seq_len = 2;
  cfg.head_hidden = 3;
  cfg.train_per_task = 4;
  cfg.heldout_per_task = 2;
  cfg.disc = small_disc();
  cfg.seed = seed;
  return cfg;
}

// Producer gradients must equal d(sum L_k)/dtheta - lambda dL^syn/dtheta and
// discriminator gradients dL^syn/dD.
inline double composed(std::uint64_t seed) {
  visor::Rng rng(seed);
  auto cfg = small_synergy(seed);
  const double lambda = 0.25 + 1.5 * rng.uniform();
  const auto data = visor::synergy::SyntheticTaskSet::generate(cfg);
  visor::synergy::SynergyModel model(cfg, data.origins());
  std::vector<std::pair<int, Eigen::Index>> picks;
  for (int k = 0; k < data.tasks(); ++k) {
    picks.emplace_back(k, 0);
    picks.emplace_back(k, 1);
  }
  const auto batch = visor::synergy::make_batch(data, picks);
  auto producer = model.producer_params();
  auto disc = model.discriminator_params();
  for (const auto& list : {producer, disc}) {
    for (const auto& p : list) {
      for (Eigen::Index k = 0; k < p.size; ++k) p.value[k] += 0.2 * rng.normal();
    }
  }
  oracle::zero(producer);
  oracle::zero(disc);
  model.objective(batch, lambda, true);
  const VectorXd ap = oracle::analytic_param_gradient(producer);
  const VectorXd ad = oracle::analytic_param_gradient(disc);
  const VectorXd np = oracle::numeric_param_gradient(producer, [&] {
    const auto t = model.objective(batch, lambda, false);
    return t.task_total - lambda * t.adversarial;
  });
  const VectorXd nd =
      oracle::numeric_param_gradient(disc, [&] { return model.objective(batch, lambda, false).adversarial; });
  return std::max(oracle::compare(ap, np).max_rel_error, oracle::compare(ad, nd).max_rel_error);
}

}  // namespace gradcase
