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

#include "visor/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include <Eigen/Core>
#include <json.hpp>

#include "visor/datagen.hpp"
#include "visor/dispatch.hpp"
#include "visor/error.hpp"
#include "visor/geometry.hpp"
#include "visor/hash.hpp"
#include "visor/region_encoder.hpp"
#include "visor/rng.hpp"
#include "visor/signal_bus.hpp"
#include "visor/synergy.hpp"

#ifndef VISOR_VERSION
#define VISOR_VERSION "0.0.0"
#endif

namespace visor {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string_view library_version() noexcept { return VISOR_VERSION; }

namespace {

std::string format_double(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 6);
  return std::string(buf, res.ptr);
}

class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path root) : root_(std::move(root)) {}

  void write(const std::string& rel, const std::string& content) {
    const fs::path path = root_ / rel;
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + path.parent_path().string() + ": " + ec.message());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
    artifacts_.push_back({rel, sha256_hex(content), content.size()});
  }

  bool exists(const std::string& rel) const { return fs::exists(root_ / rel); }

  std::string read(const std::string& rel) const {
    std::ifstream in(root_ / rel, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot read " + (root_ / rel).string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  std::vector<Artifact> take() {
    std::sort(artifacts_.begin(), artifacts_.end(),
              [](const Artifact& a, const Artifact& b) { return a.path < b.path; });
    return std::move(artifacts_);
  }

 private:
  fs::path root_;
  std::vector<Artifact> artifacts_;
};

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json box_json(const BoundingBox& b) { return json::array({b.xl, b.yt, b.xr, b.yb}); }

json region_json(const Region& r) {
  json j;
  if (const auto* box = std::get_if<BoundingBox>(&r)) {
    j["box"] = box_json(*box);
  } else {
    const auto& t = std::get<TrackedRegion>(r);
    j["box"] = box_json(t.box);
    j["span"] = json::array({t.span.fs, t.span.fe});
  }
  return j;
}

// Removes the files a previous manifest in `dir` lists, so a forced rerun
// leaves exactly the new artifact set.
void clear_previous(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  std::ifstream in(manifest, std::ios::binary);
  if (!in) return;
  json old;
  try {
    in >> old;
  } catch (const json::exception&) {
    return;
  }
  if (!old.contains("artifacts") || !old["artifacts"].is_array()) return;
  for (const auto& a : old["artifacts"]) {
    if (!a.contains("path") || !a["path"].is_string()) continue;
    const fs::path rel(a["path"].get<std::string>());
    if (rel.is_absolute() || rel.lexically_normal().string().rfind("..", 0) == 0) continue;
    std::error_code ec;
    fs::remove(dir / rel, ec);
  }
  std::error_code ec;
  fs::remove(manifest, ec);
}

// ---------------------------------------------------------------------------
// Metric passes

BoundingBox jitter_box(const BoundingBox& b, double jitter, Rng& rng) {
  const double w = std::max(b.width(), 1e-3);
  const double h = std::max(b.height(), 1e-3);
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  BoundingBox out{clamp01(b.xl + rng.uniform(-jitter, jitter) * w),
                  clamp01(b.yt + rng.uniform(-jitter, jitter) * h),
                  clamp01(b.xr + rng.uniform(-jitter, jitter) * w),
                  clamp01(b.yb + rng.uniform(-jitter, jitter) * h)};
  return quantize(canonicalize(out));
}

TemporalSpan jitter_span(const TemporalSpan& s, std::int64_t frames, Rng& rng) {
  auto shift = [&] { return static_cast<std::int64_t>(rng.index(5)) - 2; };
  const std::int64_t last = std::max<std::int64_t>(frames - 1, s.fe);
  std::int64_t fs = std::clamp<std::int64_t>(s.fs + shift(), 0, last);
  std::int64_t fe = std::clamp<std::int64_t>(s.fe + shift(), 0, last);
  if (fe < fs) std::swap(fs, fe);
  return {fs, fe};
}

BoundingBox random_box(Rng& rng) {
  const double w = rng.uniform(0.1, 0.6);
  const double h = rng.uniform(0.1, 0.6);
  const double xl = rng.uniform(0.0, 1.0 - w);
  const double yt = rng.uniform(0.0, 1.0 - h);
  return quantize(BoundingBox{xl, yt, xl + w, yt + h});
}

struct RegionPair {
  Region prediction;
  Region reference;
};

// Scores image pairs with box and mask metrics and tracked pairs with the
// video metrics; rows are emitted only for kinds that occur.
std::vector<MetricRow> score_regions(const std::vector<RegionPair>& pairs, int mask_size) {
  std::vector<BoxPair> boxes;
  std::vector<MaskPair> masks;
  std::vector<double> box_ious;
  std::vector<double> boundary;
  std::vector<double> video_mious;
  std::vector<double> temporal;
  std::vector<MaskSequence> sequences;
  for (const auto& p : pairs) {
    if (const auto* ref = std::get_if<BoundingBox>(&p.reference)) {
      const auto& pred = std::get<BoundingBox>(p.prediction);
      boxes.emplace_back(pred, *ref);
      box_ious.push_back(box_iou(pred, *ref));
      BinaryMask pm = box_to_mask(pred, mask_size, mask_size);
      BinaryMask rm = box_to_mask(*ref, mask_size, mask_size);
      if (!rm.empty()) boundary.push_back(boundary_f(pm, rm, default_boundary_tolerance(mask_size, mask_size)));
      masks.emplace_back(std::move(pm), std::move(rm));
      continue;
    }
    const auto& ref = std::get<TrackedRegion>(p.reference);
    const auto& pred = std::get<TrackedRegion>(p.prediction);
    temporal.push_back(temporal_iou(pred.span, ref.span));
    FrameBoxes pf;
    FrameBoxes rf;
    for (auto f = pred.span.fs; f <= pred.span.fe; ++f) pf[f] = pred.box;
    for (auto f = ref.span.fs; f <= ref.span.fe; ++f) rf[f] = ref.box;
    video_mious.push_back(miou_video(pf, rf));
    MaskSequence seq;
    const auto lo = std::min(pred.span.fs, ref.span.fs);
    const auto hi = std::max(pred.span.fe, ref.span.fe);
    for (auto f = lo; f <= hi; ++f) {
      BinaryMask pm(mask_size, mask_size);
      BinaryMask rm(mask_size, mask_size);
      if (pf.count(f)) pm = box_to_mask(pred.box, mask_size, mask_size);
      if (rf.count(f)) rm = box_to_mask(ref.box, mask_size, mask_size);
      seq.emplace_back(std::move(pm), std::move(rm));
    }
    sequences.push_back(std::move(seq));
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  std::vector<MetricRow> rows;
  if (!boxes.empty()) {
    rows.push_back({"box_iou_mean", mean(box_ious), boxes.size()});
    rows.push_back({"box_accuracy_at_0.5", accuracy_at(boxes, 0.5), boxes.size()});
    double mask_mean = 0.0;
    for (const auto& [pm, rm] : masks) mask_mean += mask_iou(pm, rm);
    rows.push_back({"mask_iou_mean", mask_mean / static_cast<double>(masks.size()), masks.size()});
    rows.push_back({"ciou", ciou(masks), masks.size()});
    rows.push_back({"boundary_f_mean", mean(boundary), boundary.size()});
  }
  if (!sequences.empty()) {
    rows.push_back({"temporal_iou_mean", mean(temporal), temporal.size()});
    rows.push_back({"video_miou_mean", mean(video_mious), video_mious.size()});
    const JandF jf = j_and_f(sequences);
    rows.push_back({"j", jf.j, sequences.size()});
    rows.push_back({"f", jf.f, sequences.size()});
    rows.push_back({"j_and_f", jf.mean(), sequences.size()});
  }
  return rows;
}

std::vector<RegionPair> jitter_annotations(const std::vector<InstructionSample>& samples,
                                           double jitter, std::int64_t frames, Rng& rng) {
  std::vector<RegionPair> pairs;
  for (const auto& s : samples) {
    for (const auto& [label, region] : s.annotations.regions) {
      if (const auto* box = std::get_if<BoundingBox>(&region)) {
        pairs.push_back({jitter_box(*box, jitter, rng), region});
      } else {
        const auto& t = std::get<TrackedRegion>(region);
        pairs.push_back({TrackedRegion{jitter_box(t.box, jitter, rng), jitter_span(t.span, frames, rng)}, region});
      }
    }
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Subcommand bodies

struct Context {
  const Config& config;
  ArtifactWriter& out;
  json& summary;
};

void write_samples(Context& ctx, const std::string& prefix, const std::vector<InstructionSample>& samples,
                   int precision) {
  ctx.out.write(prefix + "instructions.jsonl", samples_jsonl(samples));
  std::map<std::string, int> counts;
  std::size_t invalid = 0;
  json failures = json::array();
  for (const auto& s : samples) {
    ++counts[s.function];
    if (auto problem = validate_sample(s, precision)) {
      ++invalid;
      if (failures.size() < 10) failures.push_back({{"sample_id", s.sample_id}, {"problem", *problem}});
    }
  }
  json report;
  report["total"] = samples.size();
  report["counts"] = counts;
  report["invalid"] = invalid;
  report["failures"] = failures;
  ctx.out.write(prefix + "datagen_report.json", report.dump(2) + "\n");
  ctx.summary["samples"] = samples.size();
  ctx.summary["invalid_samples"] = invalid;
}

void run_gen_data(Context& ctx, const std::string& prefix, bool invocation_only) {
  GenConfig gen = ctx.config.gen_config();
  if (invocation_only) gen.grounding_counts.clear();
  write_samples(ctx, prefix, generate_samples(gen), gen.precision);
}

void run_train_align(Context& ctx, const std::string& prefix) {
  const AlignResult result = train_alignment(ctx.config.align_config());
  ctx.out.write(prefix + "align_history.csv", align_history_csv(result.history));
  ctx.out.write(prefix + "align_checkpoint.json", result.checkpoint_json);
  json report;
  report["initial_nll"] = result.history.front().nll;
  report["final_nll"] = result.history.back().nll;
  report["initial_alignment"] = result.history.front().alignment;
  report["final_alignment"] = result.history.back().alignment;
  report["heldout_alignment"] = result.heldout_alignment;
  ctx.out.write(prefix + "align_report.json", report.dump(2) + "\n");
  ctx.summary["align"] = report;
}

json synergy_report(const synergy::SynergyResult& r, const synergy::SynergyConfig& cfg) {
  json report;
  report["lambda"] = cfg.lambda;
  report["epochs"] = cfg.epochs;
  report["probe_train_accuracy"] = r.probe.train_accuracy;
  report["probe_heldout_accuracy"] = r.probe.heldout_accuracy;
  report["final_disc_accuracy"] = r.history.back().disc_accuracy;
  report["final_adversarial_loss"] = r.history.back().adversarial;
  report["heldout_task_losses"] = r.heldout_task_losses;
  return report;
}

void run_train_synergy(Context& ctx, const std::string& prefix, const std::string* checkpoint_digest) {
  const auto cfg = ctx.config.synergy_config();
  const auto data = synergy::SyntheticTaskSet::generate(cfg);
  const auto result = synergy::train_synergy(data, cfg);
  ctx.out.write(prefix + "synergy_history.csv", synergy::history_csv(result.history));
  json report = synergy_report(result, cfg);
  if (checkpoint_digest) report["align_checkpoint_sha256"] = *checkpoint_digest;
  ctx.out.write(prefix + "synergy_report.json", report.dump(2) + "\n");
  ctx.summary["synergy"] = report;
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

void run_synergy_matrix(Context& ctx) {
  const MatrixConfig mc = ctx.config.matrix_config();
  const int k = static_cast<int>(mc.base.tasks.size());
  std::vector<std::vector<double>> mean(k, std::vector<double>(k, 0.0));
  std::vector<double> solo_mean(k, 0.0);
  std::vector<std::vector<double>> solo_runs(k);
  std::vector<std::vector<std::vector<double>>> per_seed;
  std::ostringstream seeds_csv;
  seeds_csv << "seed,task,with_task,improvement,solo_loss\n";
  for (int s = 0; s < mc.seeds; ++s) {
    auto cfg = mc.base;
    cfg.seed = derive_seed(mc.base.seed, "matrix-seed-" + std::to_string(s));
    const auto data = synergy::SyntheticTaskSet::generate(cfg);
    const auto m = synergy::pairwise_synergy(data, mc.pairs, cfg);
    per_seed.push_back(m.improvement);
    for (int i = 0; i < k; ++i) {
      solo_mean[i] += m.solo_losses[i] / mc.seeds;
      solo_runs[i].push_back(m.solo_losses[i]);
      for (int j = 0; j < k; ++j) {
        mean[i][j] += m.improvement[i][j] / mc.seeds;
        if (i != j) {
          seeds_csv << s << ',' << i << ',' << j << ',' << format_double(m.improvement[i][j]) << ','
                    << format_double(m.solo_losses[i]) << '\n';
        }
      }
    }
  }
  synergy::SynergyMatrix averaged{mean, solo_mean};
  ctx.out.write("synergy_matrix.csv", synergy::matrix_csv(averaged));
  ctx.out.write("synergy_matrix_seeds.csv", seeds_csv.str());

  auto pair_json = [&](std::pair<int, int> p) {
    json j;
    j["tasks"] = json::array({p.first, p.second});
    json seeds = json::array();
    int improved = 0;
    for (const auto& m : per_seed) {
      const double a = m[p.first][p.second];
      const double b = m[p.second][p.first];
      const bool both = a > 0.0 && b > 0.0;
      improved += both ? 1 : 0;
      seeds.push_back({{"improvement", json::array({a, b})}, {"both_improved", both}});
    }
    j["seeds"] = seeds;
    j["seeds_improved"] = improved;
    j["mean_improvement"] = json::array({mean[p.first][p.second], mean[p.second][p.first]});
    j["solo_noise_band"] = json::array({stddev(solo_runs[p.first]), stddev(solo_runs[p.second])});
    j["within_noise_band"] = std::abs(mean[p.first][p.second]) <= stddev(solo_runs[p.first]) &&
                             std::abs(mean[p.second][p.first]) <= stddev(solo_runs[p.second]);
    return j;
  };
  json report;
  report["seeds"] = mc.seeds;
  report["train_per_task"] = mc.base.train_per_task;
  report["synergistic_pair"] = pair_json(mc.synergistic_pair);
  report["control_pair"] = pair_json(mc.control_pair);
  ctx.out.write("synergy_matrix_report.json", report.dump(2) + "\n");
  ctx.summary["matrix"] = report;
}

void run_ablation(Context& ctx) {
  const AblationConfig ac = ctx.config.ablation_config();
  const auto corpus = make_turn_corpus(ac.corpus);
  const Registry registry = build_registry();
  const CentroidClassifier fallback = corpus_classifier(ac.corpus);
  std::vector<AblationReport> reports;
  json summary = json::array();
  for (const MessageMode mode : ac.modes) {
    reports.push_back(msgpass_ablation(corpus, mode, registry, fallback, ac.embedding_required));
    const auto& r = reports.back();
    ctx.out.write("transcript_" + std::string(message_mode_name(mode)) + ".jsonl", transcript_jsonl(r));
    summary.push_back({{"mode", message_mode_name(mode)},
                       {"success_rate", r.success_rate},
                       {"mean_proxy", r.mean_proxy},
                       {"n", r.n}});
  }
  ctx.out.write("ablation.csv", ablation_csv(reports));
  ctx.summary["ablation"] = summary;
}

void run_eval_metrics(Context& ctx) {
  const auto rows = synthetic_metric_pass(ctx.config.metrics_config(), ctx.config.seed());
  ctx.out.write("metrics.csv", metrics_csv(rows));
  json m;
  for (const auto& r : rows) m[r.metric] = r.value;
  ctx.summary["metrics"] = m;
}

void run_grounding_stage(Context& ctx, const std::string& stage, std::initializer_list<GroundingTask> tasks) {
  const GenConfig gen = ctx.config.gen_config();
  const MetricsConfig mc = ctx.config.metrics_config();
  std::vector<InstructionSample> samples;
  for (const GroundingTask t : tasks) {
    auto part = generate_function(gen, grounding_task_name(t));
    samples.insert(samples.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  const std::string prefix = "stage_" + stage + "/";
  ctx.out.write(prefix + "grounding.jsonl", samples_jsonl(samples));

  Rng rng(derive_seed(gen.seed, "metrics-stage-" + stage));
  auto rows = score_regions(jitter_annotations(samples, mc.jitter, mc.frames, rng), mc.mask_size);
  std::size_t parsed = 0;
  std::size_t answered = 0;
  std::size_t correct = 0;
  for (const auto& s : samples) {
    if (!validate_sample(s, gen.precision)) ++parsed;
    if (s.annotations.answer) {
      ++answered;
      try {
        const auto kind = grounding_kind(parse_grounding_task(s.function));
        if (parse_grounded_answer(s.target, kind, ParseMode::Strict).option_index == *s.annotations.answer) ++correct;
      } catch (const Error&) {
      }
    }
  }
  if (!samples.empty()) {
    rows.insert(rows.begin(), MetricRow{"strict_parse_rate", static_cast<double>(parsed) / samples.size(), samples.size()});
  }
  if (answered > 0) rows.push_back({"answer_accuracy", static_cast<double>(correct) / answered, answered});
  ctx.out.write(prefix + "metrics.csv", metrics_csv(rows));
  json m;
  for (const auto& r : rows) m[r.metric] = r.value;
  ctx.summary["stage_" + stage] = m;
}

void run_pipeline(Context& ctx) {
  for (const auto& stage : ctx.config.stages()) {
    const std::string prefix = "stage_" + stage + "/";
    if (stage == "1.1") {
      json stub;
      stub["stage"] = "1.1";
      stub["status"] = "stubbed";
      stub["note"] = "large-corpus vision-language alignment is not run at desk scale";
      ctx.out.write(prefix + "stage.json", stub.dump(2) + "\n");
    } else if (stage == "1.2") {
      run_gen_data(ctx, prefix, true);
    } else if (stage == "1.3") {
      run_train_align(ctx, prefix);
    } else if (stage == "2.1") {
      run_grounding_stage(ctx, stage, {GroundingTask::GroundedImageCaptioning, GroundingTask::ReferringImageSegmentation});
    } else if (stage == "2.2") {
      run_grounding_stage(ctx, stage, {GroundingTask::GroundedVideoCaptioning, GroundingTask::ReferringVideoTracking});
    } else if (stage == "2.3") {
      run_grounding_stage(ctx, stage, {GroundingTask::GroundedImageQA, GroundingTask::GroundedVideoQA});
    } else if (stage == "3") {
      const std::string checkpoint = "stage_1.3/align_checkpoint.json";
      if (!ctx.out.exists(checkpoint)) {
        fail(ErrorCode::ConfigError, "stage 3 requires the stage 1.3 artifact " + checkpoint);
      }
      const std::string digest = sha256_hex(ctx.out.read(checkpoint));
      run_train_synergy(ctx, prefix, &digest);
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

const std::vector<std::string>& run_subcommands() {
  static const std::vector<std::string> kNames = {"gen-data",       "eval-metrics",   "train-align",
                                                  "train-synergy",  "ablate-msgpass", "synergy-matrix",
                                                  "pipeline"};
  return kNames;
}

RunOutcome run_subcommand(std::string_view name, const Config& config, const fs::path& out_dir, bool force) {
  const auto& names = run_subcommands();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    fail(ErrorCode::InvalidArgument, "unknown subcommand '" + std::string(name) + "'");
  }
  if (out_dir.empty()) fail(ErrorCode::InvalidArgument, "output directory is empty");
  if (fs::exists(out_dir / "manifest.json")) {
    if (!force) {
      fail(ErrorCode::IoError, "output directory " + out_dir.string() + " already holds a run; pass --force to overwrite");
    }
    clear_previous(out_dir);
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  // Stage order is validated before any work starts.
  if (name == "pipeline") config.stages();

  ArtifactWriter writer(out_dir);
  json summary;
  Context ctx{config, writer, summary};
  writer.write("config.yaml", config.dump());
  if (name == "gen-data") {
    run_gen_data(ctx, "", false);
  } else if (name == "eval-metrics") {
    run_eval_metrics(ctx);
  } else if (name == "train-align") {
    run_train_align(ctx, "");
  } else if (name == "train-synergy") {
    run_train_synergy(ctx, "", nullptr);
  } else if (name == "ablate-msgpass") {
    run_ablation(ctx);
  } else if (name == "synergy-matrix") {
    run_synergy_matrix(ctx);
  } else {
    run_pipeline(ctx);
  }

  RunOutcome outcome;
  outcome.subcommand = std::string(name);
  outcome.artifacts = writer.take();

  json manifest;
  manifest["schema"] = kManifestSchema;
  manifest["subcommand"] = name;
  manifest["seed"] = config.seed();
  manifest["config_hash"] = config.hash();
  manifest["versions"] = {{"visor", library_version()},
                          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                        "." + std::to_string(EIGEN_MINOR_VERSION)},
                          {"openssl", openssl_version()}};
  manifest["created_at"] = utc_timestamp();
  json list = json::array();
  for (const auto& a : outcome.artifacts) list.push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
  manifest["artifacts"] = list;
  outcome.manifest_json = manifest.dump(2) + "\n";
  {
    std::ofstream out(out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write manifest in " + out_dir.string());
    out << outcome.manifest_json;
  }
  summary["out_dir"] = out_dir.string();
  outcome.summary_json = summary.dump();
  return outcome;
}

// ---------------------------------------------------------------------------
// Parsing front end

ParseKind parse_kind(std::string_view name) {
  static const std::pair<std::string_view, ParseKind> kKinds[] = {
      {"envelope", ParseKind::Envelope},          {"image-caption", ParseKind::ImageCaption},
      {"video-caption", ParseKind::VideoCaption}, {"box", ParseKind::Box},
      {"track", ParseKind::Track},                {"image-answer", ParseKind::ImageAnswer},
      {"video-answer", ParseKind::VideoAnswer}};
  for (const auto& [n, k] : kKinds) {
    if (n == name) return k;
  }
  fail(ErrorCode::InvalidArgument, "unknown parse kind '" + std::string(name) + "'");
}

std::string parse_to_json(ParseKind kind, std::string_view raw, ParseMode mode) {
  json j;
  switch (kind) {
    case ParseKind::Envelope: {
      const auto env = parse_envelope(raw, mode);
      j["user_response"] = env.user_response;
      if (env.task) {
        json task;
        task["module"] = module_display_name(env.task->module);
        task["instruction"] = env.task->instruction;
        task["region"] = env.task->region ? box_json(*env.task->region) : json(nullptr);
        j["task"] = task;
      } else {
        j["task"] = nullptr;
      }
      j["canonical"] = serialize_envelope(env);
      break;
    }
    case ParseKind::ImageCaption:
    case ParseKind::VideoCaption: {
      const auto gk = kind == ParseKind::ImageCaption ? GroundingKind::Image : GroundingKind::Video;
      const auto cap = parse_grounded_caption(raw, gk, mode);
      j["caption"] = cap.caption;
      json phrases = json::array();
      for (const auto& p : cap.phrases) {
        json item = region_json(p.region);
        item["label"] = p.label;
        phrases.push_back(item);
      }
      j["phrases"] = phrases;
      j["canonical"] = serialize_grounded_caption(cap);
      break;
    }
    case ParseKind::Box: {
      const auto box = parse_box(raw, mode);
      j["box"] = box_json(box);
      j["canonical"] = format_box(box);
      break;
    }
    case ParseKind::Track: {
      const auto track = parse_tracking_answer(raw, mode);
      j = region_json(track);
      j["canonical"] = format_tracked(track);
      break;
    }
    case ParseKind::ImageAnswer:
    case ParseKind::VideoAnswer: {
      const auto gk = kind == ParseKind::ImageAnswer ? GroundingKind::Image : GroundingKind::Video;
      const auto ans = parse_grounded_answer(raw, gk, mode);
      json regions = json::array();
      for (const auto& r : ans.regions) regions.push_back(region_json(r));
      j["regions"] = regions;
      j["option_index"] = ans.option_index;
      j["option_text"] = ans.option_text;
      break;
    }
  }
  return j.dump();
}

// ---------------------------------------------------------------------------

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = "metric,value,count\n";
  for (const auto& r : rows) out += r.metric + "," + format_double(r.value) + "," + std::to_string(r.count) + "\n";
  return out;
}

std::vector<MetricRow> synthetic_metric_pass(const MetricsConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "metrics-synthetic"));
  std::vector<RegionPair> image;
  std::vector<RegionPair> video;
  for (int i = 0; i < cfg.instances; ++i) {
    const BoundingBox ref = random_box(rng);
    image.push_back({jitter_box(ref, cfg.jitter, rng), ref});
  }
  for (int i = 0; i < cfg.instances; ++i) {
    const BoundingBox ref = random_box(rng);
    std::int64_t fs = static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(cfg.frames)));
    std::int64_t fe = static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(cfg.frames)));
    if (fe < fs) std::swap(fs, fe);
    const TrackedRegion t{ref, {fs, fe}};
    video.push_back({TrackedRegion{jitter_box(ref, cfg.jitter, rng), jitter_span(t.span, cfg.frames, rng)}, t});
  }
  auto rows = score_regions(image, cfg.mask_size);
  auto vrows = score_regions(video, cfg.mask_size);
  rows.insert(rows.end(), vrows.begin(), vrows.end());
  return rows;
}

}  // namespace visor
