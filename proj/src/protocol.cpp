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

#include "visor/protocol.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>

#include "visor/error.hpp"
#include "text_util.hpp"

namespace visor {
namespace {

using detail::is_space;
using detail::lower;
using detail::trim;

// ---------------------------------------------------------------------------
// Tag scanning

enum class BlockKind { Module = 0, Instruction = 1, Region = 2 };

constexpr std::array<std::string_view, 3> kTagNames = {"Module", "Instruction", "Region"};

struct TagToken {
  BlockKind kind;
  bool closing;
  std::size_t begin;  // position of '<'
  std::size_t end;    // one past '>'
};

std::optional<TagToken> match_tag(std::string_view raw, std::size_t pos) {
  std::size_t i = pos + 1;
  auto skip_ws = [&] {
    while (i < raw.size() && is_space(raw[i])) ++i;
  };
  skip_ws();
  bool closing = false;
  if (i < raw.size() && raw[i] == '/') {
    closing = true;
    ++i;
    skip_ws();
  }
  const std::size_t name_begin = i;
  while (i < raw.size() && std::isalpha(static_cast<unsigned char>(raw[i]))) ++i;
  const std::string name = lower(raw.substr(name_begin, i - name_begin));
  skip_ws();
  if (i >= raw.size() || raw[i] != '>') return std::nullopt;
  for (std::size_t k = 0; k < kTagNames.size(); ++k) {
    if (name == lower(kTagNames[k])) {
      return TagToken{static_cast<BlockKind>(k), closing, pos, i + 1};
    }
  }
  return std::nullopt;
}

std::vector<TagToken> scan_tags(std::string_view raw) {
  std::vector<TagToken> tokens;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '<') continue;
    if (auto tok = match_tag(raw, i)) {
      tokens.push_back(*tok);
      i = tok->end - 1;
    }
  }
  return tokens;
}

bool contains_tag(std::string_view text) { return !scan_tags(text).empty(); }

// ---------------------------------------------------------------------------
// Coordinate tuples

struct Tuple {
  std::array<double, 4> coords{};
  std::optional<TemporalSpan> span;
};

bool parse_real(std::string_view token, double& out) {
  token = trim(token);
  if (token.empty()) return false;
  if (token.front() == '+') token.remove_prefix(1);
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, out, std::chars_format::general);
  return ec == std::errc{} && ptr == last && std::isfinite(out);
}

bool parse_frame(std::string_view token, std::int64_t& out) {
  token = trim(token);
  if (token.empty()) return false;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == sep) {
      parts.push_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

/// Parses "(a, b, c, d)" or "(a, b, c, d | fs, fe)"; `raw` must be exactly the
/// parenthesized group modulo surrounding whitespace.
Tuple parse_tuple(std::string_view raw) {
  std::string_view body = trim(raw);
  if (body.size() < 2 || body.front() != '(' || body.back() != ')') {
    fail(ErrorCode::MalformedRegion, "coordinate group must be parenthesized: '" +
                                         std::string(raw) + "'");
  }
  body = body.substr(1, body.size() - 2);
  Tuple tuple;
  const auto halves = split(body, '|');
  if (halves.size() > 2) {
    fail(ErrorCode::MalformedRegion, "more than one '|' in '" + std::string(raw) + "'");
  }
  const auto coords = split(halves[0], ',');
  if (coords.size() != 4) {
    fail(ErrorCode::MalformedRegion,
         "expected 4 coordinates, got " + std::to_string(coords.size()) + " in '" +
             std::string(raw) + "'");
  }
  for (std::size_t k = 0; k < 4; ++k) {
    if (!parse_real(coords[k], tuple.coords[k])) {
      fail(ErrorCode::MalformedRegion,
           "not a real number: '" + std::string(trim(coords[k])) + "'");
    }
  }
  if (halves.size() == 2) {
    const auto frames = split(halves[1], ',');
    TemporalSpan span;
    if (frames.size() != 2 || !parse_frame(frames[0], span.fs) ||
        !parse_frame(frames[1], span.fe)) {
      fail(ErrorCode::MalformedRegion,
           "frame span must be two integers: '" + std::string(trim(halves[1])) + "'");
    }
    tuple.span = span;
  }
  return tuple;
}

BoundingBox checked_box(const std::array<double, 4>& c, ParseMode mode) {
  BoundingBox box{c[0], c[1], c[2], c[3]};
  if (!box.in_unit_range()) {
    fail(ErrorCode::MalformedRegion,
         "coordinates must lie in [0, 1]: " + format_box(box, 6));
  }
  if (box.xl > box.xr || box.yt > box.yb) {
    if (mode == ParseMode::Strict) {
      fail(ErrorCode::NonCanonicalBox,
           "expected top-left then bottom-right corner, got " + format_box(box, 6));
    }
    box = canonicalize(box);
  }
  return box;
}

TemporalSpan checked_span(const TemporalSpan& span) {
  if (!span.valid()) {
    fail(ErrorCode::InvalidSpan, "invalid frame span (" + std::to_string(span.fs) + ", " +
                                     std::to_string(span.fe) + ")");
  }
  return span;
}

Region region_from_tuple(const Tuple& tuple, GroundingKind kind, ParseMode mode) {
  if (kind == GroundingKind::Image) {
    if (tuple.span) fail(ErrorCode::SpanOnImage, "frame span given for an image region");
    return checked_box(tuple.coords, mode);
  }
  if (!tuple.span) fail(ErrorCode::MissingSpan, "video region requires '| Fs, Fe'");
  return TrackedRegion{checked_box(tuple.coords, mode), checked_span(*tuple.span)};
}

// ---------------------------------------------------------------------------
// Phrase lines

bool escaped_at(std::string_view text, std::size_t pos) {
  std::size_t slashes = 0;
  while (pos > slashes && text[pos - slashes - 1] == '\\') ++slashes;
  return slashes % 2 == 1;
}

std::string unescape_label(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '\\' && i + 1 < raw.size()) {
      out.push_back(raw[++i]);
    } else {
      out.push_back(raw[i]);
    }
  }
  return out;
}

struct PhraseShape {
  std::string_view label;  // still escaped
  std::string_view group;
};

/// Splits "label: (...)" at the last ':' that directly precedes the balanced
/// parenthesis group closing the line.
std::optional<PhraseShape> phrase_shape(std::string_view line) {
  line = trim(line);
  if (!line.empty() && line.back() == ',') line = trim(line.substr(0, line.size() - 1));
  if (line.empty() || line.back() != ')') return std::nullopt;
  int depth = 0;
  std::size_t open = std::string_view::npos;
  for (std::size_t i = line.size(); i-- > 0;) {
    if (line[i] == ')' && !escaped_at(line, i)) ++depth;
    if (line[i] == '(' && !escaped_at(line, i)) {
      if (--depth == 0) {
        open = i;
        break;
      }
    }
  }
  if (open == std::string_view::npos) return std::nullopt;
  std::size_t colon = open;
  while (colon > 0 && is_space(line[colon - 1])) --colon;
  if (colon == 0 || line[colon - 1] != ':' || escaped_at(line, colon - 1)) return std::nullopt;
  return PhraseShape{trim(line.substr(0, colon - 1)), line.substr(open)};
}

GroundedPhrase parse_phrase(const PhraseShape& shape, GroundingKind kind, ParseMode mode) {
  if (shape.label.empty()) fail(ErrorCode::MalformedPhraseLine, "phrase label is empty");
  for (std::size_t i = 0; i < shape.label.size(); ++i) {
    const char c = shape.label[i];
    if ((c == '(' || c == ':') && !escaped_at(shape.label, i)) {
      fail(ErrorCode::MalformedPhraseLine,
           "unescaped '" + std::string(1, c) + "' in label '" + std::string(shape.label) + "'");
    }
  }
  if (shape.label.back() == '\\' && !escaped_at(shape.label, shape.label.size() - 1)) {
    fail(ErrorCode::MalformedPhraseLine, "dangling escape in label");
  }
  return GroundedPhrase{unescape_label(shape.label),
                        region_from_tuple(parse_tuple(shape.group), kind, mode)};
}

std::vector<std::string_view> split_lines(std::string_view raw) {
  auto lines = split(raw, '\n');
  for (auto& line : lines) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  }
  return lines;
}

}  // namespace

// ---------------------------------------------------------------------------

bool BoundingBox::in_unit_range() const {
  auto ok = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  return ok(xl) && ok(yt) && ok(xr) && ok(yb);
}

BoundingBox canonicalize(const BoundingBox& box) {
  return {std::min(box.xl, box.xr), std::min(box.yt, box.yb), std::max(box.xl, box.xr),
          std::max(box.yt, box.yb)};
}

namespace {
double quantize_value(double v, int precision) {
  const double scale = std::pow(10.0, precision);
  const double q = std::round(v * scale) / scale;
  return q == 0.0 ? 0.0 : q;  // drop negative zero
}
}  // namespace

BoundingBox quantize(const BoundingBox& box, int precision) {
  return {quantize_value(box.xl, precision), quantize_value(box.yt, precision),
          quantize_value(box.xr, precision), quantize_value(box.yb, precision)};
}

std::string format_coordinate(double value, int precision) {
  std::array<char, 64> buf{};
  const double q = quantize_value(value, precision);
  auto [ptr, ec] =
      std::to_chars(buf.data(), buf.data() + buf.size(), q, std::chars_format::fixed, precision);
  if (ec != std::errc{}) fail(ErrorCode::Internal, "coordinate formatting overflow");
  return std::string(buf.data(), ptr);
}

std::string format_box(const BoundingBox& box, int precision) {
  return "(" + format_coordinate(box.xl, precision) + ", " + format_coordinate(box.yt, precision) +
         ", " + format_coordinate(box.xr, precision) + ", " +
         format_coordinate(box.yb, precision) + ")";
}

std::string format_tracked(const TrackedRegion& region, int precision) {
  std::string text = format_box(region.box, precision);
  text.pop_back();
  text += " | " + std::to_string(region.span.fs) + ", " + std::to_string(region.span.fe) + ")";
  return text;
}

std::string format_region(const Region& region, int precision) {
  if (const auto* box = std::get_if<BoundingBox>(&region)) return format_box(*box, precision);
  return format_tracked(std::get<TrackedRegion>(region), precision);
}

std::string escape_label(std::string_view label) {
  std::string out;
  for (char c : label) {
    if (c == '\\' || c == '(' || c == ':') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::string_view module_display_name(ModuleName name) noexcept {
  switch (name) {
    case ModuleName::ImageGeneration: return "Image Generation";
    case ModuleName::ImageSegmentation: return "Image Segmentation";
    case ModuleName::ImageEditing: return "Image Editing";
    case ModuleName::VideoGeneration: return "Video Generation";
    case ModuleName::VideoSegmentation: return "Video Segmentation";
    case ModuleName::VideoEditing: return "Video Editing";
  }
  return "";
}

std::optional<ModuleName> lookup_module(std::string_view text) noexcept {
  std::string normalized;
  bool pending_space = false;
  for (char c : trim(text)) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) normalized.push_back(' ');
    pending_space = false;
    normalized.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  for (ModuleName m : kAllModules) {
    if (normalized == lower(module_display_name(m))) return m;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Envelopes

InvocationEnvelope parse_envelope(std::string_view raw, ParseMode mode) {
  const auto tokens = scan_tags(raw);
  std::array<std::optional<std::string_view>, 3> blocks;
  std::vector<std::string_view> outside;

  std::size_t cursor = 0;
  std::optional<TagToken> open;
  for (const auto& tok : tokens) {
    const auto name = std::string(kTagNames[static_cast<int>(tok.kind)]);
    if (!tok.closing) {
      if (open) {
        fail(ErrorCode::UnbalancedTags,
             "<" + name + "> opened inside <" +
                 std::string(kTagNames[static_cast<int>(open->kind)]) + ">");
      }
      outside.push_back(raw.substr(cursor, tok.begin - cursor));
      open = tok;
      continue;
    }
    if (!open || open->kind != tok.kind) {
      fail(ErrorCode::UnbalancedTags, "</" + name + "> without matching opening tag");
    }
    auto& slot = blocks[static_cast<int>(tok.kind)];
    if (slot) fail(ErrorCode::DuplicateBlock, "more than one <" + name + "> block");
    slot = raw.substr(open->end, tok.begin - open->end);
    cursor = tok.end;
    open.reset();
  }
  if (open) {
    fail(ErrorCode::UnbalancedTags,
         "<" + std::string(kTagNames[static_cast<int>(open->kind)]) + "> is never closed");
  }
  outside.push_back(raw.substr(cursor));

  InvocationEnvelope envelope;
  for (auto segment : outside) {
    segment = trim(segment);
    if (segment.empty()) continue;
    if (!envelope.user_response.empty()) envelope.user_response.push_back('\n');
    envelope.user_response.append(segment);
  }

  const auto& module_block = blocks[static_cast<int>(BlockKind::Module)];
  const auto& instruction_block = blocks[static_cast<int>(BlockKind::Instruction)];
  const auto& region_block = blocks[static_cast<int>(BlockKind::Region)];
  if (!module_block) {
    if (instruction_block || region_block) {
      fail(ErrorCode::IncompleteTask, "task blocks present without a <Module> block");
    }
    return envelope;
  }
  const auto module = lookup_module(*module_block);
  if (!module) {
    fail(ErrorCode::UnknownModule, "unknown module '" + std::string(trim(*module_block)) + "'");
  }
  if (!instruction_block) fail(ErrorCode::IncompleteTask, "<Module> without <Instruction>");

  Task task;
  task.module = *module;
  task.instruction = std::string(trim(*instruction_block));
  if (region_block) {
    task.region = std::get<BoundingBox>(
        region_from_tuple(parse_tuple(*region_block), GroundingKind::Image, mode));
  }
  envelope.task = std::move(task);
  return envelope;
}

std::optional<std::string> envelope_violation(const InvocationEnvelope& envelope) {
  if (trim(envelope.user_response) != envelope.user_response) {
    return "user_response has leading or trailing whitespace";
  }
  if (contains_tag(envelope.user_response)) return "user_response contains a tag";
  if (!envelope.task) return std::nullopt;
  const auto& task = *envelope.task;
  if (trim(task.instruction) != task.instruction) {
    return "instruction has leading or trailing whitespace";
  }
  if (contains_tag(task.instruction)) return "instruction contains a tag";
  if (task.region) {
    if (!task.region->canonical()) return "region is not a canonical box";
    if (quantize(*task.region) != *task.region) {
      return "region coordinates are not representable at serialization precision";
    }
  }
  return std::nullopt;
}

std::string serialize_envelope(const InvocationEnvelope& envelope, int precision) {
  std::string out = envelope.user_response;
  if (!envelope.task) return out;
  const auto& task = *envelope.task;
  auto block = [&](std::string_view name, std::string_view body) {
    if (!out.empty()) out.push_back('\n');
    out += "<";
    out += name;
    out += "> ";
    out += body;
    out += " </";
    out += name;
    out += ">";
  };
  block("Module", module_display_name(task.module));
  block("Instruction", task.instruction);
  if (task.region) block("Region", format_box(canonicalize(*task.region), precision));
  return out;
}

// ---------------------------------------------------------------------------
// Grounding answers

BoundingBox parse_box(std::string_view raw, ParseMode mode) {
  return std::get<BoundingBox>(region_from_tuple(parse_tuple(raw), GroundingKind::Image, mode));
}

TrackedRegion parse_tracking_answer(std::string_view raw, ParseMode mode) {
  return std::get<TrackedRegion>(
      region_from_tuple(parse_tuple(raw), GroundingKind::Video, mode));
}

GroundedCaption parse_grounded_caption(std::string_view raw, GroundingKind kind,
                                       ParseMode mode) {
  GroundedCaption result;
  const auto lines = split_lines(raw);
  bool first = true;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto shape = phrase_shape(line);
    const bool caption_line = first && !shape;
    first = false;
    if (caption_line) {
      result.caption = std::string(line);
      continue;
    }
    if (!shape) {
      fail(ErrorCode::MalformedPhraseLine,
           "line " + std::to_string(i + 1) + " is not 'label: (...)': '" + std::string(line) +
               "'");
    }
    result.phrases.push_back(parse_phrase(*shape, kind, mode));
  }
  return result;
}

std::string serialize_grounded_caption(const GroundedCaption& caption, int precision) {
  std::string out = caption.caption;
  for (const auto& phrase : caption.phrases) {
    if (!out.empty()) out.push_back('\n');
    out += escape_label(phrase.label);
    out += ": ";
    out += format_region(phrase.region, precision);
  }
  return out;
}

GroundedAnswer parse_grounded_answer(std::string_view raw, GroundingKind kind, ParseMode mode) {
  GroundedAnswer answer;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '(') continue;
    const auto close = raw.find(')', i);
    if (close == std::string_view::npos) break;
    const auto group = raw.substr(i, close - i + 1);
    const auto inner = trim(group.substr(1, group.size() - 2));
    const bool coordinate_like =
        !inner.empty() && (std::isdigit(static_cast<unsigned char>(inner.front())) != 0) &&
        inner.find(',') != std::string_view::npos;
    if (coordinate_like) {
      answer.regions.push_back(region_from_tuple(parse_tuple(group), kind, mode));
      i = close;
    }
  }

  static constexpr std::string_view kMarker = "the answer is ";
  const std::string lowered = lower(raw);
  const auto at = lowered.rfind(kMarker);
  if (at == std::string::npos) fail(ErrorCode::MalformedAnswer, "no 'the answer is' clause");
  std::string_view rest = raw.substr(at + kMarker.size());
  std::size_t digits = 0;
  while (digits < rest.size() && std::isdigit(static_cast<unsigned char>(rest[digits]))) ++digits;
  if (digits == 0 || digits >= rest.size() || rest[digits] != ')') {
    fail(ErrorCode::MalformedAnswer, "answer clause must read 'N) option'");
  }
  std::from_chars(rest.data(), rest.data() + digits, answer.option_index);
  auto text = trim(rest.substr(digits + 1));
  if (!text.empty() && text.back() == '.') text.remove_suffix(1);
  answer.option_text = std::string(trim(text));
  if (answer.option_text.empty()) fail(ErrorCode::MalformedAnswer, "answer option text is empty");
  return answer;
}

}  // namespace visor
