#include "ladder/prompting.hpp"

#include <array>
#include <fstream>
#include <regex>
#include <sstream>

#include "ladder/error.hpp"
#include "ladder/text.hpp"

namespace ladder {
namespace {

constexpr std::string_view kDefaultDirect =
    "Translate this from {src_name} to {tgt_name}:\n"
    "{src_name}: {source}\n"
    "{tgt_name}:";

constexpr std::string_view kDefaultRefine =
    "Improve the intermediate {tgt_name} translation of the {src_name} sentence below. "
    "Fix mistranslations, omissions and unnatural phrasing, and reply with the refined "
    "{tgt_name} translation only.\n"
    "{src_name}: {source}\n"
    "Intermediate translation: {intermediate}\n"
    "{tgt_name}:";

std::optional<Slot> slot_from_name(std::string_view name) {
  if (name == "src_name") return Slot::SrcName;
  if (name == "tgt_name") return Slot::TgtName;
  if (name == "source") return Slot::Source;
  if (name == "intermediate") return Slot::Intermediate;
  return std::nullopt;
}

bool is_ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

struct QuotePair {
  std::string_view open;
  std::string_view close;
};

constexpr std::array<QuotePair, 8> kQuotes{{
    {"\"", "\""},
    {"'", "'"},
    {"“", "”"},
    {"‘", "’"},
    {"«", "»"},
    {"„", "“"},
    {"「", "」"},
    {"『", "』"},
}};

std::string_view strip_enclosing_quotes(std::string_view s) {
  for (const auto& q : kQuotes) {
    if (s.size() < q.open.size() + q.close.size()) continue;
    if (!s.starts_with(q.open) || !s.ends_with(q.close)) continue;
    auto inner = s.substr(q.open.size(), s.size() - q.open.size() - q.close.size());
    // Quotes only count as a wrapper when nothing inside closes them early.
    if (inner.find(q.close) != std::string_view::npos) continue;
    if (q.open != q.close && inner.find(q.open) != std::string_view::npos) continue;
    return inner;
  }
  return s;
}

}  // namespace

std::string_view slot_name(Slot slot) {
  switch (slot) {
    case Slot::SrcName: return "src_name";
    case Slot::TgtName: return "tgt_name";
    case Slot::Source: return "source";
    case Slot::Intermediate: return "intermediate";
  }
  return "";
}

std::string_view RenderedPrompt::slot_text(Slot slot) const {
  for (const auto& span : spans) {
    if (span.slot == slot) return std::string_view(text).substr(span.offset, span.length);
  }
  throw InvariantError("rendered prompt has no {" + std::string(slot_name(slot)) + "} slot");
}

PromptTemplate PromptTemplate::make(PromptKind kind, std::string text) {
  std::vector<Piece> pieces;
  std::array<int, 4> counts{};
  std::string literal;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      std::size_t j = i + 1;
      while (j < text.size() && is_ident_char(text[j])) ++j;
      if (j < text.size() && text[j] == '}' && j > i + 1) {
        const auto name = std::string_view(text).substr(i + 1, j - i - 1);
        const auto slot = slot_from_name(name);
        if (!slot) throw InvariantError("prompt template: unresolved slot {" + std::string(name) + "}");
        if (!literal.empty()) pieces.push_back(Piece{std::nullopt, std::move(literal)});
        literal.clear();
        pieces.push_back(Piece{slot, {}});
        ++counts[static_cast<int>(*slot)];
        i = j + 1;
        continue;
      }
    }
    literal.push_back(text[i]);
    ++i;
  }
  if (!literal.empty()) pieces.push_back(Piece{std::nullopt, std::move(literal)});

  auto count = [&](Slot s) { return counts[static_cast<int>(s)]; };
  const char* kind_name = kind == PromptKind::Direct ? "direct" : "refine";
  auto fail = [&](const std::string& why) {
    throw InvariantError(std::string(kind_name) + " prompt template: " + why);
  };
  if (count(Slot::Source) != 1) fail("{source} must appear exactly once");
  if (count(Slot::SrcName) < 1) fail("missing {src_name}");
  if (count(Slot::TgtName) < 1) fail("missing {tgt_name}");
  if (kind == PromptKind::Direct && count(Slot::Intermediate) != 0) fail("{intermediate} is not allowed");
  if (kind == PromptKind::Refine && count(Slot::Intermediate) != 1) fail("{intermediate} must appear exactly once");

  return PromptTemplate(kind, std::move(text), std::move(pieces));
}

PromptTemplate PromptTemplate::load(PromptKind kind, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read prompt template " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  auto text = buf.str();
  // Editors append a final newline; the prompt itself should not end with one.
  if (text.ends_with("\r\n")) {
    text.resize(text.size() - 2);
  } else if (text.ends_with('\n')) {
    text.pop_back();
  }
  try {
    return make(kind, std::move(text));
  } catch (const InvariantError& e) {
    throw InvariantError(path.string() + ": " + e.what());
  }
}

PromptTemplate PromptTemplate::default_direct() { return make(PromptKind::Direct, std::string(kDefaultDirect)); }

PromptTemplate PromptTemplate::default_refine() { return make(PromptKind::Refine, std::string(kDefaultRefine)); }

RenderedPrompt PromptTemplate::render(std::string_view source, std::string_view intermediate,
                                      const Direction& d) const {
  RenderedPrompt out;
  for (const auto& piece : pieces_) {
    if (!piece.slot) {
      out.text += piece.literal;
      continue;
    }
    std::string_view value;
    switch (*piece.slot) {
      case Slot::SrcName: value = d.src_name; break;
      case Slot::TgtName: value = d.tgt_name; break;
      case Slot::Source: value = source; break;
      case Slot::Intermediate: value = intermediate; break;
    }
    out.spans.push_back(SlotSpan{*piece.slot, out.text.size(), value.size()});
    out.text += value;
  }
  return out;
}

RenderedPrompt render_direct(const PromptTemplate& t, std::string_view source, const Direction& d) {
  if (t.kind() != PromptKind::Direct) throw InvariantError("render_direct: template is not a direct template");
  if (text::is_blank(source)) throw InvariantError("render_direct: empty source");
  return t.render(source, {}, d);
}

RenderedPrompt render_refine(const PromptTemplate& t, std::string_view source, std::string_view intermediate,
                             const Direction& d) {
  if (t.kind() != PromptKind::Refine) throw InvariantError("render_refine: template is not a refine template");
  if (text::is_blank(source)) throw InvariantError("render_refine: empty source");
  if (text::is_blank(intermediate)) throw InvariantError("render_refine: refinement needs a nonempty intermediate");
  return t.render(source, intermediate, d);
}

std::string parse_completion(std::string_view raw_reply, const ExtractionPolicy& policy) {
  if (raw_reply.empty()) throw InvariantError("parse_completion: empty reply");
  std::string reply = text::trim_unicode(raw_reply);
  if (!policy.label_pattern.empty()) {
    const std::regex label(policy.label_pattern, std::regex::ECMAScript | std::regex::icase);
    std::smatch m;
    if (std::regex_search(reply, m, label, std::regex_constants::match_continuous)) {
      reply = text::trim_unicode(std::string_view(reply).substr(static_cast<std::size_t>(m.length(0))));
    }
  }
  if (policy.strip_quotes) reply = text::trim_unicode(strip_enclosing_quotes(reply));
  if (reply.empty()) throw InvariantError("parse_completion: nothing left after stripping");
  return reply;
}

}  // namespace ladder
