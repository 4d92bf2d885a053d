#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ladder/corpus.hpp"

namespace ladder {

enum class PromptKind { Direct, Refine };

enum class Slot { SrcName, TgtName, Source, Intermediate };

std::string_view slot_name(Slot slot);

struct SlotSpan {
  Slot slot;
  std::size_t offset;
  std::size_t length;
};

/// Rendered text plus where each slot landed, so inputs can be recovered
/// by position instead of substring search.
struct RenderedPrompt {
  std::string text;
  std::vector<SlotSpan> spans;

  /// Text of the first occurrence of `slot`.
  std::string_view slot_text(Slot slot) const;
};

/// Instruction text with `{src_name} {tgt_name} {source} {intermediate}`
/// slots. Direct templates may not mention `{intermediate}`; refine
/// templates need all four. `{source}` and `{intermediate}` occur exactly
/// once. Any other `{identifier}` is an unresolved slot and rejected.
class PromptTemplate {
 public:
  static PromptTemplate make(PromptKind kind, std::string text);
  static PromptTemplate load(PromptKind kind, const std::filesystem::path& path);

  /// ALMA-style "Translate this from X to Y" prompt.
  static PromptTemplate default_direct();
  static PromptTemplate default_refine();

  PromptKind kind() const noexcept { return kind_; }
  const std::string& text() const noexcept { return text_; }

 private:
  struct Piece {
    std::optional<Slot> slot;
    std::string literal;
  };

  PromptTemplate(PromptKind kind, std::string text, std::vector<Piece> pieces)
      : kind_(kind), text_(std::move(text)), pieces_(std::move(pieces)) {}

  RenderedPrompt render(std::string_view source, std::string_view intermediate, const Direction& d) const;

  PromptKind kind_;
  std::string text_;
  std::vector<Piece> pieces_;

  friend RenderedPrompt render_direct(const PromptTemplate&, std::string_view, const Direction&);
  friend RenderedPrompt render_refine(const PromptTemplate&, std::string_view, std::string_view,
                                      const Direction&);
};

RenderedPrompt render_direct(const PromptTemplate& t, std::string_view source, const Direction& d);
RenderedPrompt render_refine(const PromptTemplate& t, std::string_view source, std::string_view intermediate,
                             const Direction& d);

/// The direct/refine pair used by a run.
struct PromptPair {
  PromptTemplate direct = PromptTemplate::default_direct();
  PromptTemplate refine = PromptTemplate::default_refine();
};

/// How bare translations are pulled out of chatty replies.
struct ExtractionPolicy {
  /// ECMAScript regex, matched case-insensitively at the start of the reply.
  /// Empty disables label stripping.
  std::string label_pattern =
      R"(^[ \t]*(?:refined translation|improved translation|final translation|translation|output)[ \t]*:[ \t]*)";
  bool strip_quotes = true;
};

/// Trims, strips a leading label and whole-reply quotes. Throws
/// InvariantError if nothing is left.
std::string parse_completion(std::string_view raw_reply, const ExtractionPolicy& policy = {});

}  // namespace ladder
