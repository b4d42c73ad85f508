#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace consprompt {

/// Half-open byte range [begin, end).
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const CharSpan&) const = default;
};

/// A raw input rendered through a template.
struct PromptedExample {
  std::string text;
  CharSpan mask_span;
  /// Original text fields, one per input placeholder.
  std::vector<std::string> inputs;
  std::optional<int> label;
  std::string template_id;

  /// Input fields joined by a single space. Used for similarity ranking.
  std::string raw_text() const;
};

/// A prompt pattern with one mask slot and one or more input slots.
///
/// Placeholders are `{mask}` and either a single `{input}` or the numbered
/// family `{input1}`, `{input2}`, ... each used exactly once. Every other
/// byte is copied verbatim; braces are reserved for placeholders.
class Template {
 public:
  struct Segment {
    enum class Kind { kLiteral, kInput, kMask };
    Kind kind = Kind::kLiteral;
    std::string literal;
    std::size_t input_index = 0;
  };

  /// Throws TemplateSyntaxError (with byte position) on malformed patterns.
  static Template parse(std::string_view pattern, std::string id = "t0");

  const std::string& id() const { return id_; }
  const std::string& pattern() const { return pattern_; }
  std::size_t input_count() const { return input_count_; }
  const std::vector<Segment>& segments() const { return segments_; }

  /// Pure substitution: no separators are inserted, nothing is trimmed.
  /// Inputs must be non-empty and must not contain the mask marker.
  PromptedExample apply(std::span<const std::string> inputs,
                        std::optional<int> label = std::nullopt) const;
  PromptedExample apply(std::string_view input,
                        std::optional<int> label = std::nullopt) const;

  /// Recovers the input fields from a rendered text, or nullopt when `text`
  /// was not produced by this template.
  std::optional<std::vector<std::string>> strip_scaffold(std::string_view text) const;

  bool operator==(const Template& other) const {
    return id_ == other.id_ && pattern_ == other.pattern_;
  }

 private:
  std::string id_;
  std::string pattern_;
  std::size_t input_count_ = 0;
  std::vector<Segment> segments_;
};

inline Template parse_template(std::string_view pattern, std::string id = "t0") {
  return Template::parse(pattern, std::move(id));
}

/// Parses a template file body: one `<id><TAB><pattern>` per line, `#`
/// comments and blank lines ignored. The first template is the main one.
/// Throws LoadError naming the offending line.
std::vector<Template> parse_template_set(std::string_view content,
                                         const std::string& source_name);

std::vector<Template> load_template_set(const std::filesystem::path& path);

}  // namespace consprompt
