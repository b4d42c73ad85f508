#include "consprompt/templates.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "consprompt/backend.hpp"
#include "consprompt/errors.hpp"

namespace consprompt {

std::string PromptedExample::raw_text() const {
  std::string out;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (i) out += ' ';
    out += inputs[i];
  }
  return out;
}

Template Template::parse(std::string_view pattern, std::string id) {
  if (pattern.empty()) throw TemplateSyntaxError("empty template pattern", 0);

  Template t;
  t.id_ = std::move(id);
  t.pattern_ = std::string(pattern);

  std::size_t mask_count = 0;
  bool saw_plain_input = false;
  bool saw_numbered_input = false;
  std::set<std::size_t> numbered;
  std::string literal;

  auto flush_literal = [&] {
    if (literal.empty()) return;
    t.segments_.push_back({Segment::Kind::kLiteral, std::move(literal), 0});
    literal.clear();
  };

  std::size_t i = 0;
  while (i < pattern.size()) {
    const char c = pattern[i];
    if (c == '}') throw TemplateSyntaxError("unmatched '}'", i);
    if (c != '{') {
      literal += c;
      ++i;
      continue;
    }
    const std::size_t close = pattern.find('}', i);
    if (close == std::string_view::npos)
      throw TemplateSyntaxError("unterminated placeholder", i);
    const std::string_view name = pattern.substr(i + 1, close - i - 1);

    if (name == "mask") {
      if (++mask_count > 1) throw TemplateSyntaxError("duplicate {mask} placeholder", i);
      flush_literal();
      t.segments_.push_back({Segment::Kind::kMask, {}, 0});
    } else if (name == "input") {
      if (saw_numbered_input)
        throw TemplateSyntaxError("{input} mixed with numbered inputs", i);
      if (saw_plain_input) throw TemplateSyntaxError("duplicate {input} placeholder", i);
      saw_plain_input = true;
      flush_literal();
      t.segments_.push_back({Segment::Kind::kInput, {}, 0});
    } else if (name.starts_with("input") && name.size() > 5) {
      const std::string_view digits = name.substr(5);
      std::size_t index = 0;
      const auto [ptr, ec] =
          std::from_chars(digits.data(), digits.data() + digits.size(), index);
      if (ec != std::errc() || ptr != digits.data() + digits.size() || index == 0)
        throw TemplateSyntaxError("malformed numbered input placeholder", i);
      if (saw_plain_input)
        throw TemplateSyntaxError("numbered input mixed with {input}", i);
      if (!numbered.insert(index).second)
        throw TemplateSyntaxError("duplicate {input" + std::string(digits) + "} placeholder", i);
      saw_numbered_input = true;
      flush_literal();
      t.segments_.push_back({Segment::Kind::kInput, {}, index - 1});
    } else {
      throw TemplateSyntaxError("unknown placeholder {" + std::string(name) + "}", i);
    }
    i = close + 1;
  }
  flush_literal();

  if (mask_count == 0)
    throw TemplateSyntaxError("missing {mask} placeholder", pattern.size());
  if (!saw_plain_input && !saw_numbered_input)
    throw TemplateSyntaxError("missing {input} placeholder", pattern.size());
  if (saw_numbered_input) {
    // Indices must be exactly 1..N.
    if (*numbered.rbegin() != numbered.size())
      throw TemplateSyntaxError(
          "numbered inputs must be contiguous from {input1}", pattern.size());
    t.input_count_ = numbered.size();
  } else {
    t.input_count_ = 1;
  }
  return t;
}

PromptedExample Template::apply(std::span<const std::string> inputs,
                                std::optional<int> label) const {
  if (inputs.size() != input_count_)
    throw ContractError("template '" + id_ + "' expects " +
                        std::to_string(input_count_) + " input(s), got " +
                        std::to_string(inputs.size()));
  for (const auto& in : inputs) {
    if (in.empty()) throw ContractError("cannot apply template to empty input");
    if (in.find(kMaskToken) != std::string::npos)
      throw ContractError("input text contains the reserved mask marker");
  }

  PromptedExample out;
  out.inputs.assign(inputs.begin(), inputs.end());
  out.label = label;
  out.template_id = id_;
  for (const auto& seg : segments_) {
    switch (seg.kind) {
      case Segment::Kind::kLiteral:
        out.text += seg.literal;
        break;
      case Segment::Kind::kInput:
        out.text += inputs[seg.input_index];
        break;
      case Segment::Kind::kMask:
        out.mask_span.begin = out.text.size();
        out.text += kMaskToken;
        out.mask_span.end = out.text.size();
        break;
    }
  }
  return out;
}

PromptedExample Template::apply(std::string_view input,
                                std::optional<int> label) const {
  const std::string owned(input);
  return apply(std::span<const std::string>(&owned, 1), label);
}

namespace {

bool match_segments(const std::vector<Template::Segment>& segs, std::size_t si,
                    std::string_view text, std::size_t pos,
                    std::vector<std::string>& fields) {
  using Kind = Template::Segment::Kind;
  if (si == segs.size()) return pos == text.size();
  const auto& seg = segs[si];
  if (seg.kind == Kind::kLiteral || seg.kind == Kind::kMask) {
    const std::string_view want = seg.kind == Kind::kMask ? kMaskToken
                                                          : std::string_view(seg.literal);
    if (text.substr(pos, want.size()) != want) return false;
    return match_segments(segs, si + 1, text, pos + want.size(), fields);
  }
  // Input: try every non-empty extent, shortest first.
  for (std::size_t end = pos + 1; end <= text.size(); ++end) {
    fields[seg.input_index] = std::string(text.substr(pos, end - pos));
    if (match_segments(segs, si + 1, text, end, fields)) return true;
  }
  return false;
}

}  // namespace

std::optional<std::vector<std::string>> Template::strip_scaffold(
    std::string_view text) const {
  // Single-input patterns are unambiguous by length.
  if (input_count_ == 1) {
    std::size_t prefix = 0;
    std::size_t suffix = 0;
    bool before = true;
    for (const auto& seg : segments_) {
      if (seg.kind == Segment::Kind::kInput) {
        before = false;
        continue;
      }
      const std::size_t len =
          seg.kind == Segment::Kind::kMask ? kMaskToken.size() : seg.literal.size();
      (before ? prefix : suffix) += len;
    }
    if (text.size() <= prefix + suffix) return std::nullopt;
    std::vector<std::string> fields{
        std::string(text.substr(prefix, text.size() - prefix - suffix))};
    try {
      if (apply(fields).text != text) return std::nullopt;
    } catch (const ContractError&) {
      return std::nullopt;
    }
    return fields;
  }
  std::vector<std::string> fields(input_count_);
  if (!match_segments(segments_, 0, text, 0, fields)) return std::nullopt;
  return fields;
}

std::vector<Template> parse_template_set(std::string_view content,
                                         const std::string& source_name) {
  std::vector<Template> out;
  std::set<std::string> ids;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw LoadError(source_name, line_no, "expected <id><TAB><pattern>");
    std::string id = line.substr(0, tab);
    const std::string pattern = line.substr(tab + 1);
    if (!ids.insert(id).second)
      throw LoadError(source_name, line_no, "duplicate template id '" + id + "'");
    try {
      out.push_back(Template::parse(pattern, std::move(id)));
    } catch (const TemplateSyntaxError& e) {
      throw LoadError(source_name, line_no, e.what());
    }
  }
  if (out.empty())
    throw LoadError(source_name, std::max<std::size_t>(line_no, 1), "no templates defined");
  return out;
}

std::vector<Template> load_template_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open template file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_template_set(buf.str(), path.string());
}

}  // namespace consprompt
