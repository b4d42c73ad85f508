#include <gtest/gtest.h>

#include "consprompt/errors.hpp"
#include "consprompt/rng.hpp"
#include "consprompt/templates.hpp"
#include "test_support.hpp"

namespace consprompt {
namespace {

std::size_t count_mask(const std::string& text) {
  std::size_t n = 0;
  for (auto p = text.find("[MASK]"); p != std::string::npos; p = text.find("[MASK]", p + 1)) ++n;
  return n;
}

TEST(TemplateParse, AcceptsSingleInputPattern) {
  const auto t = parse_template("{input} It is {mask}");
  EXPECT_EQ(t.input_count(), 1u);
  ASSERT_EQ(t.segments().size(), 3u);
  EXPECT_EQ(t.segments()[1].literal, " It is ");
}

TEST(TemplateParse, RejectsMissingMask) {
  try {
    parse_template("{input} has no mask");
    FAIL() << "expected a syntax error";
  } catch (const TemplateSyntaxError& e) {
    EXPECT_EQ(e.position(), 19u);
  }
}

TEST(TemplateParse, RejectsDuplicateMaskAtSecondOccurrence) {
  try {
    parse_template("{mask} {mask} {input}");
    FAIL() << "expected a syntax error";
  } catch (const TemplateSyntaxError& e) {
    EXPECT_EQ(e.position(), 7u);
  }
}

TEST(TemplateParse, RejectsMalformedPatterns) {
  for (const char* bad : {"", "{mask}", "{input} {mask", "{input} } {mask}", "{input} {label} {mask}",
                          "{input} {input} {mask}", "{input1} {input} {mask}",
                          "{input1} {input3} {mask}", "{input0} {mask}", "{inputx} {mask}"}) {
    EXPECT_THROW(parse_template(bad), TemplateSyntaxError) << bad;
  }
}

TEST(TemplateParse, NumberedInputsForPairs) {
  const auto t = parse_template("{input1} ? {mask} , {input2}");
  EXPECT_EQ(t.input_count(), 2u);
  const std::vector<std::string> in{"A man sleeps", "A person rests"};
  EXPECT_EQ(t.apply(in).text, "A man sleeps ? [MASK] , A person rests");
}

TEST(TemplateApply, RendersPromptByteExactly) {
  const auto p = parse_template("{input} It is {mask}").apply("great movie", 1);
  EXPECT_EQ(p.text, "great movie It is [MASK]");
  EXPECT_EQ(p.mask_span, (CharSpan{18, 24}));
  EXPECT_EQ(p.raw_text(), "great movie");
  EXPECT_EQ(p.label, 1);
}

TEST(TemplateApply, MaskFirst) {
  const auto p = parse_template("{mask} {input}").apply("x");
  EXPECT_EQ(p.text, "[MASK] x");
  EXPECT_EQ(p.mask_span, (CharSpan{0, 6}));
}

TEST(TemplateApply, NoTrimmingOrNormalization) {
  const auto p = parse_template("{input}{mask}").apply("  MiXeD\tcase ");
  EXPECT_EQ(p.text, "  MiXeD\tcase [MASK]");
}

TEST(TemplateApply, RejectsEmptyInputWrongArityAndMaskMarker) {
  const auto t = parse_template("{input} It is {mask}");
  EXPECT_THROW(t.apply(""), ContractError);
  EXPECT_THROW(t.apply("has [MASK] inside"), ContractError);
  const std::vector<std::string> two{"a", "b"};
  EXPECT_THROW(t.apply(two), ContractError);
}

TEST(TemplateApply, FuzzedInputsKeepExactlyOneMaskAndRoundTrip) {
  const std::vector<Template> templates{
      parse_template("{input} It is {mask}"), parse_template("{mask} {input}"),
      parse_template("Review: {input} Sentiment: {mask}."),
      parse_template("{input1} ? {mask} , {input2}")};
  const std::string alphabet = "ab {}[]MASK.,?\t";
  Rng rng(17);
  auto random_text = [&] {
    std::string s;
    const std::size_t n = 1 + rng.below(20);
    for (std::size_t i = 0; i < n; ++i) s += alphabet[rng.below(alphabet.size())];
    return s;
  };
  std::size_t checked = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto& t = templates[rng.below(templates.size())];
    std::vector<std::string> inputs;
    for (std::size_t i = 0; i < t.input_count(); ++i) inputs.push_back(random_text());
    bool contains_marker = false;
    for (const auto& in : inputs) contains_marker |= in.find("[MASK]") != std::string::npos;
    if (contains_marker) {
      EXPECT_THROW(t.apply(inputs), ContractError);
      continue;
    }
    const auto p = t.apply(inputs);
    ++checked;
    ASSERT_EQ(count_mask(p.text), 1u) << p.text;
    EXPECT_EQ(p.text.substr(p.mask_span.begin, p.mask_span.end - p.mask_span.begin), "[MASK]");
    const auto back = t.strip_scaffold(p.text);
    ASSERT_TRUE(back.has_value()) << p.text;
    EXPECT_EQ(t.apply(*back).text, p.text);
    if (t.input_count() == 1) EXPECT_EQ((*back)[0], inputs[0]);
  }
  EXPECT_GT(checked, 1000u);
}

TEST(TemplateApply, DistinctPatternsGiveDistinctTexts) {
  const auto set = parse_template_set(
      "t0\t{input} It is {mask}\nt1\t{input} All in all it was {mask}\nt2\t{mask} : {input}\n",
      "set");
  for (const char* raw : {"good", "a b c", "x"}) {
    for (std::size_t i = 0; i < set.size(); ++i)
      for (std::size_t j = i + 1; j < set.size(); ++j)
        EXPECT_NE(set[i].apply(raw).text, set[j].apply(raw).text);
  }
}

TEST(TemplateApply, StripScaffoldRejectsForeignText) {
  const auto t = parse_template("{input} It is {mask}");
  EXPECT_FALSE(t.strip_scaffold("something else").has_value());
  EXPECT_FALSE(t.strip_scaffold(" It is [MASK]").has_value());
}

TEST(TemplateSet, ParsesTwoLinesInOrder) {
  const auto set = parse_template_set(
      "# comment\nt0\t{input} It is {mask}\n\nt1\t{input} All in all it was {mask}\n", "f");
  ASSERT_EQ(set.size(), 2u);
  EXPECT_EQ(set[0], parse_template("{input} It is {mask}", "t0"));
  EXPECT_EQ(set[1], parse_template("{input} All in all it was {mask}", "t1"));
  EXPECT_FALSE(set[0] == set[1]);
}

TEST(TemplateSet, LoadErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& body) -> std::size_t {
    try {
      parse_template_set(body, "f");
    } catch (const LoadError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of(""), 1u);
  EXPECT_EQ(line_of("# only comments\n"), 1u);
  EXPECT_EQ(line_of("t0\t{input} {mask}\nno tab here\n"), 2u);
  EXPECT_EQ(line_of("t0\t{input} {mask}\nt0\t{mask} {input}\n"), 2u);
  EXPECT_EQ(line_of("t0\t{input} {mask}\n\nt1\t{input}\n"), 3u);
}

TEST(TemplateSet, LoadsFromFile) {
  const auto dir = testing::scratch_dir("templates");
  testing::write_text(dir / "t.tsv", "t0\t{input} It is {mask}\nt1\t{input} All in all it was {mask}\n");
  const auto set = load_template_set(dir / "t.tsv");
  ASSERT_EQ(set.size(), 2u);
  EXPECT_EQ(set.front().id(), "t0");
  EXPECT_THROW(load_template_set(dir / "missing.tsv"), DataError);
}

}  // namespace
}  // namespace consprompt
