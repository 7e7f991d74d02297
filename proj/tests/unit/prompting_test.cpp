#include <gtest/gtest.h>

#include "support.hpp"
#include "vqforge/prompting.hpp"

namespace vqforge {
namespace {

using testing::data_dir;
using testing::fixture_dir;
using testing::read_file;
using testing::read_json;
using testing::shipped_data_dir;
using testing::TempDir;
using testing::write_file;

std::size_t occurrences(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + needle.size())) ++n;
    return n;
}

VQChain two_question_chain() {
    VQChain chain;
    chain.questions.push_back({BugPattern::WrongAttribute, "Check matched_pubdate.first(), pubdate.strip().", {}});
    chain.questions.push_back({BugPattern::HallucinatedObject, "Is get_element_text() defined?", {}});
    return chain;
}

SourceText match_pubdate() {
    return SourceText(read_file(fixture_dir() / "replay/samples/match_pubdate.py"), "match_pubdate.py");
}

TEST(Exemplars, ShippedFileLoadsAndValidates) {
    auto exemplars = load_exemplars(shipped_data_dir() / "exemplars.txt");
    ASSERT_EQ(exemplars.size(), 2u);
    for (const auto& ex : exemplars) {
        EXPECT_NO_THROW(ex.validate());
        EXPECT_FALSE(ex.questions.empty());
    }
}

TEST(Exemplars, ValidationErrors) {
    FewShotExemplar ex{SourceText("x = 1", "a"), {}, SourceText("x = 2", "b")};
    EXPECT_THROW(ex.validate(), InvalidInput);
    ex.questions = {"two\nlines"};
    EXPECT_THROW(ex.validate(), InvalidInput);
    ex.questions = {""};
    EXPECT_THROW(ex.validate(), InvalidInput);
    ex.questions = {"fine"};
    EXPECT_NO_THROW(ex.validate());
    FewShotExemplar broken{SourceText("x = 1", "a"), {"q"}, SourceText("def f(:", "b")};
    EXPECT_THROW(broken.validate(), SyntaxError);
}

TEST(Exemplars, OpenBlockRejectedOnLoad) {
    TempDir dir;
    write_file(dir / "ex.txt", "<CODE>\nx = 1\n<QUESTION>\nq\n<CORRECTION>\n");
    EXPECT_THROW(load_exemplars(dir / "ex.txt"), InvalidInput);
}

TEST(Exemplars, RotationBySeed) {
    auto exemplars = load_exemplars(shipped_data_dir() / "exemplars.txt");
    auto same = order_exemplars(exemplars, 2);
    auto rotated = order_exemplars(exemplars, 1);
    EXPECT_EQ(same[0].code, exemplars[0].code);
    EXPECT_EQ(rotated[0].code, exemplars[1].code);
    EXPECT_EQ(order_exemplars(exemplars, -1)[0].code, exemplars[1].code);
}

TEST(RepairPromptTest, TwoExemplarsAndSubject) {
    auto exemplars = load_exemplars(shipped_data_dir() / "exemplars.txt");
    auto chain = two_question_chain();
    auto prompt = build_repair_prompt(exemplars, match_pubdate(), chain);
    EXPECT_EQ(occurrences(prompt.rendered, "<CODE>\n"), 3u);
    for (const auto& q : chain.texts()) EXPECT_EQ(occurrences(prompt.rendered, q), 1u);
    EXPECT_LT(prompt.rendered.find(chain.questions[0].text), prompt.rendered.find(chain.questions[1].text));
    const std::string tail = "<CORRECTION>\n";
    EXPECT_EQ(prompt.rendered.substr(prompt.rendered.size() - tail.size()), tail);

    auto blocks = parse_tagged(prompt.rendered);
    ASSERT_EQ(blocks.size(), 3u);
    EXPECT_EQ(blocks.back().code, match_pubdate().content());
    EXPECT_EQ(blocks.back().questions, chain.texts());
    EXPECT_FALSE(blocks.back().correction.has_value());
}

TEST(RepairPromptTest, NoExemplars) {
    auto prompt = build_repair_prompt({}, match_pubdate(), two_question_chain());
    EXPECT_EQ(occurrences(prompt.rendered, "<CODE>\n"), 1u);
}

TEST(RepairPromptTest, EmptyChainRejected) {
    EXPECT_THROW(build_repair_prompt({}, match_pubdate(), VQChain{}), EmptyChain);
}

TEST(RepairPromptTest, Deterministic) {
    auto exemplars = load_exemplars(shipped_data_dir() / "exemplars.txt");
    EXPECT_EQ(build_repair_prompt(exemplars, match_pubdate(), two_question_chain()).rendered,
              build_repair_prompt(exemplars, match_pubdate(), two_question_chain()).rendered);
}

TEST(GeneralPrompt, SoleVerbatimQuestion) {
    auto prompt = build_general_prompt(match_pubdate());
    EXPECT_EQ(prompt.subject_questions, (std::vector<std::string>{"Can you improve this code or correct its bugs please ?"}));
    auto blocks = parse_tagged(prompt.rendered);
    ASSERT_EQ(blocks.size(), 1u);
    EXPECT_EQ(blocks[0].questions, prompt.subject_questions);
    for (const char* rendering : {"matched_pubdate.first()", "pubdate.strip()", "get_element_text()"}) {
        EXPECT_EQ(blocks[0].questions[0].find(rendering), std::string::npos);
    }
}

TEST(GeneralPrompt, EmptyCode) {
    auto prompt = build_general_prompt(SourceText("", "empty.py"));
    auto blocks = parse_tagged(prompt.rendered);
    ASSERT_EQ(blocks.size(), 1u);
    EXPECT_EQ(blocks[0].code, "");
}

TEST(ParseTagged, ExemplarRoundTripIsByteExact) {
    std::vector<FewShotExemplar> exemplars{
        {SourceText("x = 1\n\n", "a"), {"q1", "q2 with  spaces "}, SourceText("x = 2\n", "a:c")},
        {SourceText("\tif y:\r\n\t\tpass", "b"), {" "}, SourceText("", "b:c")},
        {SourceText("", "c"), {"only"}, SourceText("\n\nz = 3", "c:c")},
    };
    for (const auto& ex : load_exemplars(shipped_data_dir() / "exemplars.txt")) exemplars.push_back(ex);
    auto blocks = parse_tagged(render_exemplars(exemplars));
    ASSERT_EQ(blocks.size(), exemplars.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        EXPECT_EQ(blocks[i].code, exemplars[i].code.content()) << i;
        EXPECT_EQ(blocks[i].questions, exemplars[i].questions) << i;
        ASSERT_TRUE(blocks[i].correction.has_value());
        EXPECT_EQ(*blocks[i].correction, exemplars[i].correction.content()) << i;
    }
}

TEST(ParseTagged, MalformedLayouts) {
    EXPECT_THROW(parse_tagged("prose\n<CODE>\nx\n"), InvalidInput);
    EXPECT_THROW(parse_tagged("<QUESTION>\nq\n"), InvalidInput);
    EXPECT_THROW(parse_tagged("<CODE>\nx\n<CORRECTION>\n"), InvalidInput);
    EXPECT_THROW(parse_tagged("<CODE>\nx\n"), InvalidInput);
    EXPECT_TRUE(parse_tagged("").empty());
}

TEST(ExtractCode, FencedBlock) {
    EXPECT_EQ(extract_code("Here is the fix:\n```\ndef f():\n    return 2\n```").content(), "def f():\n    return 2");
}

TEST(ExtractCode, AfterCorrectionTag) {
    EXPECT_EQ(extract_code("<CORRECTION>\ndef g(): pass").content(), "def g(): pass");
}

TEST(ExtractCode, ProseOnly) { EXPECT_THROW(extract_code("I cannot repair this."), NoCodeFound); }

TEST(ExtractCode, LastParseableFenceWins) {
    std::string response = "```python\nx = 1\n```\ntext\n```\ny = 2\n```\n```\nnot python (\n```\n";
    EXPECT_EQ(extract_code(response).content(), "y = 2");
}

TEST(ExtractCode, UnterminatedFence) {
    EXPECT_EQ(extract_code("Sure:\n```python\nz = 3\n").content(), "z = 3");
}

TEST(ExtractCode, BareCodeSuffix) {
    EXPECT_EQ(extract_code("The fixed code is below.\ndef h():\n    return 4\n").content(), "def h():\n    return 4");
}

TEST(ExtractCode, WrapRoundTripOnCorpus) {
    std::size_t checked = 0;
    for (const char* file : {"ast_spans.json", "localizer_corpus.json", "passthrough_corpus.json"}) {
        const auto corpus = read_json(data_dir() / file);
        for (const auto& c : corpus["cases"]) {
            std::string code = trim_blank_lines(c["source"].get<std::string>());
            if (code.empty() || code.find("```") != std::string::npos) continue;
            EXPECT_EQ(extract_code(wrap_in_fence(code)).content(), code);
            ++checked;
        }
    }
    EXPECT_GT(checked, 100u);
}

TEST(TrimBlankLines, DropsOuterBlankLines) {
    EXPECT_EQ(trim_blank_lines("\n  \nx = 1\n\ny = 2\n \n"), "x = 1\n\ny = 2");
    EXPECT_EQ(trim_blank_lines("x = 1\r\n"), "x = 1");
    EXPECT_EQ(trim_blank_lines(" \n\t\n"), "");
}

}  // namespace
}  // namespace vqforge
