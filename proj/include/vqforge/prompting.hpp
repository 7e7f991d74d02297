#pragma once

// Few-shot repair prompts and code extraction from model responses.
//
// Prompt layout, one block per exemplar followed by the subject block:
//
//   <CODE>
//   ...code...
//   <QUESTION>
//   ...one question per line...
//   <CORRECTION>
//   ...corrected code...
//
// The subject block ends right after the `<CORRECTION>` tag line.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vqforge/code_model.hpp"
#include "vqforge/vq_engine.hpp"

namespace vqforge {

inline constexpr std::string_view kCodeTag = "<CODE>";
inline constexpr std::string_view kQuestionTag = "<QUESTION>";
inline constexpr std::string_view kCorrectionTag = "<CORRECTION>";

inline constexpr std::string_view kGeneralQuestion = "Can you improve this code or correct its bugs please ?";

inline constexpr std::string_view kSystemPreamble =
    "You repair Python code. Each <CODE> block is followed by verification questions under <QUESTION> "
    "and the corrected code under <CORRECTION>. Complete the last <CORRECTION>: reply with the full "
    "corrected code only, in a single fenced code block.";

struct FewShotExemplar {
    SourceText code;
    std::vector<std::string> questions;  // one line each
    SourceText correction;

    /// Throws InvalidInput if there are no questions or a question is empty or
    /// spans lines, SyntaxError if the correction does not parse.
    void validate() const;
};

struct RepairPrompt {
    std::string system_preamble;
    std::vector<FewShotExemplar> exemplars;
    SourceText subject_code;
    std::vector<std::string> subject_questions;
    std::string rendered;
};

/// One `<CODE>/<QUESTION>/<CORRECTION>` block as parsed back from text.
/// `correction` is absent when the block ends at the open correction tag.
struct TaggedBlock {
    std::string code;
    std::vector<std::string> questions;
    std::optional<std::string> correction;
};

std::string render_exemplar(const FewShotExemplar& ex);
std::string render_exemplars(const std::vector<FewShotExemplar>& exemplars);

/// Splits text on exact tag lines. Throws InvalidInput on a malformed layout.
std::vector<TaggedBlock> parse_tagged(std::string_view text);

/// Reads an exemplar file in the tag layout; every block must be closed.
std::vector<FewShotExemplar> load_exemplars(const std::filesystem::path& path);

/// Rotates exemplars left by `seed mod n`, giving each run seed a fixed order.
std::vector<FewShotExemplar> order_exemplars(std::vector<FewShotExemplar> exemplars, std::int64_t seed);

/// Throws EmptyChain if `chain` has no questions.
RepairPrompt build_repair_prompt(const std::vector<FewShotExemplar>& exemplars, const SourceText& subject,
                                 const VQChain& chain);

/// Subject block with the single general question and no exemplars.
RepairPrompt build_general_prompt(const SourceText& subject);

/// Returns, by priority: the last parseable fenced block, the text after the
/// last `<CORRECTION>` tag, or the longest line-aligned suffix that parses.
/// Leading and trailing blank lines are removed. Throws NoCodeFound.
SourceText extract_code(std::string_view response);

std::string wrap_in_fence(std::string_view code);

/// Drops leading and trailing whitespace-only lines, and the final newline.
std::string trim_blank_lines(std::string_view text);

}  // namespace vqforge
