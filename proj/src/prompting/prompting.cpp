#include "vqforge/prompting.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace vqforge {

namespace {

bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f'; });
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += '\n';
        out += lines[i];
    }
    return out;
}

std::string subject_block(const SourceText& subject, const std::vector<std::string>& questions) {
    std::string out;
    out += kCodeTag;
    out += '\n';
    out += subject.content();
    out += '\n';
    out += kQuestionTag;
    out += '\n';
    out += join_lines(questions);
    out += '\n';
    out += kCorrectionTag;
    out += '\n';
    return out;
}

struct Line {
    std::size_t begin;
    std::size_t end;  // excludes the newline
};

std::vector<Line> split_lines(std::string_view text) {
    std::vector<Line> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.push_back({start, text.size()});
            break;
        }
        lines.push_back({start, nl});
        start = nl + 1;
    }
    return lines;
}

std::optional<std::string> parseable(std::string_view candidate) {
    std::string trimmed = trim_blank_lines(candidate);
    if (trimmed.empty() || !parses(trimmed)) return std::nullopt;
    return trimmed;
}

bool is_fence(std::string_view line) {
    auto first = line.find_first_not_of(" \t");
    return first != std::string_view::npos && first <= 3 && line.substr(first, 3) == "```";
}

}  // namespace

void FewShotExemplar::validate() const {
    if (questions.empty()) throw InvalidInput("exemplar '" + code.origin() + "' has no questions");
    for (const auto& q : questions) {
        if (q.empty()) throw InvalidInput("exemplar '" + code.origin() + "' has an empty question");
        if (q.find('\n') != std::string::npos) throw InvalidInput("exemplar question spans several lines: " + q);
    }
    parse_source(correction);
}

std::string render_exemplar(const FewShotExemplar& ex) {
    std::string out = subject_block(ex.code, ex.questions);
    out += ex.correction.content();
    out += '\n';
    return out;
}

std::string render_exemplars(const std::vector<FewShotExemplar>& exemplars) {
    std::string out;
    for (const auto& ex : exemplars) out += render_exemplar(ex);
    return out;
}

std::vector<TaggedBlock> parse_tagged(std::string_view text) {
    // Each section's content runs from after its tag line up to, but not
    // including, the newline before the next tag line.
    enum class Section { None, Code, Question, Correction };
    std::vector<TaggedBlock> blocks;
    Section section = Section::None;
    std::size_t content_begin = 0;

    auto close = [&](std::size_t content_end) {
        std::string content(content_end > content_begin ? text.substr(content_begin, content_end - content_begin)
                                                         : std::string_view{});
        switch (section) {
            case Section::Code:
                blocks.back().code = std::move(content);
                break;
            case Section::Question: {
                std::vector<std::string> qs;
                std::istringstream in(content);
                for (std::string line; std::getline(in, line);) qs.push_back(line);
                blocks.back().questions = std::move(qs);
                break;
            }
            case Section::Correction:
                blocks.back().correction = std::move(content);
                break;
            case Section::None:
                break;
        }
    };

    for (const Line& line : split_lines(text)) {
        std::string_view body = text.substr(line.begin, line.end - line.begin);
        Section next;
        if (body == kCodeTag) {
            next = Section::Code;
        } else if (body == kQuestionTag) {
            next = Section::Question;
        } else if (body == kCorrectionTag) {
            next = Section::Correction;
        } else {
            if (section == Section::None && !is_blank(body)) {
                throw InvalidInput("text before the first " + std::string(kCodeTag) + " tag");
            }
            continue;
        }
        bool expected = (next == Section::Code && (section == Section::None || section == Section::Correction)) ||
                        (next == Section::Question && section == Section::Code) ||
                        (next == Section::Correction && section == Section::Question);
        if (!expected) throw InvalidInput("unexpected tag " + std::string(body));
        if (section != Section::None) close(line.begin > 0 ? line.begin - 1 : 0);
        if (next == Section::Code) blocks.emplace_back();
        section = next;
        content_begin = std::min(line.end + 1, text.size());
    }
    if (section == Section::Code || section == Section::Question) throw InvalidInput("truncated tagged block");
    if (section == Section::Correction) {
        // Serialization ends a closed block with a newline; an open block has
        // nothing after its tag line.
        if (content_begin < text.size()) {
            std::size_t end = text.size();
            if (text[end - 1] == '\n') --end;
            close(end);
        }
    }
    return blocks;
}

std::vector<FewShotExemplar> load_exemplars(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read exemplar file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::vector<FewShotExemplar> out;
    std::size_t index = 0;
    for (auto& block : parse_tagged(buf.str())) {
        ++index;
        const std::string origin = path.string() + "#" + std::to_string(index);
        if (!block.correction) throw InvalidInput("exemplar " + origin + " has no correction");
        FewShotExemplar ex{SourceText(std::move(block.code), origin), std::move(block.questions),
                           SourceText(std::move(*block.correction), origin + ":correction")};
        ex.validate();
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<FewShotExemplar> order_exemplars(std::vector<FewShotExemplar> exemplars, std::int64_t seed) {
    if (exemplars.size() < 2) return exemplars;
    auto n = static_cast<std::int64_t>(exemplars.size());
    auto shift = ((seed % n) + n) % n;
    std::rotate(exemplars.begin(), exemplars.begin() + shift, exemplars.end());
    return exemplars;
}

RepairPrompt build_repair_prompt(const std::vector<FewShotExemplar>& exemplars, const SourceText& subject,
                                 const VQChain& chain) {
    if (chain.empty()) throw EmptyChain("cannot build a repair prompt from an empty chain");
    RepairPrompt p{std::string(kSystemPreamble), exemplars, subject, chain.texts(), {}};
    p.rendered = render_exemplars(exemplars) + subject_block(subject, p.subject_questions);
    return p;
}

RepairPrompt build_general_prompt(const SourceText& subject) {
    RepairPrompt p{std::string(kSystemPreamble), {}, subject, {std::string(kGeneralQuestion)}, {}};
    p.rendered = subject_block(subject, p.subject_questions);
    return p;
}

std::string trim_blank_lines(std::string_view text) {
    auto lines = split_lines(text);
    std::size_t first = 0;
    while (first < lines.size() && is_blank(text.substr(lines[first].begin, lines[first].end - lines[first].begin))) {
        ++first;
    }
    if (first == lines.size()) return {};
    std::size_t last = lines.size() - 1;
    while (is_blank(text.substr(lines[last].begin, lines[last].end - lines[last].begin))) --last;
    std::size_t end = lines[last].end;
    if (end > lines[last].begin && text[end - 1] == '\r') --end;
    return std::string(text.substr(lines[first].begin, end - lines[first].begin));
}

SourceText extract_code(std::string_view response) {
    const std::string origin = "<response>";
    auto lines = split_lines(response);

    // Fenced blocks; an unterminated final fence runs to the end of the text.
    std::vector<std::pair<std::size_t, std::size_t>> blocks;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view body = response.substr(lines[i].begin, lines[i].end - lines[i].begin);
        if (!is_fence(body)) continue;
        std::size_t begin = std::min(lines[i].end + 1, response.size());
        std::size_t j = i + 1;
        while (j < lines.size() && !is_fence(response.substr(lines[j].begin, lines[j].end - lines[j].begin))) ++j;
        std::size_t end = j < lines.size() ? lines[j].begin : response.size();
        blocks.emplace_back(begin, std::max(begin, end));
        i = j;
    }
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
        if (auto code = parseable(response.substr(it->first, it->second - it->first))) {
            return SourceText(std::move(*code), origin);
        }
    }

    if (auto tag = response.rfind(kCorrectionTag); tag != std::string_view::npos) {
        if (auto code = parseable(response.substr(tag + kCorrectionTag.size()))) return SourceText(std::move(*code), origin);
    }

    for (const Line& line : lines) {
        if (auto code = parseable(response.substr(line.begin))) return SourceText(std::move(*code), origin);
    }
    throw NoCodeFound("no parseable code in response");
}

std::string wrap_in_fence(std::string_view code) {
    std::string out = "```python\n";
    out += code;
    if (!code.empty() && code.back() != '\n') out += '\n';
    out += "```\n";
    return out;
}

}  // namespace vqforge
