#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "vqforge/code_model.hpp"

namespace vqforge::detail {

enum class TokKind : std::uint8_t { Name, Number, String, Op, Newline, Indent, Dedent, EndMarker };

struct Token {
    TokKind kind;
    std::uint32_t begin;
    std::uint32_t end;
    std::string_view text;
};

/// Tokenizes `src[begin, end)`. In statement mode the lexer produces
/// NEWLINE/INDENT/DEDENT; in expression mode (f-string replacement fields)
/// the whole range behaves as if it were inside brackets.
class Lexer {
public:
    enum class Mode { Statements, Expression };

    Lexer(const SourceText& src, std::uint32_t begin, std::uint32_t end, Mode mode);

    std::vector<Token> tokenize();

private:
    [[noreturn]] void fail(const char* reason, std::uint32_t offset) const;

    void handle_line_start();
    void lex_name_or_string();
    void lex_number();
    void lex_string(std::uint32_t start, std::uint32_t quote_pos);
    void lex_operator();
    void push(TokKind kind, std::uint32_t b, std::uint32_t e);

    const SourceText& src_;
    std::string_view text_;
    std::uint32_t pos_;
    std::uint32_t end_;
    Mode mode_;
    int depth_ = 0;
    bool at_line_start_ = true;
    std::vector<int> indents_{0};
    std::vector<std::pair<char, std::uint32_t>> brackets_;
    std::vector<Token> out_;
};

bool is_identifier_start(unsigned char c) noexcept;
bool is_identifier_char(unsigned char c) noexcept;

}  // namespace vqforge::detail
