#include "lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>

namespace vqforge::detail {

bool is_identifier_start(unsigned char c) noexcept {
    return std::isalpha(c) || c == '_' || c >= 0x80;
}

bool is_identifier_char(unsigned char c) noexcept {
    return std::isalnum(c) || c == '_' || c >= 0x80;
}

namespace {

bool is_string_prefix(std::string_view word) {
    if (word.size() > 2) return false;
    std::string lower;
    for (char c : word) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    static constexpr std::array<std::string_view, 8> prefixes{"r", "u", "b", "f", "br", "rb", "fr", "rf"};
    return std::find(prefixes.begin(), prefixes.end(), lower) != prefixes.end();
}

// Longest first within each length class.
constexpr std::array<std::string_view, 3> ops3{"**=", "//=", ">>="};
constexpr std::array<std::string_view, 2> ops3b{"<<=", "..."};
constexpr std::array<std::string_view, 20> ops2{"->", ":=", "**", "//", "<<", ">>", "<=", ">=", "==", "!=",
                                                "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", "<>"};
constexpr std::string_view ops1 = "+-*/%@&|^~<>()[]{},:;.=!";

}  // namespace

Lexer::Lexer(const SourceText& src, std::uint32_t begin, std::uint32_t end, Mode mode)
    : src_(src), text_(src.content()), pos_(begin), end_(end), mode_(mode) {
    if (mode_ == Mode::Statements && begin == 0 && text_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;
    if (mode_ == Mode::Expression) at_line_start_ = false;
}

void Lexer::fail(const char* reason, std::uint32_t offset) const {
    auto loc = src_.location(offset);
    throw SyntaxError(reason, loc.line, loc.column);
}

void Lexer::push(TokKind kind, std::uint32_t b, std::uint32_t e) {
    out_.push_back(Token{kind, b, e, text_.substr(b, e - b)});
}

void Lexer::handle_line_start() {
    for (;;) {
        std::uint32_t line_begin = pos_;
        int col = 0;
        while (pos_ < end_) {
            char c = text_[pos_];
            if (c == ' ') {
                ++col;
            } else if (c == '\t') {
                col = (col / 8 + 1) * 8;
            } else if (c == '\f') {
                col = 0;
            } else {
                break;
            }
            ++pos_;
        }
        if (pos_ >= end_) return;
        char c = text_[pos_];
        if (c == '#' || c == '\n' || c == '\r') {
            while (pos_ < end_ && text_[pos_] != '\n' && text_[pos_] != '\r') ++pos_;
            if (pos_ < end_ && text_[pos_] == '\r') ++pos_;
            if (pos_ < end_ && text_[pos_] == '\n') ++pos_;
            continue;
        }
        if (c == '\\' && pos_ + 1 < end_ && (text_[pos_ + 1] == '\n' || text_[pos_ + 1] == '\r')) {
            // A continuation on an otherwise empty line joins with the next line.
            pos_ += 2;
            if (text_[pos_ - 1] == '\r' && pos_ < end_ && text_[pos_] == '\n') ++pos_;
            continue;
        }
        if (col > indents_.back()) {
            indents_.push_back(col);
            push(TokKind::Indent, line_begin, pos_);
        } else {
            while (col < indents_.back()) {
                indents_.pop_back();
                push(TokKind::Dedent, pos_, pos_);
            }
            if (col != indents_.back()) fail("unindent does not match any outer indentation level", pos_);
        }
        return;
    }
}

std::vector<Token> Lexer::tokenize() {
    const bool statements = mode_ == Mode::Statements;
    while (pos_ < end_) {
        if (statements && at_line_start_ && depth_ == 0) {
            handle_line_start();
            at_line_start_ = false;
            if (pos_ >= end_) break;
        }
        unsigned char c = static_cast<unsigned char>(text_[pos_]);
        if (c == ' ' || c == '\t' || c == '\f') {
            ++pos_;
        } else if (c == '#') {
            while (pos_ < end_ && text_[pos_] != '\n' && text_[pos_] != '\r') ++pos_;
        } else if (c == '\n' || c == '\r') {
            std::uint32_t b = pos_++;
            if (c == '\r' && pos_ < end_ && text_[pos_] == '\n') ++pos_;
            if (statements && depth_ == 0) {
                push(TokKind::Newline, b, pos_);
                at_line_start_ = true;
            }
        } else if (c == '\\') {
            if (pos_ + 1 >= end_) fail("unexpected EOF while parsing", pos_);
            char n = text_[pos_ + 1];
            if (n != '\n' && n != '\r') fail("unexpected character after line continuation character", pos_);
            pos_ += 2;
            if (n == '\r' && pos_ < end_ && text_[pos_] == '\n') ++pos_;
            if (pos_ >= end_) fail("unexpected EOF while parsing", pos_);
        } else if (is_identifier_start(c)) {
            lex_name_or_string();
        } else if (std::isdigit(c) ||
                   (c == '.' && pos_ + 1 < end_ && std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
            lex_number();
        } else if (c == '"' || c == '\'') {
            lex_string(pos_, pos_);
        } else {
            lex_operator();
        }
    }
    if (!brackets_.empty()) {
        static constexpr const char* messages[] = {"'(' was never closed", "'[' was never closed",
                                                   "'{' was never closed"};
        char open = brackets_.back().first;
        fail(messages[open == '(' ? 0 : open == '[' ? 1 : 2], brackets_.back().second);
    }
    if (statements) {
        if (!out_.empty() && out_.back().kind != TokKind::Newline && out_.back().kind != TokKind::Dedent) {
            push(TokKind::Newline, end_, end_);
        }
        while (indents_.size() > 1) {
            indents_.pop_back();
            push(TokKind::Dedent, end_, end_);
        }
    }
    push(TokKind::EndMarker, end_, end_);
    return std::move(out_);
}

void Lexer::lex_name_or_string() {
    std::uint32_t start = pos_;
    while (pos_ < end_ && is_identifier_char(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ < end_ && (text_[pos_] == '"' || text_[pos_] == '\'') &&
        is_string_prefix(text_.substr(start, pos_ - start))) {
        lex_string(start, pos_);
        return;
    }
    push(TokKind::Name, start, pos_);
}

void Lexer::lex_number() {
    std::uint32_t start = pos_;
    auto digit_run = [&](auto pred) {
        while (pos_ < end_ && (pred(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    };
    auto is_dec = [](unsigned char ch) { return std::isdigit(ch) != 0; };
    if (text_[pos_] == '0' && pos_ + 1 < end_ && std::strchr("xXoObB", text_[pos_ + 1]) != nullptr) {
        pos_ += 2;
        digit_run([](unsigned char ch) { return std::isxdigit(ch) != 0; });
    } else {
        digit_run(is_dec);
        if (pos_ < end_ && text_[pos_] == '.') {
            ++pos_;
            digit_run(is_dec);
        }
        if (pos_ < end_ && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::uint32_t save = pos_++;
            if (pos_ < end_ && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (pos_ < end_ && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                digit_run(is_dec);
            } else {
                pos_ = save;
            }
        }
        if (pos_ < end_ && (text_[pos_] == 'j' || text_[pos_] == 'J')) ++pos_;
    }
    push(TokKind::Number, start, pos_);
}

void Lexer::lex_string(std::uint32_t start, std::uint32_t quote_pos) {
    const char q = text_[quote_pos];
    const bool triple = quote_pos + 2 < end_ && text_[quote_pos + 1] == q && text_[quote_pos + 2] == q;
    pos_ = quote_pos + (triple ? 3 : 1);
    for (;;) {
        if (pos_ >= end_) {
            fail(triple ? "unterminated triple-quoted string literal" : "unterminated string literal", start);
        }
        char c = text_[pos_];
        if (c == '\\') {
            pos_ += 2;
            if (pos_ <= end_ && text_[pos_ - 1] == '\r' && pos_ < end_ && text_[pos_] == '\n') ++pos_;
            continue;
        }
        if (!triple && (c == '\n' || c == '\r')) fail("unterminated string literal", start);
        if (c == q) {
            if (!triple) {
                ++pos_;
                break;
            }
            if (pos_ + 2 < end_ && text_[pos_ + 1] == q && text_[pos_ + 2] == q) {
                pos_ += 3;
                break;
            }
        }
        ++pos_;
    }
    if (pos_ > end_) fail("unterminated string literal", start);
    push(TokKind::String, start, pos_);
}

void Lexer::lex_operator() {
    auto rest = text_.substr(pos_, end_ - pos_);
    std::size_t len = 0;
    for (auto op : ops3)
        if (rest.substr(0, 3) == op) len = 3;
    for (auto op : ops3b)
        if (len == 0 && rest.substr(0, 3) == op) len = 3;
    if (len == 0)
        for (auto op : ops2)
            if (rest.substr(0, 2) == op) len = 2;
    if (len == 0 && ops1.find(rest[0]) != std::string_view::npos) len = 1;
    if (len == 0) fail("invalid character in identifier", pos_);
    if (rest.substr(0, len) == "<>") fail("invalid syntax", pos_);

    char c = rest[0];
    if (len == 1) {
        if (c == '(' || c == '[' || c == '{') {
            brackets_.emplace_back(c, pos_);
            ++depth_;
        } else if (c == ')' || c == ']' || c == '}') {
            char want = c == ')' ? '(' : c == ']' ? '[' : '{';
            if (brackets_.empty()) fail("unmatched closing bracket", pos_);
            if (brackets_.back().first != want) fail("closing bracket does not match opening bracket", pos_);
            brackets_.pop_back();
            --depth_;
        }
    }
    push(TokKind::Op, pos_, pos_ + static_cast<std::uint32_t>(len));
    pos_ += static_cast<std::uint32_t>(len);
}

}  // namespace vqforge::detail
