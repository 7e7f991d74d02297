// Recursive-descent parser for Python 3.8+ statements and expressions.

#include <algorithm>
#include <array>
#include <cctype>

#include "lexer.hpp"
#include "vqforge/code_model.hpp"

namespace vqforge {
namespace detail {
namespace {

constexpr std::array<std::string_view, 35> kKeywords{
    "False",  "None",   "True",    "and",      "as",   "assert", "async",  "await", "break",
    "class",  "continue", "def",   "del",      "elif", "else",   "except", "finally", "for",
    "from",   "global", "if",      "import",   "in",   "is",     "lambda", "nonlocal", "not",
    "or",     "pass",   "raise",   "return",   "try",  "while",  "with",   "yield"};

bool is_keyword(std::string_view word) {
    return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

constexpr std::array<std::string_view, 13> kAugAssign{"+=", "-=", "*=",  "/=",  "//=", "%=", "@=",
                                                      "&=", "|=", "^=", ">>=", "<<=", "**="};

class Parser {
public:
    Parser(const SourceText& src, std::vector<Token> toks) : src_(src), toks_(std::move(toks)) {}

    Node parse_module() {
        Node mod;
        mod.kind = NodeKind::Module;
        mod.span = Span{0, static_cast<std::uint32_t>(src_.size())};
        while (peek().kind != TokKind::EndMarker) {
            if (peek().kind == TokKind::Newline) {
                advance();
                continue;
            }
            statement(mod.children);
        }
        return mod;
    }

    // Body of an f-string replacement field.
    Node parse_field_expression() {
        Node e = at_kw("yield") ? yield_expr() : star_expressions();
        if (peek().kind != TokKind::EndMarker) fail("f-string: invalid syntax");
        return e;
    }

private:
    // --- token helpers -----------------------------------------------------

    const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    const Token& advance() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

    bool at_op(std::string_view op, std::size_t k = 0) const {
        const Token& t = peek(k);
        return t.kind == TokKind::Op && t.text == op;
    }
    bool at_kw(std::string_view kw, std::size_t k = 0) const {
        const Token& t = peek(k);
        return t.kind == TokKind::Name && t.text == kw;
    }
    bool at_name(std::size_t k = 0) const {
        const Token& t = peek(k);
        return t.kind == TokKind::Name && !is_keyword(t.text);
    }
    bool at_simple_end() const {
        auto k = peek().kind;
        return k == TokKind::Newline || k == TokKind::EndMarker || at_op(";");
    }
    bool starts_expression() const {
        const Token& t = peek();
        switch (t.kind) {
            case TokKind::Number:
            case TokKind::String:
                return true;
            case TokKind::Name:
                return !is_keyword(t.text) || t.text == "not" || t.text == "lambda" || t.text == "await" ||
                       t.text == "None" || t.text == "True" || t.text == "False";
            case TokKind::Op:
                return t.text == "(" || t.text == "[" || t.text == "{" || t.text == "-" || t.text == "+" ||
                       t.text == "~" || t.text == "*" || t.text == "...";
            default:
                return false;
        }
    }
    bool at_comprehension() const { return at_kw("for") || (at_kw("async") && at_kw("for", 1)); }

    [[noreturn]] void fail_at(std::uint32_t offset, const std::string& reason) const {
        auto loc = src_.location(offset);
        throw SyntaxError(reason, loc.line, loc.column);
    }
    [[noreturn]] void fail(const std::string& reason) const {
        const Token& t = peek();
        if (t.kind == TokKind::Indent) fail_at(t.end, "unexpected indent");
        fail_at(t.begin, reason);
    }

    const Token& expect_op(std::string_view op) {
        if (!at_op(op)) fail("expected '" + std::string(op) + "'");
        return advance();
    }
    const Token& expect_kw(std::string_view kw) {
        if (!at_kw(kw)) fail("expected '" + std::string(kw) + "'");
        return advance();
    }
    const Token& expect_name() {
        if (!at_name()) fail("invalid syntax");
        return advance();
    }

    Span span_from(std::size_t start_tok) const {
        std::size_t last = pos_ > start_tok ? pos_ - 1 : start_tok;
        return Span{toks_[start_tok].begin, toks_[last].end};
    }
    static Span tok_span(const Token& t) { return Span{t.begin, t.end}; }

    Node make(NodeKind kind, std::size_t start_tok) const {
        Node n;
        n.kind = kind;
        n.span = span_from(start_tok);
        return n;
    }
    static Node leaf(NodeKind kind, const Token& t) {
        Node n;
        n.kind = kind;
        n.span = tok_span(t);
        return n;
    }
    Node name_node(const Token& t, ExprContext ctx) const {
        Node n = leaf(NodeKind::Name, t);
        n.name = std::string(t.text);
        n.name_span = n.span;
        n.ctx = ctx;
        return n;
    }

    void set_context(Node& n, ExprContext ctx) const {
        switch (n.kind) {
            case NodeKind::Name:
            case NodeKind::Attribute:
            case NodeKind::Subscript:
                n.ctx = ctx;
                return;
            case NodeKind::Starred:
                n.ctx = ctx;
                set_context(n.children.front(), ctx);
                return;
            case NodeKind::Tuple:
            case NodeKind::List:
                n.ctx = ctx;
                for (auto& c : n.children) set_context(c, ctx);
                return;
            default:
                fail_at(n.span.begin, std::string(ctx == ExprContext::Del ? "cannot delete " : "cannot assign to ") +
                                          std::string(to_string(n.kind)));
        }
    }

    // --- statements --------------------------------------------------------

    void statement(std::vector<Node>& out) {
        const Token& t = peek();
        if (t.kind == TokKind::Indent) fail("unexpected indent");
        if (t.kind == TokKind::Dedent) fail("unexpected unindent");
        if (at_op("@")) {
            out.push_back(decorated());
            return;
        }
        if (t.kind == TokKind::Name) {
            std::size_t start = pos_;
            if (t.text == "def") return out.push_back(funcdef(start, {}));
            if (t.text == "class") return out.push_back(classdef(start, {}));
            if (t.text == "if") return out.push_back(if_stmt());
            if (t.text == "while") return out.push_back(while_stmt());
            if (t.text == "for") return out.push_back(for_stmt(start));
            if (t.text == "try") return out.push_back(try_stmt());
            if (t.text == "with") return out.push_back(with_stmt(start));
            if (t.text == "async") {
                if (at_kw("def", 1)) return out.push_back(funcdef(start, {}));
                if (at_kw("for", 1)) {
                    advance();
                    return out.push_back(for_stmt(start));
                }
                if (at_kw("with", 1)) {
                    advance();
                    return out.push_back(with_stmt(start));
                }
                fail("invalid syntax");
            }
            if (t.text == "match" && looks_like_match()) return out.push_back(match_stmt());
        }
        simple_stmts(out);
    }

    void simple_stmts(std::vector<Node>& out) {
        if (at_kw("type") && peek(1).kind == TokKind::Name && (at_op("=", 2) || at_op("[", 2))) {
            out.push_back(type_alias());
        } else {
            out.push_back(small_stmt());
        }
        while (at_op(";")) {
            advance();
            if (peek().kind == TokKind::Newline || peek().kind == TokKind::EndMarker) break;
            out.push_back(small_stmt());
        }
        if (peek().kind == TokKind::EndMarker) return;
        if (peek().kind != TokKind::Newline) fail("invalid syntax");
        advance();
    }

    void block(std::vector<Node>& out) {
        expect_op(":");
        if (peek().kind != TokKind::Newline) {
            simple_stmts(out);
            return;
        }
        advance();
        if (peek().kind != TokKind::Indent) fail("expected an indented block");
        advance();
        while (peek().kind != TokKind::Dedent && peek().kind != TokKind::EndMarker) statement(out);
        if (peek().kind == TokKind::Dedent) advance();
    }

    Node small_stmt() {
        std::size_t start = pos_;
        const Token& t = peek();
        if (t.kind == TokKind::Name) {
            auto w = t.text;
            if (w == "pass" || w == "break" || w == "continue") {
                advance();
                return leaf(w == "pass" ? NodeKind::Pass : w == "break" ? NodeKind::Break : NodeKind::Continue, t);
            }
            if (w == "return") {
                advance();
                Node n;
                n.kind = NodeKind::Return;
                if (!at_simple_end()) n.children.push_back(star_expressions());
                n.span = span_from(start);
                return n;
            }
            if (w == "raise") {
                advance();
                Node n;
                n.kind = NodeKind::Raise;
                if (!at_simple_end()) {
                    n.children.push_back(expression());
                    if (at_kw("from")) {
                        advance();
                        n.children.push_back(expression());
                    }
                }
                n.span = span_from(start);
                return n;
            }
            if (w == "global" || w == "nonlocal") {
                advance();
                Node n;
                n.kind = w == "global" ? NodeKind::GlobalDecl : NodeKind::NonlocalDecl;
                do {
                    if (at_op(",")) advance();
                    const Token& id = expect_name();
                    Node ident = leaf(NodeKind::Identifier, id);
                    ident.name = std::string(id.text);
                    ident.name_span = ident.span;
                    n.children.push_back(std::move(ident));
                } while (at_op(","));
                n.span = span_from(start);
                return n;
            }
            if (w == "del") {
                advance();
                Node n;
                n.kind = NodeKind::Delete;
                Node targets = star_expressions();
                if (targets.kind == NodeKind::Tuple && src_.content()[targets.span.begin] != '(') {
                    for (auto& c : targets.children) {
                        set_context(c, ExprContext::Del);
                        n.children.push_back(std::move(c));
                    }
                } else {
                    set_context(targets, ExprContext::Del);
                    n.children.push_back(std::move(targets));
                }
                n.span = span_from(start);
                return n;
            }
            if (w == "assert") {
                advance();
                Node n;
                n.kind = NodeKind::Assert;
                n.children.push_back(expression());
                if (at_op(",")) {
                    advance();
                    n.children.push_back(expression());
                }
                n.span = span_from(start);
                return n;
            }
            if (w == "import") return import_stmt();
            if (w == "from") return from_stmt();
        }
        return expr_stmt();
    }

    Node expr_stmt() {
        std::size_t start = pos_;
        Node first = at_kw("yield") ? yield_expr() : star_expressions();
        if (at_op(":")) {
            if (first.kind != NodeKind::Name && first.kind != NodeKind::Attribute && first.kind != NodeKind::Subscript) {
                fail_at(first.span.begin, "only single target (not tuple) can be annotated");
            }
            set_context(first, ExprContext::Store);
            advance();
            Node n;
            n.kind = NodeKind::AnnAssign;
            n.children.push_back(std::move(first));
            n.children.push_back(expression());
            if (at_op("=")) {
                advance();
                n.children.push_back(at_kw("yield") ? yield_expr() : star_expressions());
            }
            n.span = span_from(start);
            return n;
        }
        if (peek().kind == TokKind::Op &&
            std::find(kAugAssign.begin(), kAugAssign.end(), peek().text) != kAugAssign.end()) {
            if (first.kind != NodeKind::Name && first.kind != NodeKind::Attribute && first.kind != NodeKind::Subscript) {
                fail_at(first.span.begin, "illegal expression for augmented assignment");
            }
            set_context(first, ExprContext::Store);
            Node n;
            n.kind = NodeKind::AugAssign;
            n.name = std::string(advance().text);
            n.children.push_back(std::move(first));
            n.children.push_back(at_kw("yield") ? yield_expr() : star_expressions());
            n.span = span_from(start);
            return n;
        }
        if (at_op("=")) {
            Node n;
            n.kind = NodeKind::Assign;
            n.children.push_back(std::move(first));
            while (at_op("=")) {
                advance();
                n.children.push_back(at_kw("yield") ? yield_expr() : star_expressions());
            }
            for (std::size_t i = 0; i + 1 < n.children.size(); ++i) set_context(n.children[i], ExprContext::Store);
            n.span = span_from(start);
            return n;
        }
        Node n;
        n.kind = NodeKind::ExprStmt;
        n.children.push_back(std::move(first));
        n.span = span_from(start);
        return n;
    }

    Node dotted_alias(bool allow_dots) {
        std::size_t start = pos_;
        Node a;
        a.kind = NodeKind::Alias;
        const Token& first = expect_name();
        a.name = std::string(first.text);
        a.name_span = tok_span(first);
        while (allow_dots && at_op(".")) {
            advance();
            a.name += '.';
            a.name += std::string(expect_name().text);
        }
        if (at_kw("as")) {
            advance();
            const Token& as = expect_name();
            a.asname = std::string(as.text);
            a.name_span = tok_span(as);
        }
        a.span = span_from(start);
        return a;
    }

    Node import_stmt() {
        std::size_t start = pos_;
        advance();
        Node n;
        n.kind = NodeKind::Import;
        n.children.push_back(dotted_alias(true));
        while (at_op(",")) {
            advance();
            n.children.push_back(dotted_alias(true));
        }
        n.span = span_from(start);
        return n;
    }

    Node from_stmt() {
        std::size_t start = pos_;
        advance();
        Node n;
        n.kind = NodeKind::ImportFrom;
        while (at_op(".") || at_op("...")) n.name += std::string(advance().text);
        if (!at_kw("import")) {
            n.name += std::string(expect_name().text);
            while (at_op(".")) {
                advance();
                n.name += '.';
                n.name += std::string(expect_name().text);
            }
        }
        if (n.name.empty()) fail("invalid syntax");
        expect_kw("import");
        if (at_op("*")) {
            Node a = leaf(NodeKind::Alias, advance());
            a.name = "*";
            a.name_span = a.span;
            n.children.push_back(std::move(a));
        } else {
            bool paren = at_op("(");
            if (paren) advance();
            n.children.push_back(dotted_alias(false));
            while (at_op(",")) {
                advance();
                if (paren && at_op(")")) break;
                n.children.push_back(dotted_alias(false));
            }
            if (paren) expect_op(")");
        }
        n.span = span_from(start);
        return n;
    }

    Node type_alias() {
        std::size_t start = pos_;
        advance();
        advance();
        Node n;
        n.kind = NodeKind::Opaque;
        n.name = "type";
        if (at_op("[")) {
            int depth = 0;
            do {
                if (at_op("[")) ++depth;
                if (at_op("]")) --depth;
                advance();
            } while (depth > 0 && peek().kind != TokKind::EndMarker);
        }
        expect_op("=");
        n.children.push_back(expression());
        n.span = span_from(start);
        return n;
    }

    Node decorated() {
        std::size_t start = pos_;
        std::vector<Node> decorators;
        while (at_op("@")) {
            advance();
            decorators.push_back(named_expression());
            if (peek().kind != TokKind::Newline) fail("invalid syntax");
            advance();
        }
        if (at_kw("def") || (at_kw("async") && at_kw("def", 1))) return funcdef(start, std::move(decorators));
        if (at_kw("class")) return classdef(start, std::move(decorators));
        fail("invalid syntax");
    }

    Node funcdef(std::size_t start, std::vector<Node> decorators) {
        if (at_kw("async")) advance();
        expect_kw("def");
        Node n;
        n.kind = NodeKind::FunctionDef;
        n.children = std::move(decorators);
        const Token& name = expect_name();
        n.name = std::string(name.text);
        n.name_span = tok_span(name);
        expect_op("(");
        params(n.children, false, ")");
        expect_op(")");
        if (at_op("->")) {
            advance();
            n.children.push_back(expression());
        }
        block(n.children);
        n.span = span_from(start);
        return n;
    }

    Node classdef(std::size_t start, std::vector<Node> decorators) {
        expect_kw("class");
        Node n;
        n.kind = NodeKind::ClassDef;
        n.children = std::move(decorators);
        const Token& name = expect_name();
        n.name = std::string(name.text);
        n.name_span = tok_span(name);
        if (at_op("(")) {
            advance();
            arguments(n.children);
            expect_op(")");
        }
        block(n.children);
        n.span = span_from(start);
        return n;
    }

    void params(std::vector<Node>& out, bool lambda, std::string_view close) {
        while (!at_op(close)) {
            std::size_t start = pos_;
            if (at_op("/")) {
                advance();
            } else if (at_op("*") && (at_op(",", 1) || at_op(close, 1))) {
                advance();  // bare `*`: keyword-only marker
            } else {
                bool star = at_op("*") || at_op("**");
                if (star) advance();
                const Token& name = expect_name();
                Node p;
                p.kind = NodeKind::Param;
                p.name = std::string(name.text);
                p.name_span = tok_span(name);
                if (!lambda && at_op(":")) {
                    advance();
                    p.children.push_back(expression());
                }
                if (!star && at_op("=")) {
                    advance();
                    p.children.push_back(expression());
                }
                p.span = span_from(start);
                out.push_back(std::move(p));
            }
            if (!at_op(",")) break;
            advance();
        }
    }

    Node if_stmt() {
        std::size_t start = pos_;
        advance();  // `if` or `elif`
        Node n;
        n.kind = NodeKind::If;
        n.children.push_back(named_expression());
        block(n.children);
        if (at_kw("elif")) {
            n.children.push_back(if_stmt());
        } else if (at_kw("else")) {
            advance();
            block(n.children);
        }
        n.span = span_from(start);
        return n;
    }

    Node while_stmt() {
        std::size_t start = pos_;
        advance();
        Node n;
        n.kind = NodeKind::While;
        n.children.push_back(named_expression());
        block(n.children);
        if (at_kw("else")) {
            advance();
            block(n.children);
        }
        n.span = span_from(start);
        return n;
    }

    Node for_stmt(std::size_t start) {
        expect_kw("for");
        Node n;
        n.kind = NodeKind::For;
        Node target = star_targets();
        set_context(target, ExprContext::Store);
        n.children.push_back(std::move(target));
        expect_kw("in");
        n.children.push_back(star_expressions());
        block(n.children);
        if (at_kw("else")) {
            advance();
            block(n.children);
        }
        n.span = span_from(start);
        return n;
    }

    Node try_stmt() {
        std::size_t start = pos_;
        advance();
        Node n;
        n.kind = NodeKind::Try;
        block(n.children);
        bool handled = false;
        while (at_kw("except")) {
            handled = true;
            std::size_t hstart = pos_;
            advance();
            if (at_op("*")) advance();
            Node h;
            h.kind = NodeKind::ExceptHandler;
            if (!at_op(":")) {
                h.children.push_back(expression());
                if (at_op(",")) fail("multiple exception types must be parenthesized");
                if (at_kw("as")) {
                    advance();
                    const Token& name = expect_name();
                    h.name = std::string(name.text);
                    h.name_span = tok_span(name);
                }
            }
            block(h.children);
            h.span = span_from(hstart);
            n.children.push_back(std::move(h));
        }
        if (handled && at_kw("else")) {
            advance();
            block(n.children);
        }
        if (at_kw("finally")) {
            handled = true;
            advance();
            block(n.children);
        }
        if (!handled) fail("expected 'except' or 'finally' block");
        n.span = span_from(start);
        return n;
    }

    Node with_item() {
        std::size_t start = pos_;
        Node item;
        item.kind = NodeKind::WithItem;
        item.children.push_back(expression());
        if (at_kw("as")) {
            advance();
            Node target = star_target();
            set_context(target, ExprContext::Store);
            item.children.push_back(std::move(target));
        }
        item.span = span_from(start);
        return item;
    }

    Node with_stmt(std::size_t start) {
        expect_kw("with");
        Node n;
        n.kind = NodeKind::With;
        bool done = false;
        if (at_op("(")) {
            std::size_t save = pos_;
            try {
                advance();
                n.children.push_back(with_item());
                while (at_op(",")) {
                    advance();
                    if (at_op(")")) break;
                    n.children.push_back(with_item());
                }
                expect_op(")");
                if (!at_op(":")) fail("invalid syntax");
                done = true;
            } catch (const SyntaxError&) {
                pos_ = save;
                n.children.clear();
            }
        }
        if (!done) {
            n.children.push_back(with_item());
            while (at_op(",")) {
                advance();
                n.children.push_back(with_item());
            }
        }
        block(n.children);
        n.span = span_from(start);
        return n;
    }

    bool looks_like_match() const {
        const Token& next = peek(1);
        if (next.kind == TokKind::Newline || next.kind == TokKind::EndMarker) return false;
        if (next.kind == TokKind::Op) {
            static constexpr std::array<std::string_view, 9> never{"=", ".", ":", ",", ";", ")", "]", "}", ":="};
            if (std::find(never.begin(), never.end(), next.text) != never.end()) return false;
            if (std::find(kAugAssign.begin(), kAugAssign.end(), next.text) != kAugAssign.end()) return false;
        }
        std::size_t i = pos_ + 1;
        while (i < toks_.size() && toks_[i].kind != TokKind::Newline && toks_[i].kind != TokKind::EndMarker) ++i;
        return i > pos_ + 1 && toks_[i - 1].kind == TokKind::Op && toks_[i - 1].text == ":";
    }

    // `match` statements are modelled as Opaque; the subject, guards and case
    // bodies are parsed, the patterns are skipped.
    Node match_stmt() {
        std::size_t start = pos_;
        advance();
        Node n;
        n.kind = NodeKind::Opaque;
        n.name = "match";
        n.children.push_back(star_expressions());
        expect_op(":");
        if (peek().kind != TokKind::Newline) fail("invalid syntax");
        advance();
        if (peek().kind != TokKind::Indent) fail("expected an indented block");
        advance();
        while (at_kw("case")) {
            advance();
            int depth = 0;
            while (peek().kind != TokKind::EndMarker) {
                if (depth == 0 && (at_op(":") || at_kw("if"))) break;
                if (at_op("(") || at_op("[") || at_op("{")) ++depth;
                if (at_op(")") || at_op("]") || at_op("}")) --depth;
                advance();
            }
            if (at_kw("if")) {
                advance();
                n.children.push_back(named_expression());
            }
            block(n.children);
        }
        if (peek().kind == TokKind::Dedent) {
            advance();
        } else {
            fail("expected 'case'");
        }
        n.span = span_from(start);
        return n;
    }

    // --- expressions -------------------------------------------------------

    Node star_expressions() {
        std::size_t start = pos_;
        Node first = star_expression();
        if (!at_op(",")) return first;
        Node t;
        t.kind = NodeKind::Tuple;
        t.ctx = ExprContext::Load;
        t.children.push_back(std::move(first));
        while (at_op(",")) {
            advance();
            if (!starts_expression()) break;
            t.children.push_back(star_expression());
        }
        t.span = span_from(start);
        return t;
    }

    Node star_expression() {
        if (at_op("*")) {
            std::size_t start = pos_;
            advance();
            Node s;
            s.kind = NodeKind::Starred;
            s.ctx = ExprContext::Load;
            s.children.push_back(bitwise_or());
            s.span = span_from(start);
            return s;
        }
        return expression();
    }

    Node star_named_expression() { return at_op("*") ? star_expression() : named_expression(); }

    Node named_expression() {
        if (at_name() && at_op(":=", 1)) {
            std::size_t start = pos_;
            Node n;
            n.kind = NodeKind::NamedExpr;
            n.children.push_back(name_node(advance(), ExprContext::Store));
            advance();
            n.children.push_back(expression());
            n.span = span_from(start);
            return n;
        }
        return expression();
    }

    // Target list of `for` statements and comprehensions: stops before `in`.
    Node star_targets() {
        std::size_t start = pos_;
        Node first = star_target();
        if (!at_op(",")) return first;
        Node t;
        t.kind = NodeKind::Tuple;
        t.children.push_back(std::move(first));
        while (at_op(",")) {
            advance();
            if (at_kw("in") || at_op("=") || !starts_expression()) break;
            t.children.push_back(star_target());
        }
        t.span = span_from(start);
        return t;
    }

    Node star_target() {
        if (at_op("*")) {
            std::size_t start = pos_;
            advance();
            Node s;
            s.kind = NodeKind::Starred;
            s.children.push_back(star_target());
            s.span = span_from(start);
            return s;
        }
        return bitwise_or();
    }

    Node expression() {
        if (at_kw("lambda")) return lambdef();
        std::size_t start = pos_;
        Node body = disjunction();
        if (!at_kw("if")) return body;
        advance();
        Node n;
        n.kind = NodeKind::IfExp;
        n.children.push_back(std::move(body));
        n.children.push_back(disjunction());
        expect_kw("else");
        n.children.push_back(expression());
        n.span = span_from(start);
        return n;
    }

    Node lambdef() {
        std::size_t start = pos_;
        advance();
        Node n;
        n.kind = NodeKind::Lambda;
        params(n.children, true, ":");
        expect_op(":");
        n.children.push_back(expression());
        n.span = span_from(start);
        return n;
    }

    Node bool_chain(std::string_view op, Node (Parser::*next)()) {
        std::size_t start = pos_;
        Node first = (this->*next)();
        if (!at_kw(op)) return first;
        Node n;
        n.kind = NodeKind::BoolOp;
        n.name = std::string(op);
        n.children.push_back(std::move(first));
        while (at_kw(op)) {
            advance();
            n.children.push_back((this->*next)());
        }
        n.span = span_from(start);
        return n;
    }

    Node disjunction() { return bool_chain("or", &Parser::conjunction); }
    Node conjunction() { return bool_chain("and", &Parser::inversion); }

    Node inversion() {
        if (!at_kw("not")) return comparison();
        std::size_t start = pos_;
        advance();
        Node n;
        n.kind = NodeKind::UnaryOp;
        n.name = "not";
        n.children.push_back(inversion());
        n.span = span_from(start);
        return n;
    }

    bool at_compare_op() const {
        if (peek().kind == TokKind::Op) {
            auto t = peek().text;
            return t == "==" || t == "!=" || t == "<" || t == ">" || t == "<=" || t == ">=";
        }
        return at_kw("in") || at_kw("is") || (at_kw("not") && at_kw("in", 1));
    }

    Node comparison() {
        std::size_t start = pos_;
        Node first = bitwise_or();
        if (!at_compare_op()) return first;
        Node n;
        n.kind = NodeKind::Compare;
        n.children.push_back(std::move(first));
        while (at_compare_op()) {
            std::string op(advance().text);
            if ((op == "is" && at_kw("not")) || op == "not") op += " " + std::string(advance().text);
            if (n.name.empty()) n.name = op;
            n.children.push_back(bitwise_or());
        }
        n.span = span_from(start);
        return n;
    }

    template <std::size_t N>
    Node binary(const std::array<std::string_view, N>& ops, Node (Parser::*next)()) {
        std::size_t start = pos_;
        Node left = (this->*next)();
        for (;;) {
            const Token& t = peek();
            if (t.kind != TokKind::Op || std::find(ops.begin(), ops.end(), t.text) == ops.end()) return left;
            Node n;
            n.kind = NodeKind::BinOp;
            n.name = std::string(advance().text);
            n.children.push_back(std::move(left));
            n.children.push_back((this->*next)());
            n.span = span_from(start);
            left = std::move(n);
        }
    }

    Node bitwise_or() { return binary(std::array<std::string_view, 1>{"|"}, &Parser::bitwise_xor); }
    Node bitwise_xor() { return binary(std::array<std::string_view, 1>{"^"}, &Parser::bitwise_and); }
    Node bitwise_and() { return binary(std::array<std::string_view, 1>{"&"}, &Parser::shift_expr); }
    Node shift_expr() { return binary(std::array<std::string_view, 2>{"<<", ">>"}, &Parser::sum); }
    Node sum() { return binary(std::array<std::string_view, 2>{"+", "-"}, &Parser::term); }
    Node term() { return binary(std::array<std::string_view, 5>{"*", "/", "//", "%", "@"}, &Parser::factor); }

    Node factor() {
        if (at_op("+") || at_op("-") || at_op("~")) {
            std::size_t start = pos_;
            Node n;
            n.kind = NodeKind::UnaryOp;
            n.name = std::string(advance().text);
            n.children.push_back(factor());
            n.span = span_from(start);
            return n;
        }
        return power();
    }

    Node power() {
        std::size_t start = pos_;
        Node base = await_primary();
        if (!at_op("**")) return base;
        advance();
        Node n;
        n.kind = NodeKind::BinOp;
        n.name = "**";
        n.children.push_back(std::move(base));
        n.children.push_back(factor());
        n.span = span_from(start);
        return n;
    }

    Node await_primary() {
        if (!at_kw("await")) return primary();
        std::size_t start = pos_;
        advance();
        Node n;
        n.kind = NodeKind::Await;
        n.children.push_back(primary());
        n.span = span_from(start);
        return n;
    }

    Node primary() {
        std::size_t start = pos_;
        Node node = atom();
        for (;;) {
            if (at_op(".")) {
                advance();
                const Token& attr = expect_name();
                Node a;
                a.kind = NodeKind::Attribute;
                a.name = std::string(attr.text);
                a.name_span = tok_span(attr);
                a.ctx = ExprContext::Load;
                a.children.push_back(std::move(node));
                a.span = span_from(start);
                node = std::move(a);
            } else if (at_op("(")) {
                advance();
                Node c;
                c.kind = NodeKind::Call;
                c.children.push_back(std::move(node));
                arguments(c.children);
                expect_op(")");
                c.span = span_from(start);
                node = std::move(c);
            } else if (at_op("[")) {
                advance();
                Node s;
                s.kind = NodeKind::Subscript;
                s.ctx = ExprContext::Load;
                s.children.push_back(std::move(node));
                s.children.push_back(slices());
                expect_op("]");
                s.span = span_from(start);
                node = std::move(s);
            } else {
                return node;
            }
        }
    }

    void arguments(std::vector<Node>& out) {
        while (!at_op(")")) {
            std::size_t start = pos_;
            if (at_op("*")) {
                advance();
                Node s;
                s.kind = NodeKind::Starred;
                s.ctx = ExprContext::Load;
                s.children.push_back(expression());
                s.span = span_from(start);
                out.push_back(std::move(s));
            } else if (at_op("**")) {
                advance();
                Node k;
                k.kind = NodeKind::Keyword;
                k.children.push_back(expression());
                k.span = span_from(start);
                out.push_back(std::move(k));
            } else if (at_name() && at_op("=", 1)) {
                const Token& name = advance();
                advance();
                Node k;
                k.kind = NodeKind::Keyword;
                k.name = std::string(name.text);
                k.name_span = tok_span(name);
                k.children.push_back(expression());
                k.span = span_from(start);
                out.push_back(std::move(k));
            } else {
                Node e = named_expression();
                if (at_comprehension()) {
                    Node g;
                    g.kind = NodeKind::GeneratorExp;
                    g.children.push_back(std::move(e));
                    comprehension_clauses(g.children);
                    g.span = span_from(start);
                    e = std::move(g);
                }
                out.push_back(std::move(e));
            }
            if (!at_op(",")) break;
            advance();
        }
    }

    Node slices() {
        std::size_t start = pos_;
        Node first = slice();
        if (!at_op(",")) return first;
        Node t;
        t.kind = NodeKind::Tuple;
        t.ctx = ExprContext::Load;
        t.children.push_back(std::move(first));
        while (at_op(",")) {
            advance();
            if (at_op("]")) break;
            t.children.push_back(slice());
        }
        t.span = span_from(start);
        return t;
    }

    Node slice() {
        std::size_t start = pos_;
        Node s;
        s.kind = NodeKind::Slice;
        if (!at_op(":")) {
            Node e = star_named_expression();
            if (!at_op(":")) return e;
            s.children.push_back(std::move(e));
        }
        advance();
        if (!at_op(":") && !at_op("]") && !at_op(",")) s.children.push_back(expression());
        if (at_op(":")) {
            advance();
            if (!at_op("]") && !at_op(",")) s.children.push_back(expression());
        }
        s.span = span_from(start);
        return s;
    }

    void comprehension_clauses(std::vector<Node>& out) {
        while (at_comprehension()) {
            std::size_t start = pos_;
            if (at_kw("async")) advance();
            advance();
            Node c;
            c.kind = NodeKind::Comprehension;
            Node target = star_targets();
            set_context(target, ExprContext::Store);
            c.children.push_back(std::move(target));
            expect_kw("in");
            c.children.push_back(disjunction());
            while (at_kw("if")) {
                advance();
                c.children.push_back(disjunction());
            }
            c.span = span_from(start);
            out.push_back(std::move(c));
        }
    }

    Node yield_expr() {
        std::size_t start = pos_;
        advance();
        Node n;
        if (at_kw("from")) {
            advance();
            n.kind = NodeKind::YieldFrom;
            n.children.push_back(expression());
        } else {
            n.kind = NodeKind::Yield;
            if (starts_expression()) n.children.push_back(star_expressions());
        }
        n.span = span_from(start);
        return n;
    }

    Node atom() {
        const Token& t = peek();
        switch (t.kind) {
            case TokKind::Name: {
                if (t.text == "True" || t.text == "False" || t.text == "None") {
                    Node c = leaf(NodeKind::Constant, advance());
                    c.name = std::string(t.text);
                    return c;
                }
                if (is_keyword(t.text)) fail("invalid syntax");
                return name_node(advance(), ExprContext::Load);
            }
            case TokKind::Number:
                return leaf(NodeKind::Constant, advance());
            case TokKind::String:
                return strings();
            case TokKind::Op:
                if (t.text == "...") return leaf(NodeKind::Constant, advance());
                if (t.text == "(") return paren_atom();
                if (t.text == "[") return list_atom();
                if (t.text == "{") return brace_atom();
                break;
            default:
                break;
        }
        fail("invalid syntax");
    }

    Node paren_atom() {
        std::size_t start = pos_;
        advance();
        if (at_op(")")) {
            advance();
            Node t = make(NodeKind::Tuple, start);
            t.ctx = ExprContext::Load;
            return t;
        }
        if (at_kw("yield")) {
            Node y = yield_expr();
            expect_op(")");
            return y;
        }
        Node first = star_named_expression();
        if (at_comprehension()) {
            Node g;
            g.kind = NodeKind::GeneratorExp;
            g.children.push_back(std::move(first));
            comprehension_clauses(g.children);
            expect_op(")");
            g.span = span_from(start);
            return g;
        }
        if (at_op(",")) {
            Node t;
            t.kind = NodeKind::Tuple;
            t.ctx = ExprContext::Load;
            t.children.push_back(std::move(first));
            while (at_op(",")) {
                advance();
                if (at_op(")")) break;
                t.children.push_back(star_named_expression());
            }
            expect_op(")");
            t.span = span_from(start);
            return t;
        }
        expect_op(")");
        return first;
    }

    Node list_atom() {
        std::size_t start = pos_;
        advance();
        Node n;
        n.kind = NodeKind::List;
        n.ctx = ExprContext::Load;
        if (!at_op("]")) {
            n.children.push_back(star_named_expression());
            if (at_comprehension()) {
                n.kind = NodeKind::ListComp;
                n.ctx = ExprContext::None;
                comprehension_clauses(n.children);
            } else {
                while (at_op(",")) {
                    advance();
                    if (at_op("]")) break;
                    n.children.push_back(star_named_expression());
                }
            }
        }
        expect_op("]");
        n.span = span_from(start);
        return n;
    }

    Node dict_unpack() {
        std::size_t start = pos_;
        advance();
        Node u;
        u.kind = NodeKind::DictUnpack;
        u.children.push_back(bitwise_or());
        u.span = span_from(start);
        return u;
    }

    Node brace_atom() {
        std::size_t start = pos_;
        advance();
        Node n;
        n.kind = NodeKind::Dict;
        if (at_op("}")) {
            advance();
            n.span = span_from(start);
            return n;
        }
        bool is_dict = true;
        if (at_op("**")) {
            n.children.push_back(dict_unpack());
        } else {
            Node first = star_named_expression();
            if (at_op(":")) {
                advance();
                n.children.push_back(std::move(first));
                n.children.push_back(expression());
                if (at_comprehension()) {
                    n.kind = NodeKind::DictComp;
                    comprehension_clauses(n.children);
                    expect_op("}");
                    n.span = span_from(start);
                    return n;
                }
            } else {
                is_dict = false;
                n.kind = NodeKind::Set;
                n.children.push_back(std::move(first));
                if (at_comprehension()) {
                    n.kind = NodeKind::SetComp;
                    comprehension_clauses(n.children);
                    expect_op("}");
                    n.span = span_from(start);
                    return n;
                }
            }
        }
        while (at_op(",")) {
            advance();
            if (at_op("}")) break;
            if (is_dict) {
                if (at_op("**")) {
                    n.children.push_back(dict_unpack());
                } else {
                    n.children.push_back(expression());
                    expect_op(":");
                    n.children.push_back(expression());
                }
            } else {
                n.children.push_back(star_named_expression());
            }
        }
        expect_op("}");
        n.span = span_from(start);
        return n;
    }

    // --- string literals ---------------------------------------------------

    Node strings() {
        std::size_t start = pos_;
        Node n;
        n.kind = NodeKind::Constant;
        std::vector<Node> fields;
        while (peek().kind == TokKind::String) {
            const Token& t = advance();
            std::size_t quote = t.text.find_first_of("'\"");
            auto prefix = t.text.substr(0, quote);
            if (prefix.find_first_of("fF") != std::string_view::npos) {
                n.kind = NodeKind::JoinedStr;
                bool triple = t.text.size() >= quote + 6 && t.text[quote + 1] == t.text[quote] &&
                              t.text[quote + 2] == t.text[quote];
                std::uint32_t qlen = triple ? 3 : 1;
                bool raw = prefix.find_first_of("rR") != std::string_view::npos;
                fstring_fields(t.begin + static_cast<std::uint32_t>(quote) + qlen, t.end - qlen, raw, fields);
            }
        }
        n.children = std::move(fields);
        n.span = span_from(start);
        return n;
    }

    void fstring_fields(std::uint32_t begin, std::uint32_t end, bool raw, std::vector<Node>& out) {
        const std::string& text = src_.content();
        std::uint32_t i = begin;
        while (i < end) {
            char c = text[i];
            if (c == '\\' && !raw) {
                // `\N{NAME}` escapes are not replacement fields
                if (i + 2 < end && text[i + 1] == 'N' && text[i + 2] == '{') {
                    auto close = text.find('}', i + 3);
                    i = close == std::string::npos || close >= end ? end : static_cast<std::uint32_t>(close) + 1;
                } else {
                    ++i;
                }
            } else if (c == '{') {
                if (i + 1 < end && text[i + 1] == '{') {
                    i += 2;
                    continue;
                }
                i = fstring_field(i, end, out);
            } else if (c == '}') {
                if (i + 1 < end && text[i + 1] == '}') {
                    i += 2;
                    continue;
                }
                fail_at(i, "f-string: single '}' is not allowed");
            } else {
                ++i;
            }
        }
    }

    // Parses one `{expr[=][!c][:spec]}` field starting at `open`; returns the
    // offset just past its closing brace.
    std::uint32_t fstring_field(std::uint32_t open, std::uint32_t end, std::vector<Node>& out) {
        const std::string& text = src_.content();
        std::uint32_t j = open + 1;
        std::uint32_t expr_end = 0;
        int depth = 0;
        char in_quote = 0;
        bool triple_quote = false;
        while (j < end) {
            char c = text[j];
            if (in_quote != 0) {
                if (c == '\\') {
                    j += 2;
                    continue;
                }
                if (c == in_quote) {
                    if (!triple_quote) {
                        in_quote = 0;
                    } else if (j + 2 < end && text[j + 1] == c && text[j + 2] == c) {
                        in_quote = 0;
                        j += 2;
                    }
                }
                ++j;
                continue;
            }
            if (c == '\'' || c == '"') {
                in_quote = c;
                triple_quote = j + 2 < end && text[j + 1] == c && text[j + 2] == c;
                j += triple_quote ? 3 : 1;
                continue;
            }
            if (c == '(' || c == '[' || c == '{') {
                ++depth;
            } else if (c == ')' || c == ']' || (c == '}' && depth > 0)) {
                --depth;
            } else if (depth == 0) {
                if (c == '}' || c == ':') break;
                if (c == '!' && !(j + 1 < end && text[j + 1] == '=')) break;
                if (c == '=' && !(j + 1 < end && text[j + 1] == '=') && j > open + 1 &&
                    std::string_view("=!<>").find(text[j - 1]) == std::string_view::npos) {
                    expr_end = j;
                    ++j;
                    break;
                }
            }
            ++j;
        }
        if (expr_end == 0) expr_end = j;
        if (j >= end) fail_at(open, "f-string: expecting '}'");

        std::uint32_t first = open + 1;
        while (first < expr_end && std::isspace(static_cast<unsigned char>(text[first]))) ++first;
        if (first == expr_end) fail_at(open, "f-string: empty expression not allowed");

        Node fv;
        fv.kind = NodeKind::FormattedValue;
        Lexer sub_lexer(src_, open + 1, expr_end, Lexer::Mode::Expression);
        Parser sub(src_, sub_lexer.tokenize());
        fv.children.push_back(sub.parse_field_expression());

        // skip trailing whitespace after a debug `=`
        while (j < end && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j < end && text[j] == '!') {
            j += 2;
            if (j > end) fail_at(open, "f-string: invalid conversion character");
        }
        if (j < end && text[j] == ':') {
            ++j;
            while (j < end && text[j] != '}') {
                if (text[j] == '{') {
                    j = fstring_field(j, end, fv.children);
                } else {
                    ++j;
                }
            }
        }
        if (j >= end || text[j] != '}') fail_at(open, "f-string: expecting '}'");
        fv.span = Span{open, j + 1};
        out.push_back(std::move(fv));
        return j + 1;
    }

    const SourceText& src_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

}  // namespace
}  // namespace detail

SyntaxTree parse_source(const SourceText& src) {
    detail::Lexer lexer(src, 0, static_cast<std::uint32_t>(src.size()), detail::Lexer::Mode::Statements);
    detail::Parser parser(src, lexer.tokenize());
    auto root = std::make_shared<const Node>(parser.parse_module());
    return SyntaxTree(std::move(root), src);
}

}  // namespace vqforge
