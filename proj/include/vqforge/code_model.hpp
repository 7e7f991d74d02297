#pragma once

// Syntax model for the subject language (Python 3.8+).
//
// parse_source() turns source text into an immutable tree of Nodes whose spans
// are byte offsets into the original text. Constructs the parser does not
// model (3.10+ `match`, 3.12 `type` aliases) become Opaque nodes; whatever
// statements they contain are still parsed and appear as children.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "vqforge/errors.hpp"

namespace vqforge {

/// Half-open byte range [begin, end).
struct Span {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;

    std::uint32_t size() const noexcept { return end - begin; }
    bool contains(const Span& other) const noexcept { return begin <= other.begin && other.end <= end; }
    friend bool operator==(const Span&, const Span&) = default;
};

struct Location {
    std::size_t line = 1;    // 1-based
    std::size_t column = 1;  // 1-based, in bytes
};

/// Source text of one code sample. Content must be valid UTF-8 and origin
/// non-empty; the constructor throws InvalidInput otherwise.
class SourceText {
public:
    SourceText(std::string content, std::string origin);

    const std::string& content() const noexcept { return content_; }
    const std::string& origin() const noexcept { return origin_; }
    std::size_t size() const noexcept { return content_.size(); }

    std::string_view slice(Span span) const;
    Location location(std::size_t offset) const;

    friend bool operator==(const SourceText& a, const SourceText& b) {
        return a.content_ == b.content_ && a.origin_ == b.origin_;
    }

private:
    std::string content_;
    std::string origin_;
    std::vector<std::size_t> line_starts_;
};

bool is_valid_utf8(std::string_view text) noexcept;

// Node kinds. The set is closed:
//  - module/statements: Module, FunctionDef, ClassDef, Return, Delete, Assign,
//    AugAssign, AnnAssign, For, While, If, With, WithItem, Raise, Try,
//    ExceptHandler, Assert, Import, ImportFrom, Alias, GlobalDecl,
//    NonlocalDecl, ExprStmt, Pass, Break, Continue
//  - expressions: BoolOp, NamedExpr, BinOp, UnaryOp, Lambda, IfExp, Dict, Set,
//    ListComp, SetComp, DictComp, GeneratorExp, Comprehension, Await, Yield,
//    YieldFrom, Compare, Call, Keyword, DictUnpack, JoinedStr, FormattedValue,
//    Constant, Attribute, Subscript, Starred, Name, List, Tuple, Slice
//  - Param (function or lambda parameter), Identifier (bare name inside
//    global/nonlocal), Opaque (unmodelled construct)
enum class NodeKind : std::uint8_t {
    Module,
    FunctionDef,
    ClassDef,
    Return,
    Delete,
    Assign,
    AugAssign,
    AnnAssign,
    For,
    While,
    If,
    With,
    WithItem,
    Raise,
    Try,
    ExceptHandler,
    Assert,
    Import,
    ImportFrom,
    Alias,
    GlobalDecl,
    NonlocalDecl,
    ExprStmt,
    Pass,
    Break,
    Continue,
    BoolOp,
    NamedExpr,
    BinOp,
    UnaryOp,
    Lambda,
    IfExp,
    Dict,
    Set,
    ListComp,
    SetComp,
    DictComp,
    GeneratorExp,
    Comprehension,
    Await,
    Yield,
    YieldFrom,
    Compare,
    Call,
    Keyword,
    DictUnpack,
    JoinedStr,
    FormattedValue,
    Constant,
    Attribute,
    Subscript,
    Starred,
    Name,
    List,
    Tuple,
    Slice,
    Param,
    Identifier,
    Opaque,
};

std::string_view to_string(NodeKind kind) noexcept;

enum class ExprContext : std::uint8_t { None, Load, Store, Del };

/// One syntax-tree node.
///
/// `name` carries the identifier feature of the node where one exists:
/// Name id, Attribute attr, def/class/param name, keyword argument name,
/// except-handler binding, imported dotted name (Alias), module (ImportFrom),
/// operator text (BinOp, BoolOp, UnaryOp, AugAssign). `name_span` is where that
/// identifier sits in the source. `asname` is only used by Alias.
///
/// Children are in source order. For Call the first child is the callee, for
/// Attribute and Subscript the first child is the receiver.
struct Node {
    NodeKind kind = NodeKind::Opaque;
    Span span;
    std::string name;
    Span name_span;
    std::string asname;
    ExprContext ctx = ExprContext::None;
    std::vector<Node> children;
};

class SyntaxTree {
public:
    SyntaxTree(std::shared_ptr<const Node> root, SourceText source)
        : root_(std::move(root)), source_(std::move(source)) {}

    const Node& root() const noexcept { return *root_; }
    const SourceText& source() const noexcept { return source_; }

private:
    std::shared_ptr<const Node> root_;
    SourceText source_;
};

/// Parses Python 3 source. Throws SyntaxError on invalid input.
SyntaxTree parse_source(const SourceText& src);

/// Pre-order depth-first traversal. Pointers stay valid while `tree` lives.
std::vector<const Node*> walk(const SyntaxTree& tree);
std::vector<const Node*> walk(const Node& root);

/// Exact source slice covered by `node`.
std::string_view node_source(const Node& node, const SourceText& src);

/// True if `text` parses as subject-language source.
bool parses(std::string_view text);

}  // namespace vqforge
