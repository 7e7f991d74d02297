#include "vqforge/code_model.hpp"

#include <algorithm>
#include <array>

namespace vqforge {

bool is_valid_utf8(std::string_view text) noexcept {
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        auto c = static_cast<unsigned char>(text[i]);
        std::size_t len;
        std::uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > n) return false;
        for (std::size_t k = 1; k < len; ++k) {
            auto cc = static_cast<unsigned char>(text[i + k]);
            if ((cc & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        // overlong forms, surrogates, out of range
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
            (cp >= 0xD800 && cp <= 0xDFFF)) {
            return false;
        }
        i += len;
    }
    return true;
}

SourceText::SourceText(std::string content, std::string origin)
    : content_(std::move(content)), origin_(std::move(origin)) {
    if (origin_.empty()) throw InvalidInput("source origin must not be empty");
    if (!is_valid_utf8(content_)) throw InvalidInput("source '" + origin_ + "' is not valid UTF-8");
    line_starts_.push_back(0);
    for (std::size_t i = 0; i < content_.size(); ++i) {
        if (content_[i] == '\n' || (content_[i] == '\r' && (i + 1 >= content_.size() || content_[i + 1] != '\n'))) {
            line_starts_.push_back(i + 1);
        }
    }
}

std::string_view SourceText::slice(Span span) const {
    std::string_view view(content_);
    if (span.begin > view.size()) return {};
    return view.substr(span.begin, std::min<std::size_t>(span.size(), view.size() - span.begin));
}

Location SourceText::location(std::size_t offset) const {
    auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), offset);
    std::size_t line = static_cast<std::size_t>(it - line_starts_.begin());
    return Location{line, offset - line_starts_[line - 1] + 1};
}

std::string_view to_string(NodeKind kind) noexcept {
    static constexpr std::array<std::string_view, 59> names{
        "Module",       "FunctionDef", "ClassDef",  "Return",     "Delete",     "Assign",       "AugAssign",
        "AnnAssign",    "For",         "While",     "If",         "With",       "WithItem",     "Raise",
        "Try",          "ExceptHandler", "Assert",  "Import",     "ImportFrom", "Alias",        "GlobalDecl",
        "NonlocalDecl", "ExprStmt",    "Pass",      "Break",      "Continue",   "BoolOp",       "NamedExpr",
        "BinOp",        "UnaryOp",     "Lambda",    "IfExp",      "Dict",       "Set",          "ListComp",
        "SetComp",      "DictComp",    "GeneratorExp", "Comprehension", "Await", "Yield",       "YieldFrom",
        "Compare",      "Call",        "Keyword",   "DictUnpack", "JoinedStr",  "FormattedValue", "Constant",
        "Attribute",    "Subscript",   "Starred",   "Name",       "List",       "Tuple",        "Slice",
        "Param",        "Identifier",  "Opaque"};
    auto index = static_cast<std::size_t>(kind);
    return index < names.size() ? names[index] : "Opaque";
}

std::vector<const Node*> walk(const Node& root) {
    std::vector<const Node*> out;
    std::vector<const Node*> stack{&root};
    while (!stack.empty()) {
        const Node* n = stack.back();
        stack.pop_back();
        out.push_back(n);
        for (auto it = n->children.rbegin(); it != n->children.rend(); ++it) stack.push_back(&*it);
    }
    return out;
}

std::vector<const Node*> walk(const SyntaxTree& tree) { return walk(tree.root()); }

std::string_view node_source(const Node& node, const SourceText& src) { return src.slice(node.span); }

bool parses(std::string_view text) {
    if (!is_valid_utf8(text)) return false;
    try {
        parse_source(SourceText(std::string(text), "<candidate>"));
        return true;
    } catch (const SyntaxError&) {
        return false;
    }
}

}  // namespace vqforge
