#include "vqforge/localizer.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace vqforge {

std::string_view to_string(SiteKind kind) noexcept {
    return kind == SiteKind::AttributeCall ? "AttributeCall" : "HallucinatedCall";
}

std::string_view to_string(Provenance p) noexcept {
    switch (p) {
        case Provenance::Builtin: return "builtin";
        case Provenance::Import: return "import";
        case Provenance::Def: return "def";
        case Provenance::Param: return "param";
        case Provenance::Assign: return "assign";
        case Provenance::LoopTarget: return "loop-target";
        case Provenance::WithTarget: return "with-target";
        case Provenance::ComprehensionTarget: return "comprehension-target";
        case Provenance::Class: return "class";
        case Provenance::Global: return "global";
    }
    return "assign";
}

bool NameSet::insert(std::string name, Provenance provenance) {
    return entries_.emplace(std::move(name), provenance).second;
}

std::optional<Provenance> NameSet::provenance(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

NameSet load_builtins(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read builtins file " + path.string());
    NameSet set;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream words(line);
        std::string word;
        while (words >> word) set.insert(word, Provenance::Builtin);
    }
    if (set.empty()) throw InvalidInput("builtins file " + path.string() + " lists no names");
    return set;
}

namespace {

bool is_dunder(const std::string& name) {
    return name.size() > 4 && name.rfind("__", 0) == 0 && name.compare(name.size() - 2, 2, "__") == 0;
}

class NameFilter {
public:
    explicit NameFilter(const std::vector<std::string>& patterns) {
        for (const auto& p : patterns) {
            try {
                regexes_.emplace_back(p, std::regex::ECMAScript);
            } catch (const std::regex_error& e) {
                throw InvalidInput("invalid exclude pattern '" + p + "': " + e.what());
            }
        }
    }
    bool excluded(const std::string& name) const {
        return std::any_of(regexes_.begin(), regexes_.end(),
                           [&](const std::regex& re) { return std::regex_match(name, re); });
    }

private:
    std::vector<std::regex> regexes_;
};

struct Candidate {
    std::uint32_t order;
    TargetedSite site;
};

std::vector<TargetedSite> finish(std::vector<Candidate> candidates) {
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.order < b.order; });
    std::set<std::string> seen;
    std::vector<TargetedSite> out;
    for (auto& c : candidates) {
        if (seen.insert(c.site.rendering).second) out.push_back(std::move(c.site));
    }
    return out;
}

void bind_targets(const Node& n, Provenance prov, NameSet& out);

// Visits `n`, binding every stored name.
void collect_bindings(const Node& n, NameSet& out) {
    switch (n.kind) {
        case NodeKind::FunctionDef:
            out.insert(n.name, Provenance::Def);
            break;
        case NodeKind::ClassDef:
            out.insert(n.name, Provenance::Class);
            break;
        case NodeKind::Param:
            out.insert(n.name, Provenance::Param);
            break;
        case NodeKind::Name:
            if (n.ctx == ExprContext::Store) out.insert(n.name, Provenance::Assign);
            return;
        case NodeKind::ExceptHandler:
            if (!n.name.empty()) out.insert(n.name, Provenance::Assign);
            break;
        case NodeKind::Import:
            for (const auto& alias : n.children) {
                out.insert(alias.asname.empty() ? alias.name.substr(0, alias.name.find('.')) : alias.asname,
                           Provenance::Import);
            }
            return;
        case NodeKind::ImportFrom:
            for (const auto& alias : n.children) {
                if (alias.name == "*") continue;
                out.insert(alias.asname.empty() ? alias.name : alias.asname, Provenance::Import);
            }
            return;
        case NodeKind::GlobalDecl:
        case NodeKind::NonlocalDecl:
            for (const auto& id : n.children) out.insert(id.name, Provenance::Global);
            return;
        case NodeKind::For:
            bind_targets(n.children.front(), Provenance::LoopTarget, out);
            for (std::size_t i = 1; i < n.children.size(); ++i) collect_bindings(n.children[i], out);
            return;
        case NodeKind::WithItem:
            collect_bindings(n.children.front(), out);
            if (n.children.size() > 1) bind_targets(n.children[1], Provenance::WithTarget, out);
            return;
        case NodeKind::Comprehension:
            bind_targets(n.children.front(), Provenance::ComprehensionTarget, out);
            for (std::size_t i = 1; i < n.children.size(); ++i) collect_bindings(n.children[i], out);
            return;
        default:
            break;
    }
    for (const auto& c : n.children) collect_bindings(c, out);
}

// Binds the names of a target expression with `prov`, then visits the
// target's sub-expressions (subscript indices etc.) normally.
void bind_targets(const Node& n, Provenance prov, NameSet& out) {
    switch (n.kind) {
        case NodeKind::Name:
            if (n.ctx == ExprContext::Store) out.insert(n.name, prov);
            return;
        case NodeKind::Tuple:
        case NodeKind::List:
        case NodeKind::Starred:
            for (const auto& c : n.children) bind_targets(c, prov, out);
            return;
        default:
            collect_bindings(n, out);
    }
}

}  // namespace

std::vector<TargetedSite> collect_attribute_sites(const SyntaxTree& tree, const LocalizerConfig& cfg) {
    const SourceText& src = tree.source();
    NameFilter filter(cfg.exclude_name_patterns);
    std::vector<Candidate> candidates;

    auto consider = [&](const Node& attr, bool call_form) {
        if (attr.kind != NodeKind::Attribute) return;
        if (!cfg.include_underscore_attributes && (is_dunder(attr.name) || attr.name.front() == '_')) return;
        if (filter.excluded(attr.name)) return;
        TargetedSite site;
        site.kind = SiteKind::AttributeCall;
        site.rendering = std::string(node_source(attr, src));
        if (call_form) site.rendering += "()";
        site.receiver_text = std::string(node_source(attr.children.front(), src));
        site.name = attr.name;
        site.span = attr.span;
        candidates.push_back(Candidate{attr.name_span.begin, std::move(site)});
    };

    std::set<const Node*> callees;
    for (const Node* n : walk(tree)) {
        if (n->kind == NodeKind::Call && n->children.front().kind == NodeKind::Attribute) {
            callees.insert(&n->children.front());
            consider(n->children.front(), true);
        }
    }
    if (cfg.include_bare_attributes) {
        for (const Node* n : walk(tree)) {
            if (n->kind == NodeKind::Attribute && n->ctx == ExprContext::Load && callees.count(n) == 0) {
                consider(*n, false);
            }
        }
    }
    return finish(std::move(candidates));
}

NameSet resolve_defined_names(const SyntaxTree& tree, const NameSet& builtins) {
    NameSet defined = builtins;
    collect_bindings(tree.root(), defined);
    return defined;
}

std::vector<TargetedSite> find_hallucination_candidates(const SyntaxTree& tree, const NameSet& defined,
                                                        const LocalizerConfig& cfg) {
    NameFilter filter(cfg.exclude_name_patterns);
    std::vector<Candidate> candidates;
    for (const Node* n : walk(tree)) {
        if (n->kind != NodeKind::Call) continue;
        const Node& callee = n->children.front();
        if (callee.kind != NodeKind::Name || defined.contains(callee.name) || filter.excluded(callee.name)) continue;
        TargetedSite site;
        site.kind = SiteKind::HallucinatedCall;
        site.rendering = callee.name + "()";
        site.name = callee.name;
        site.span = callee.span;
        candidates.push_back(Candidate{callee.span.begin, std::move(site)});
    }
    return finish(std::move(candidates));
}

LocalizationReport localize(const SourceText& src, const LocalizerConfig& cfg) {
    SyntaxTree tree = parse_source(src);
    NameSet defined = resolve_defined_names(tree, cfg.builtins);
    return LocalizationReport{collect_attribute_sites(tree, cfg), find_hallucination_candidates(tree, defined, cfg),
                              src};
}

}  // namespace vqforge
