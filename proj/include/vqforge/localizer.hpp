#pragma once

// Localization of potential bug sites.
//
// Two site kinds are collected from the syntax tree:
//  - AttributeCall: `receiver.attr(...)`, a candidate for a wrong attribute;
//  - HallucinatedCall: `name(...)` where `name` is bound nowhere in the
//    snippet and is not a builtin, a candidate for a hallucinated object.
//
// Scope analysis is module-flat: a binding anywhere in the snippet makes the
// name defined everywhere. Sites are ordered by the position of their
// identifier token (the attribute name or the callee name) and deduplicated by
// rendering, first occurrence wins.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vqforge/code_model.hpp"

namespace vqforge {

enum class SiteKind { AttributeCall, HallucinatedCall };

std::string_view to_string(SiteKind kind) noexcept;

struct TargetedSite {
    SiteKind kind = SiteKind::AttributeCall;
    std::string rendering;                    // e.g. "matched_pubdate.first()" or "get_element_text()"
    std::optional<std::string> receiver_text;  // AttributeCall only
    std::string name;                         // attribute or callee identifier
    Span span;                                // attribute expression or callee name

    friend bool operator==(const TargetedSite&, const TargetedSite&) = default;
};

enum class Provenance {
    Builtin,
    Import,
    Def,
    Param,
    Assign,
    LoopTarget,
    WithTarget,
    ComprehensionTarget,
    Class,
    Global,
};

std::string_view to_string(Provenance p) noexcept;

/// Set of defined identifiers, each with the provenance of its first binding.
class NameSet {
public:
    /// Records `name`; returns false (and keeps the old provenance) if present.
    bool insert(std::string name, Provenance provenance);

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    std::optional<Provenance> provenance(const std::string& name) const;
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const std::map<std::string, Provenance>& entries() const noexcept { return entries_; }

private:
    std::map<std::string, Provenance> entries_;
};

/// Reads a builtins allow-list: one identifier per line, `#` comments.
NameSet load_builtins(const std::filesystem::path& path);

struct LocalizerConfig {
    NameSet builtins;
    bool include_bare_attributes = false;
    bool include_underscore_attributes = false;
    std::vector<std::string> exclude_name_patterns;  // ECMAScript regex, full match on the site name
};

struct LocalizationReport {
    std::vector<TargetedSite> attribute_targets;
    std::vector<TargetedSite> hallucination_targets;
    SourceText source;

    bool empty() const noexcept { return attribute_targets.empty() && hallucination_targets.empty(); }
};

std::vector<TargetedSite> collect_attribute_sites(const SyntaxTree& tree, const LocalizerConfig& cfg = {});

NameSet resolve_defined_names(const SyntaxTree& tree, const NameSet& builtins);

std::vector<TargetedSite> find_hallucination_candidates(const SyntaxTree& tree, const NameSet& defined,
                                                        const LocalizerConfig& cfg = {});

/// Parses `src` and runs both collectors. Throws SyntaxError.
LocalizationReport localize(const SourceText& src, const LocalizerConfig& cfg);

}  // namespace vqforge
