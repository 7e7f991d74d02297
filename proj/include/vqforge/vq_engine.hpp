#pragma once

// Verification-question templates and chain assembly.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vqforge/localizer.hpp"

namespace vqforge {

enum class BugPattern { WrongAttribute, HallucinatedObject };

std::string_view to_string(BugPattern p) noexcept;
/// Parses "WrongAttribute" / "HallucinatedObject". Throws InvalidInput.
BugPattern bug_pattern_from_string(std::string_view s);
/// The site kind a pattern's template expects.
SiteKind site_kind_for(BugPattern p) noexcept;

inline constexpr std::string_view kPlaceholder = "<Targeted Nodes>";
inline constexpr std::string_view kTargetSeparator = ", ";

struct VQTemplate {
    BugPattern pattern = BugPattern::WrongAttribute;
    std::string text;
    int variant_id = 0;

    friend bool operator==(const VQTemplate&, const VQTemplate&) = default;
};

struct VerificationQuestion {
    BugPattern pattern = BugPattern::WrongAttribute;
    std::string text;
    std::vector<TargetedSite> targets;
};

struct VQChain {
    std::vector<VerificationQuestion> questions;

    bool empty() const noexcept { return questions.empty(); }
    std::size_t size() const noexcept { return questions.size(); }
    std::vector<std::string> texts() const;
};

/// Templates keyed by (pattern, variant). Immutable once loaded.
class TemplateSet {
public:
    /// Throws TemplateFormatError unless the placeholder occurs exactly once,
    /// InvalidInput on a duplicate (pattern, variant) key.
    void add(VQTemplate t);

    const VQTemplate* find(BugPattern pattern, int variant) const;
    /// Variants present for both patterns, ascending.
    std::vector<int> variants() const;
    bool has_variant(int variant) const;
    std::size_t size() const noexcept { return templates_.size(); }
    const std::map<std::pair<BugPattern, int>, VQTemplate>& all() const noexcept { return templates_; }

private:
    std::map<std::pair<BugPattern, int>, VQTemplate> templates_;
};

/// Reads tab-separated records `pattern <TAB> variant <TAB> text`; `\n` in
/// text is written as the two characters `\` `n`, `\\` as a literal backslash.
/// Blank lines and lines starting with `#` are skipped.
TemplateSet load_templates(const std::filesystem::path& path);
/// Merges several template files into one set.
TemplateSet load_templates(const std::vector<std::filesystem::path>& paths);

VerificationQuestion instantiate(const VQTemplate& t, const std::vector<TargetedSite>& targets);

VQChain build_chain(const LocalizationReport& report, const TemplateSet& set, int variant);

}  // namespace vqforge
