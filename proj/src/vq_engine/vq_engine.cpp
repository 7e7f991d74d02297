#include "vqforge/vq_engine.hpp"

#include <charconv>
#include <fstream>
#include <set>

namespace vqforge {

std::string_view to_string(BugPattern p) noexcept {
    return p == BugPattern::WrongAttribute ? "WrongAttribute" : "HallucinatedObject";
}

BugPattern bug_pattern_from_string(std::string_view s) {
    if (s == "WrongAttribute") return BugPattern::WrongAttribute;
    if (s == "HallucinatedObject") return BugPattern::HallucinatedObject;
    throw InvalidInput("unknown bug pattern '" + std::string(s) + "'");
}

SiteKind site_kind_for(BugPattern p) noexcept {
    return p == BugPattern::WrongAttribute ? SiteKind::AttributeCall : SiteKind::HallucinatedCall;
}

std::vector<std::string> VQChain::texts() const {
    std::vector<std::string> out;
    out.reserve(questions.size());
    for (const auto& q : questions) out.push_back(q.text);
    return out;
}

namespace {

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + needle.size())) ++n;
    return n;
}

std::string unescape(std::string_view text, const std::string& where) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '\\') {
            out += text[i];
            continue;
        }
        if (i + 1 == text.size()) throw TemplateFormatError(where + ": dangling backslash");
        char next = text[++i];
        if (next == 'n') {
            out += '\n';
        } else if (next == 't') {
            out += '\t';
        } else if (next == '\\') {
            out += '\\';
        } else {
            throw TemplateFormatError(where + ": unknown escape '\\" + std::string(1, next) + "'");
        }
    }
    return out;
}

void load_into(TemplateSet& set, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read template file " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        auto tab1 = line.find('\t');
        auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos) throw TemplateFormatError(where + ": expected three tab-separated fields");
        VQTemplate t;
        try {
            t.pattern = bug_pattern_from_string(std::string_view(line).substr(0, tab1));
        } catch (const InvalidInput& e) {
            throw TemplateFormatError(where + ": " + e.what());
        }
        std::string_view variant = std::string_view(line).substr(tab1 + 1, tab2 - tab1 - 1);
        auto [ptr, ec] = std::from_chars(variant.data(), variant.data() + variant.size(), t.variant_id);
        if (ec != std::errc{} || ptr != variant.data() + variant.size() || t.variant_id < 0) {
            throw TemplateFormatError(where + ": bad variant id '" + std::string(variant) + "'");
        }
        t.text = unescape(std::string_view(line).substr(tab2 + 1), where);
        try {
            set.add(std::move(t));
        } catch (const TemplateFormatError& e) {
            throw TemplateFormatError(where + ": " + e.what());
        } catch (const InvalidInput& e) {
            throw TemplateFormatError(where + ": " + e.what());
        }
    }
}

}  // namespace

void TemplateSet::add(VQTemplate t) {
    if (t.text.empty()) throw TemplateFormatError("template text is empty");
    auto n = count_occurrences(t.text, kPlaceholder);
    if (n != 1) {
        throw TemplateFormatError("template must contain " + std::string(kPlaceholder) + " exactly once, found " +
                                  std::to_string(n));
    }
    auto key = std::make_pair(t.pattern, t.variant_id);
    if (templates_.count(key)) {
        throw InvalidInput("duplicate template for " + std::string(to_string(t.pattern)) + " variant " +
                           std::to_string(t.variant_id));
    }
    templates_.emplace(key, std::move(t));
}

const VQTemplate* TemplateSet::find(BugPattern pattern, int variant) const {
    auto it = templates_.find({pattern, variant});
    return it == templates_.end() ? nullptr : &it->second;
}

std::vector<int> TemplateSet::variants() const {
    std::set<int> ids;
    for (const auto& [key, t] : templates_) {
        if (has_variant(key.second)) ids.insert(key.second);
    }
    return {ids.begin(), ids.end()};
}

bool TemplateSet::has_variant(int variant) const {
    return find(BugPattern::WrongAttribute, variant) && find(BugPattern::HallucinatedObject, variant);
}

TemplateSet load_templates(const std::filesystem::path& path) {
    TemplateSet set;
    load_into(set, path);
    return set;
}

TemplateSet load_templates(const std::vector<std::filesystem::path>& paths) {
    TemplateSet set;
    for (const auto& p : paths) load_into(set, p);
    return set;
}

VerificationQuestion instantiate(const VQTemplate& t, const std::vector<TargetedSite>& targets) {
    if (targets.empty()) throw EmptyTargets("no targets for " + std::string(to_string(t.pattern)) + " template");
    const SiteKind expected = site_kind_for(t.pattern);
    std::string joined;
    for (const auto& site : targets) {
        if (site.kind != expected) {
            throw KindMismatch("site '" + site.rendering + "' is " + std::string(to_string(site.kind)) + ", template " +
                               std::string(to_string(t.pattern)) + " expects " + std::string(to_string(expected)));
        }
        if (!joined.empty()) joined += kTargetSeparator;
        joined += site.rendering;
    }
    auto pos = t.text.find(kPlaceholder);
    if (pos == std::string::npos) throw TemplateFormatError("template has no placeholder");
    VerificationQuestion q;
    q.pattern = t.pattern;
    q.text = t.text.substr(0, pos) + joined + t.text.substr(pos + kPlaceholder.size());
    q.targets = targets;
    return q;
}

VQChain build_chain(const LocalizationReport& report, const TemplateSet& set, int variant) {
    if (!set.has_variant(variant)) throw UnknownVariant("template variant " + std::to_string(variant) + " is not loaded");
    VQChain chain;
    if (!report.attribute_targets.empty()) {
        chain.questions.push_back(
            instantiate(*set.find(BugPattern::WrongAttribute, variant), report.attribute_targets));
    }
    if (!report.hallucination_targets.empty()) {
        chain.questions.push_back(
            instantiate(*set.find(BugPattern::HallucinatedObject, variant), report.hallucination_targets));
    }
    return chain;
}

}  // namespace vqforge
