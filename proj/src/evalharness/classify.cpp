#include <algorithm>
#include <regex>
#include <set>

#include "vqforge/errors.hpp"
#include "vqforge/evalharness.hpp"

namespace vqforge {

std::string to_string(const TestOutcome& o) {
    switch (o.kind) {
        case OutcomeKind::Pass: return "Pass";
        case OutcomeKind::AssertionError: return "AssertionError";
        case OutcomeKind::AttributeError: return "AttributeError";
        case OutcomeKind::NameError: return "NameError";
        case OutcomeKind::OtherError: return "OtherError(" + o.exception_name + ")";
        case OutcomeKind::Timeout: return "Timeout";
    }
    return "Timeout";
}

TestOutcome test_outcome_from_string(std::string_view s) {
    if (s == "Pass") return {OutcomeKind::Pass, {}};
    if (s == "AssertionError") return {OutcomeKind::AssertionError, {}};
    if (s == "AttributeError") return {OutcomeKind::AttributeError, {}};
    if (s == "NameError") return {OutcomeKind::NameError, {}};
    if (s == "Timeout") return {OutcomeKind::Timeout, {}};
    constexpr std::string_view prefix = "OtherError(";
    if (s.substr(0, prefix.size()) == prefix && !s.empty() && s.back() == ')') {
        return TestOutcome::other(std::string(s.substr(prefix.size(), s.size() - prefix.size() - 1)));
    }
    throw InvalidInput("unknown test outcome '" + std::string(s) + "'");
}

std::string final_exception_name(std::string_view stderr_text) {
    static const std::regex line_re("^([A-Za-z_][A-Za-z0-9_.]*)(:|$)");
    std::string last;
    std::size_t start = 0;
    while (start < stderr_text.size()) {
        auto end = stderr_text.find('\n', start);
        if (end == std::string_view::npos) end = stderr_text.size();
        std::string line(stderr_text.substr(start, end - start));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::smatch m;
        if (std::regex_search(line, m, line_re)) last = m[1].str();
        start = end + 1;
    }
    return last;
}

TestOutcome classify(const RawExecution& raw) {
    if (raw.timed_out) return {OutcomeKind::Timeout, {}};
    if (raw.exit_code == 0) return {OutcomeKind::Pass, {}};
    std::string name = final_exception_name(raw.stderr_text);
    if (name == "AssertionError") return {OutcomeKind::AssertionError, {}};
    if (name == "AttributeError") return {OutcomeKind::AttributeError, {}};
    if (name == "NameError") return {OutcomeKind::NameError, {}};
    if (name.empty()) name = raw.exit_code < 0 ? "Signal" + std::to_string(-raw.exit_code) : "Unknown";
    return TestOutcome::other(std::move(name));
}

std::string_view to_string(SampleCategory c) noexcept {
    switch (c) {
        case SampleCategory::Runnable: return "Runnable";
        case SampleCategory::AttributeError: return "AttributeError";
        case SampleCategory::NameError: return "NameError";
        case SampleCategory::Other: return "Other";
    }
    return "Other";
}

SampleCategory category_of(const TestOutcome& o) noexcept {
    switch (o.kind) {
        case OutcomeKind::Pass:
        case OutcomeKind::AssertionError: return SampleCategory::Runnable;
        case OutcomeKind::AttributeError: return SampleCategory::AttributeError;
        case OutcomeKind::NameError: return SampleCategory::NameError;
        case OutcomeKind::OtherError:
        case OutcomeKind::Timeout: return SampleCategory::Other;
    }
    return SampleCategory::Other;
}

SampleCategory sample_category(const std::vector<TestOutcome>& outcomes) {
    if (outcomes.empty()) throw InvalidInput("sample has no test outcomes");
    for (const auto& o : outcomes) {
        auto c = category_of(o);
        if (c != SampleCategory::Runnable) return c;
    }
    return SampleCategory::Runnable;
}

CategoryCounts normalized_counts(const std::vector<std::vector<TestOutcome>>& samples) {
    CategoryCounts counts{};
    for (const auto& outcomes : samples) {
        if (outcomes.empty()) throw InvalidInput("sample has no test outcomes");
        const double weight = 1.0 / static_cast<double>(outcomes.size());
        for (const auto& o : outcomes) counts[static_cast<std::size_t>(category_of(o))] += weight;
    }
    return counts;
}

CategoryCounts sample_counts(const std::vector<std::vector<TestOutcome>>& samples) {
    CategoryCounts counts{};
    for (const auto& outcomes : samples) counts[static_cast<std::size_t>(sample_category(outcomes))] += 1.0;
    return counts;
}

AggregateReport aggregate(const std::vector<RunOutcomes>& runs) {
    if (runs.empty()) throw InvalidInput("no runs to aggregate");
    AggregateReport report;
    report.runs = runs.size();
    report.samples = runs.front().size();
    for (const auto& run : runs) {
        bool same = run.size() == runs.front().size() &&
                    std::equal(run.begin(), run.end(), runs.front().begin(),
                               [](const auto& a, const auto& b) { return a.first == b.first; });
        if (!same) throw RunMismatch("runs cover different sample sets");
        std::vector<std::vector<TestOutcome>> samples;
        samples.reserve(run.size());
        for (const auto& [id, outcomes] : run) samples.push_back(outcomes);
        auto t = normalized_counts(samples);
        auto s = sample_counts(samples);
        for (std::size_t c = 0; c < kCategoryCount; ++c) {
            report.test_level[c] += t[c];
            report.sample_level[c] += s[c];
        }
    }
    for (std::size_t c = 0; c < kCategoryCount; ++c) {
        report.test_level[c] /= static_cast<double>(runs.size());
        report.sample_level[c] /= static_cast<double>(runs.size());
    }
    return report;
}

std::string_view to_string(RegressionCategory c) noexcept {
    switch (c) {
        case RegressionCategory::ToAssertion: return "FromCorrectToAssertion";
        case RegressionCategory::ToAttribute: return "FromCorrectToAttribute";
        case RegressionCategory::ToName: return "FromCorrectToName";
        case RegressionCategory::ToOther: return "FromCorrectToOther";
        case RegressionCategory::StayingCorrect: return "StayingCorrect";
    }
    return "StayingCorrect";
}

RegressionCategory regression_category(const std::vector<TestOutcome>& outcomes) {
    for (const auto& o : outcomes) {
        switch (o.kind) {
            case OutcomeKind::Pass: continue;
            case OutcomeKind::AssertionError: return RegressionCategory::ToAssertion;
            case OutcomeKind::AttributeError: return RegressionCategory::ToAttribute;
            case OutcomeKind::NameError: return RegressionCategory::ToName;
            case OutcomeKind::OtherError:
            case OutcomeKind::Timeout: return RegressionCategory::ToOther;
        }
    }
    return RegressionCategory::StayingCorrect;
}

RegressionReport regression_check(const RunOutcomes& before, const std::vector<RunOutcomes>& after) {
    RegressionReport report;
    report.runs = after.size();
    std::set<std::string> correct;
    for (const auto& [id, outcomes] : before) {
        bool all_pass = !outcomes.empty() && std::all_of(outcomes.begin(), outcomes.end(), [](const TestOutcome& o) {
            return o.kind == OutcomeKind::Pass;
        });
        if (all_pass) {
            correct.insert(id);
        } else {
            report.excluded.push_back(id);
        }
    }
    report.samples = correct.size();
    if (after.empty()) return report;
    for (const auto& run : after) {
        for (const auto& id : correct) {
            auto it = run.find(id);
            if (it == run.end()) throw RunMismatch("run lacks originally correct sample '" + id + "'");
            report.counts[static_cast<std::size_t>(regression_category(it->second))] += 1.0;
        }
    }
    for (auto& c : report.counts) c /= static_cast<double>(after.size());
    return report;
}

}  // namespace vqforge
