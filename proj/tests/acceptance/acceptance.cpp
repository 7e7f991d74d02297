// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "classification_support.hpp"
#include "support.hpp"
#include "vqforge/cli.hpp"
#include "vqforge/evalharness.hpp"
#include "vqforge/localizer.hpp"
#include "vqforge/pipeline.hpp"
#include "vqforge/vq_engine.hpp"

namespace vqforge {
namespace {

using nlohmann::json;
using testing::data_dir;
using testing::fixture_dir;
using testing::read_file;
using testing::read_json;
using testing::shipped_data_dir;
using testing::TempDir;

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

int cli(std::vector<std::string> args, std::string* out = nullptr) {
    args.insert(args.begin(), "vqforge");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream o, e;
    int code = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
    if (out) *out = o.str();
    if (code != kExitOk) std::cerr << e.str();
    return code;
}

LocalizerConfig localizer_config() {
    LocalizerConfig cfg;
    cfg.builtins = load_builtins(shipped_data_dir() / "builtins.txt");
    return cfg;
}

/// CSV table as rows of cells.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> cells;
        std::istringstream cells_in(line);
        for (std::string cell; std::getline(cells_in, cell, ',');) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

double cell(const std::vector<std::vector<std::string>>& table, const std::string& row, const std::string& column) {
    const auto& header = table.at(0);
    auto col = std::find(header.begin(), header.end(), column) - header.begin();
    for (const auto& r : table) {
        if (r.at(0) == row) return std::stod(r.at(static_cast<std::size_t>(col)));
    }
    throw std::runtime_error("no row " + row);
}

Verdict localizer_oracle_suite() {
    Verdict v;
    auto corpus = read_json(data_dir() / "localizer_corpus.json")["cases"];
    auto cfg = localizer_config();
    std::size_t injected = 0, recalled = 0, expected = 0, clean = 0, clean_flagged = 0;
    auto start = std::chrono::steady_clock::now();
    for (const auto& c : corpus) {
        auto report = localize(SourceText(c["source"], c["id"]), cfg);
        std::set<std::string> flagged;
        for (const auto& s : report.hallucination_targets) flagged.insert(s.name);
        for (const auto& name : c["name_errors"]) {
            ++expected;
            if (flagged.count(name)) ++recalled;
        }
        if (c["injected"]) {
            ++injected;
        } else {
            ++clean;
            if (!flagged.empty()) ++clean_flagged;
        }
    }
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.require(corpus.size() >= 30 && injected >= 15 && clean >= 15, "corpus too small");
    v.require(expected > 0 && recalled == expected,
              "recall " + std::to_string(recalled) + "/" + std::to_string(expected));
    v.require(static_cast<double>(clean_flagged) <= 0.1 * static_cast<double>(clean),
              "clean flagged " + std::to_string(clean_flagged) + "/" + std::to_string(clean));
    v.require(elapsed < 10.0, "took " + std::to_string(elapsed) + " s");
    if (v.pass) {
        std::ostringstream d;
        d << "recall " << recalled << "/" << expected << ", clean flagged " << clean_flagged << "/" << clean << ", "
          << elapsed << " s";
        v.detail = d.str();
    }
    return v;
}

Verdict worked_example() {
    Verdict v;
    std::string out;
    int code = cli({"localize", (fixture_dir() / "replay/samples/match_pubdate.py").string()}, &out);
    v.require(code == kExitOk, "exit " + std::to_string(code));
    if (!v.pass) return v;
    auto j = json::parse(out);
    std::set<std::string> attrs, calls;
    for (const auto& s : j["attribute_targets"]) attrs.insert(s["rendering"]);
    for (const auto& s : j["hallucination_targets"]) calls.insert(s["rendering"]);
    v.require(j["attribute_targets"].size() == 2 &&
                  attrs == std::set<std::string>{"matched_pubdate.first()", "pubdate.strip()"},
              "attribute targets differ");
    v.require(j["hallucination_targets"].size() == 1 && calls == std::set<std::string>{"get_element_text()"},
              "hallucination targets differ");
    return v;
}

Verdict vq_golden() {
    Verdict v;
    auto set = load_templates(std::vector<std::filesystem::path>{shipped_data_dir() / "templates/canonical.tsv",
                                                                 shipped_data_dir() / "templates/rephrased.tsv"});
    TargetedSite a{SiteKind::AttributeCall, "matched_pubdate.first()", "matched_pubdate", "first", {}};
    TargetedSite b{SiteKind::AttributeCall, "pubdate.strip()", "pubdate", "strip", {}};
    auto q = instantiate(*set.find(BugPattern::WrongAttribute, 0), {a, b});
    v.require(q.text ==
                  "Can you verify that the following attribute calls will not generate attribute error: "
                  "matched_pubdate.first(), pubdate.strip(). If any attribute error may occur, repair the code.",
              "golden attribute question differs");
    v.require(set.size() == 12 && set.variants() == std::vector<int>{0, 1, 2, 3, 4, 5}, "expected 2x(1+5) templates");
    for (const auto& [key, t] : set.all()) {
        auto first = t.text.find(kPlaceholder);
        v.require(first != std::string::npos && t.text.find(kPlaceholder, first + 1) == std::string::npos,
                  "placeholder invariant broken for " + std::string(to_string(t.pattern)) + " v" +
                      std::to_string(t.variant_id));
    }
    return v;
}

Verdict classification_exactness() {
    Verdict v;
    auto cases = read_json(data_dir() / "classification_cases.json")["cases"];
    v.require(cases.size() == 12, "expected 12 cases");
    TempDir work;
    std::size_t exact = 0;
    for (const auto& c : cases) {
        auto result = testing::run_classification_case(c, work.path());
        std::vector<std::string> got;
        for (const auto& o : result.outcomes) got.push_back(to_string(o));
        bool ok = got == c["outcomes"].get<std::vector<std::string>>() &&
                  to_string(result.category) == c["category"].get<std::string>();
        if (ok) ++exact;
        v.require(ok, c["name"].get<std::string>());
    }
    if (v.pass) v.detail = std::to_string(exact) + "/12 exact";
    return v;
}

Verdict aggregation_conservation() {
    Verdict v;
    std::mt19937_64 rng(20240601);
    double worst = 0;
    const int sets = 1000;
    for (int i = 0; i < sets; ++i) {
        auto samples = std::uniform_int_distribution<std::size_t>(1, 80)(rng);
        auto runs = testing::random_runs(rng, samples, 5);
        for (const auto& run : runs) {
            std::vector<std::vector<TestOutcome>> lists;
            for (const auto& [id, o] : run) lists.push_back(o);
            auto t = normalized_counts(lists);
            auto s = sample_counts(lists);
            worst = std::max(worst, std::abs(t[0] + t[1] + t[2] + t[3] - static_cast<double>(samples)));
            worst = std::max(worst, std::abs(s[0] + s[1] + s[2] + s[3] - static_cast<double>(samples)));
        }
        auto report = aggregate(runs);
        auto bf = testing::brute_force_means(runs);
        for (auto c : {SampleCategory::Runnable, SampleCategory::AttributeError, SampleCategory::NameError,
                       SampleCategory::Other}) {
            auto k = static_cast<std::size_t>(c);
            worst = std::max(worst, std::abs(report.test_level[k] - testing::level_value(bf, true, c)));
            worst = std::max(worst, std::abs(report.sample_level[k] - testing::level_value(bf, false, c)));
        }
    }
    v.require(worst <= 1e-9, "max deviation " + std::to_string(worst));
    if (v.pass) {
        std::ostringstream d;
        d << sets << " sets x 5 runs, max deviation " << worst;
        v.detail = d.str();
    }
    return v;
}

/// experiment + evaluate + report for `plan` into `dir`; returns the exit code.
int run_fixture(const std::filesystem::path& plan, const std::filesystem::path& tasks, const std::filesystem::path& dir) {
    int code = cli({"--output_dir", dir.string(), "experiment", plan.string()});
    if (code != kExitOk) return code;
    code = cli({"evaluate", dir.string(), tasks.string()});
    if (code != kExitOk) return code;
    return cli({"report", dir.string()});
}

Verdict replay_end_to_end() {
    Verdict v;
    TempDir a, b;
    const auto plan = fixture_dir() / "replay/plan.json";
    const auto tasks = fixture_dir() / "replay/tasks";
    v.require(run_fixture(plan, tasks, a.path()) == kExitOk, "first invocation failed");
    v.require(run_fixture(plan, tasks, b.path()) == kExitOk, "second invocation failed");
    if (!v.pass) return v;
    for (const char* f : {"report_test_level.csv", "report_sample_level.csv", "report.txt"}) {
        v.require(read_file(a / f) == read_file(b / f), std::string(f) + " differs between invocations");
    }
    auto table = parse_csv(read_file(a / "report_sample_level.csv"));
    double before = cell(table, "Attribute errors", "No VQ") + cell(table, "Name errors", "No VQ");
    double after = cell(table, "Attribute errors", "Targeted VQs") + cell(table, "Name errors", "Targeted VQs");
    v.require(before == 3.0, "No VQ targeted-error samples " + std::to_string(before));
    v.require(after == 0.0, "Targeted VQs targeted-error samples " + std::to_string(after));
    if (v.pass) v.detail = "reports identical; targeted-error samples 3 -> 0";
    return v;
}

class ForbiddenBackend final : public ChatBackend {
public:
    ChatExchange complete(const ChatRequest&) override {
        ++calls;
        throw BackendUnavailable("pass-through must not call the backend");
    }
    BackendKind kind() const noexcept override { return BackendKind::Mock; }
    int calls = 0;
};

Verdict pass_through() {
    Verdict v;
    auto corpus = read_json(data_dir() / "passthrough_corpus.json")["cases"];
    v.require(corpus.size() == 20, "expected 20 snippets");
    TemplateSet templates;
    auto deps = make_pipeline_deps(default_config(), templates);
    auto backend = std::make_unique<ForbiddenBackend>();
    auto* forbidden = backend.get();
    LlmGateway gateway(std::move(backend));
    deps.gateway = &gateway;
    int mutations = 0;
    for (const auto& c : corpus) {
        Sample s{c["id"], c["id"], SourceText(c["source"], c["id"])};
        for (auto mode : {RepairMode::no_vq(), RepairMode::targeted()}) {
            auto r = repair_sample(s, mode, 1, deps);
            if (r.repaired.content() != s.source.content() || r.status != RepairStatus::PassThrough || !r.chain.empty()) {
                ++mutations;
            }
        }
    }
    v.require(mutations == 0, std::to_string(mutations) + " mutations");
    v.require(forbidden->calls == 0, "backend was called");
    if (v.pass) v.detail = "40 repairs, 0 mutations";
    return v;
}

Verdict rephrasing_harness() {
    Verdict v;
    TempDir dir;
    v.require(run_fixture(fixture_dir() / "replay/rephrasing.json", fixture_dir() / "replay/tasks", dir.path()) ==
                  kExitOk,
              "rephrasing run failed");
    if (!v.pass) return v;
    std::vector<std::string> expected_header{"criteria"};
    for (int k = 1; k <= 5; ++k) expected_header.push_back("Targeted VQs (rephrasing " + std::to_string(k) + ")");
    for (const char* f : {"report_test_level.csv", "report_sample_level.csv"}) {
        auto table = parse_csv(read_file(dir / f));
        v.require(!table.empty() && table[0] == expected_header, std::string(f) + ": unexpected columns");
        for (const auto& row : table) v.require(row.size() == 6, std::string(f) + ": ragged row");
    }

    // Target lists agree across variants for every (sample, seed); prompts differ.
    std::map<std::pair<std::string, std::int64_t>, std::vector<json>> targets;
    std::map<std::pair<std::string, std::int64_t>, std::set<std::string>> prompts;
    for (int k = 1; k <= 5; ++k) {
        for (std::int64_t seed : {1, 2}) {
            for (const auto& r : load_results(dir / results_file_name(RepairMode::targeted(k), seed))) {
                json t = json::array();
                for (const auto& q : r.chain.questions) {
                    for (const auto& site : q.targets) t.push_back(to_json(site));
                }
                targets[{r.sample_id, seed}].push_back(t);
                if (r.exchange) prompts[{r.sample_id, seed}].insert(r.exchange->request.messages.back().content);
            }
        }
    }
    for (const auto& [key, lists] : targets) {
        v.require(lists.size() == 5, key.first + ": missing variants");
        for (const auto& t : lists) v.require(t == lists.front(), key.first + ": target lists differ");
        v.require(prompts[key].size() == 5, key.first + ": prompts do not differ across variants");
    }
    if (v.pass) v.detail = "5 columns, identical schema and target lists";
    return v;
}

}  // namespace
}  // namespace vqforge

int main() {
    using namespace vqforge;
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"localizer oracle suite", localizer_oracle_suite},
        {"match_pubdate worked example", worked_example},
        {"verification-question golden tests", vq_golden},
        {"classification exactness", classification_exactness},
        {"aggregation conservation", aggregation_conservation},
        {"replay end-to-end", replay_end_to_end},
        {"pass-through guarantees", pass_through},
        {"rephrasing harness", rephrasing_harness},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        if (!v.pass) ++failed;
        std::cout << "criterion " << i + 1 << " (" << criteria[i].first << "): " << (v.pass ? "PASS" : "FAIL");
        if (!v.detail.empty()) std::cout << " - " << v.detail;
        std::cout << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
