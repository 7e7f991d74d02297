#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "vqforge/errors.hpp"
#include "vqforge/evalharness.hpp"
#include "vqforge/pipeline.hpp"

namespace vqforge {

using nlohmann::json;

namespace {

struct TestRun {
    std::string test;
    TestOutcome outcome;
    RawExecution raw;
};

struct Candidate {
    std::string task_id;
    std::string code;
    friend bool operator<(const Candidate& a, const Candidate& b) {
        return std::tie(a.task_id, a.code) < std::tie(b.task_id, b.code);
    }
};

std::vector<std::filesystem::path> files_matching(const std::filesystem::path& dir, std::string_view prefix,
                                                  std::string_view suffix) {
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.size() > prefix.size() + suffix.size() && name.rfind(prefix, 0) == 0 &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<TestRun> execute(const TaskSpec& task, const std::string& code, const EvalConfig& cfg) {
    const auto root = cfg.work_root.empty() ? std::filesystem::temp_directory_path() : cfg.work_root;
    const SourceText candidate(code, "<candidate>");
    std::vector<TestRun> runs;
    for (const auto& test : task.tests) {
        auto path = materialize(test, candidate, root);
        RawExecution raw = run_test(path, test.interpreter_args, test.timeout_s);
        if (!cfg.keep_workdirs) {
            std::error_code ec;
            std::filesystem::remove_all(path.parent_path(), ec);
        }
        runs.push_back(TestRun{test.name, classify(raw), std::move(raw)});
    }
    return runs;
}

json outcomes_json(const std::vector<TestRun>& runs) {
    json out = json::array();
    for (const auto& r : runs) out.push_back({{"test", r.test}, {"outcome", to_string(r.outcome)}});
    return out;
}

std::string category_name(const std::vector<TestRun>& runs) {
    std::vector<TestOutcome> outcomes;
    for (const auto& r : runs) outcomes.push_back(r.outcome);
    return std::string(to_string(sample_category(outcomes)));
}

void write_raw_logs(const std::filesystem::path& dir, const std::vector<TestRun>& runs) {
    std::filesystem::create_directories(dir);
    for (const auto& r : runs) {
        std::ofstream out(dir / (r.test + ".log"), std::ios::binary | std::ios::trunc);
        out << "outcome: " << to_string(r.outcome) << "\nexit_code: " << r.raw.exit_code
            << "\ntimed_out: " << (r.raw.timed_out ? "true" : "false") << "\n--- stdout ---\n"
            << r.raw.stdout_text << "\n--- stderr ---\n"
            << r.raw.stderr_text;
        if (!out) throw IoError("cannot write raw log under " + dir.string());
    }
}

void write_lines(const std::filesystem::path& path, const std::vector<json>& lines) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const auto& l : lines) out << l.dump() << '\n';
    if (!out) throw IoError("cannot write " + path.string());
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v + 0.0);  // + 0.0 folds -0.0
    return buf;
}

struct Table {
    std::string corner;
    std::vector<std::string> columns;
    std::vector<std::string> rows;
    std::vector<std::vector<double>> values;  // [row][column]

    std::string csv() const {
        std::string out = corner;
        for (const auto& c : columns) out += "," + c;
        out += '\n';
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out += rows[r];
            for (double v : values[r]) out += "," + fmt(v);
            out += '\n';
        }
        return out;
    }

    std::string text() const {
        std::size_t first = corner.size();
        for (const auto& r : rows) first = std::max(first, r.size());
        std::vector<std::size_t> widths;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            std::size_t w = columns[c].size();
            for (const auto& row : values) w = std::max(w, fmt(row[c]).size());
            widths.push_back(w);
        }
        auto pad_right = [](const std::string& s, std::size_t w) { return s + std::string(w - s.size(), ' '); };
        auto pad_left = [](const std::string& s, std::size_t w) { return std::string(w - s.size(), ' ') + s; };
        std::string out = pad_right(corner, first);
        for (std::size_t c = 0; c < columns.size(); ++c) out += "  " + pad_left(columns[c], widths[c]);
        out += '\n';
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out += pad_right(rows[r], first);
            for (std::size_t c = 0; c < columns.size(); ++c) out += "  " + pad_left(fmt(values[r][c]), widths[c]);
            out += '\n';
        }
        return out;
    }
};

RunOutcomes read_evaluation(const std::filesystem::path& path, std::string* mode_label) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    RunOutcomes run;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            if (mode_label) *mode_label = j.at("mode").get<std::string>();
            std::vector<TestOutcome> outcomes;
            for (const auto& o : j.at("outcomes")) outcomes.push_back(test_outcome_from_string(o.at("outcome").get<std::string>()));
            run[j.at("sample_id").get<std::string>()] = std::move(outcomes);
        } catch (const json::exception& e) {
            throw InvalidInput(path.string() + ": " + e.what());
        }
    }
    return run;
}

}  // namespace

EvaluationSummary evaluate(const std::filesystem::path& results_dir, const std::filesystem::path& tasks_dir,
                           const EvalConfig& cfg) {
    auto result_files = files_matching(results_dir, "results_", ".jsonl");
    std::vector<std::vector<RepairResult>> results;
    std::size_t total = 0;
    for (const auto& f : result_files) {
        results.push_back(load_results(f));
        total += results.back().size();
    }
    if (total == 0) throw InvalidInput("no results in " + results_dir.string());

    std::map<std::string, TaskSpec> tasks;
    std::map<std::string, const RepairResult*> initial;  // sample id -> first result seen
    std::set<Candidate> unique;
    for (const auto& file : results) {
        for (const auto& r : file) {
            if (!tasks.count(r.task_id)) tasks.emplace(r.task_id, load_task(tasks_dir, r.task_id, cfg.default_timeout_s));
            initial.emplace(r.sample_id, &r);
            unique.insert({r.task_id, r.repaired.content()});
            unique.insert({r.task_id, r.initial.content()});
        }
    }

    // Identical candidates for the same task run once.
    std::vector<Candidate> jobs(unique.begin(), unique.end());
    std::vector<std::vector<TestRun>> outputs(jobs.size());
    std::size_t next = 0;
    std::mutex mu;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(mu);
                if (next == jobs.size() || failure) return;
                i = next++;
            }
            try {
                outputs[i] = execute(tasks.at(jobs[i].task_id), jobs[i].code, cfg);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    int workers = std::max(1, std::min<int>(cfg.parallelism, static_cast<int>(jobs.size())));
    for (int t = 0; t < workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);

    auto lookup = [&](const std::string& task, const std::string& code) -> const std::vector<TestRun>& {
        auto it = std::lower_bound(jobs.begin(), jobs.end(), Candidate{task, code});
        return outputs[static_cast<std::size_t>(it - jobs.begin())];
    };

    EvaluationSummary summary;
    for (const auto& o : outputs) summary.executions += o.size();
    const auto raw_root = results_dir / "raw";
    for (const auto& file : results) {
        if (file.empty()) continue;
        const std::string label = file.front().mode.label() + "_" + std::to_string(file.front().seed);
        std::vector<json> lines;
        for (const auto& r : file) {
            const auto& runs = lookup(r.task_id, r.repaired.content());
            write_raw_logs(raw_root / label / r.sample_id, runs);
            lines.push_back({{"sample_id", r.sample_id},
                             {"task_id", r.task_id},
                             {"mode", r.mode.label()},
                             {"seed", r.seed},
                             {"status", std::string(to_string(r.status))},
                             {"outcomes", outcomes_json(runs)},
                             {"category", category_name(runs)}});
        }
        auto path = results_dir / ("evaluation_" + label + ".jsonl");
        write_lines(path, lines);
        summary.files.push_back(path);
    }
    std::vector<json> lines;
    for (const auto& [id, r] : initial) {
        const auto& runs = lookup(r->task_id, r->initial.content());
        write_raw_logs(raw_root / "initial" / id, runs);
        lines.push_back({{"sample_id", id},
                         {"task_id", r->task_id},
                         {"mode", "initial"},
                         {"outcomes", outcomes_json(runs)},
                         {"category", category_name(runs)}});
    }
    auto path = results_dir / "evaluation_initial.jsonl";
    write_lines(path, lines);
    summary.files.push_back(path);
    return summary;
}

ReportOutput report(const std::filesystem::path& results_dir) {
    std::map<RepairMode, std::vector<RunOutcomes>> by_mode;
    for (const auto& f : files_matching(results_dir, "evaluation_", ".jsonl")) {
        if (f.filename() == "evaluation_initial.jsonl") continue;
        std::string label;
        RunOutcomes run = read_evaluation(f, &label);
        if (run.empty()) continue;
        by_mode[RepairMode::parse(label)].push_back(std::move(run));
    }
    if (by_mode.empty()) throw InvalidInput("no results in " + results_dir.string());

    bool regression = false;
    if (std::filesystem::exists(results_dir / "manifest.json")) {
        std::ifstream in(results_dir / "manifest.json");
        try {
            regression = json::parse(in).value("kind", std::string("repair")) == "regression";
        } catch (const json::exception& e) {
            throw InvalidInput("manifest.json: " + std::string(e.what()));
        }
    }

    Table test_level{"criteria", {}, {"Runnable cases", "Attribute errors", "Name errors", "Other errors"}, {}};
    Table sample_level{"criteria", {}, {"Runnable code", "Attribute errors", "Name errors", "Other errors"}, {}};
    test_level.values.assign(kCategoryCount, {});
    sample_level.values.assign(kCategoryCount, {});
    std::size_t samples = 0;
    std::size_t runs = 0;
    for (const auto& [mode, mode_runs] : by_mode) {
        AggregateReport agg = aggregate(mode_runs);
        test_level.columns.push_back(mode.display_name());
        sample_level.columns.push_back(mode.display_name());
        for (std::size_t c = 0; c < kCategoryCount; ++c) {
            test_level.values[c].push_back(agg.test_level[c]);
            sample_level.values[c].push_back(agg.sample_level[c]);
        }
        samples = std::max(samples, agg.samples);
        runs = std::max(runs, agg.runs);
    }

    ReportOutput out;
    const std::string scope = " (" + std::to_string(samples) + " samples, mean over " + std::to_string(runs) + " runs)";
    std::string text = "Average number of test cases per category, normalized by tests per task" + scope + "\n" +
                       test_level.text() + "\nAverage number of samples per category" + scope + "\n" +
                       sample_level.text();
    out.csv = test_level.csv() + "\n" + sample_level.csv();

    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream f(results_dir / name, std::ios::binary | std::ios::trunc);
        f << body;
        if (!f) throw IoError("cannot write " + (results_dir / name).string());
    };
    write("report_test_level.csv", test_level.csv());
    write("report_sample_level.csv", sample_level.csv());

    if (regression) {
        auto initial_path = results_dir / "evaluation_initial.jsonl";
        if (!std::filesystem::exists(initial_path)) throw InvalidInput("regression report needs evaluation_initial.jsonl");
        RunOutcomes before = read_evaluation(initial_path, nullptr);
        Table table{"Error Type",
                    {},
                    {"From correct code to Assertion errors", "From correct code to Attribute errors",
                     "From correct code to Name errors", "From correct code to Other errors", "Staying correct"},
                    {}};
        table.values.assign(kRegressionCategoryCount, {});
        RegressionReport last;
        for (const auto& [mode, mode_runs] : by_mode) {
            last = regression_check(before, mode_runs);
            table.columns.push_back(mode.display_name());
            for (std::size_t c = 0; c < kRegressionCategoryCount; ++c) table.values[c].push_back(last.counts[c]);
        }
        text += "\nAverage number of originally correct samples per outcome after repair (" +
                std::to_string(last.samples) + " correct samples";
        if (!last.excluded.empty()) text += ", " + std::to_string(last.excluded.size()) + " initially failing excluded";
        text += ")\n" + table.text();
        out.csv += "\n" + table.csv();
        write("report_regression.csv", table.csv());
    }
    out.text = text;
    write("report.txt", text);
    return out;
}

}  // namespace vqforge
