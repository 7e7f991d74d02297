#pragma once

// Test execution, outcome classification and aggregation.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vqforge/code_model.hpp"

namespace vqforge {

inline constexpr std::string_view kMarker = "<insert generated code here>";

struct TestScript {
    std::string task_id;
    std::string name;  // template file stem, e.g. "test_1"
    std::string template_text;
    std::vector<std::string> interpreter_args{"python3"};
    double timeout_s = 30.0;
};

/// A task's tests in their fixed order.
struct TaskSpec {
    std::string task_id;
    std::vector<TestScript> tests;
};

/// Reads `<tasks_dir>/<task_id>/meta.json`:
/// `{"interpreter":["python3"], "timeout_s":30, "tests":["test_1.tmpl", ...]}`.
/// Each template must contain the marker exactly once. `timeout_s` falls back
/// to `default_timeout_s`.
TaskSpec load_task(const std::filesystem::path& tasks_dir, const std::string& task_id,
                   double default_timeout_s = 30.0);

/// Writes the script with its marker line replaced by `candidate` into a fresh
/// directory under `work_root` and returns the file path. Throws
/// MarkerMissing or IoError.
std::filesystem::path materialize(const TestScript& script, const SourceText& candidate,
                                  const std::filesystem::path& work_root);

/// Template text with the marker line replaced; the candidate is inserted
/// verbatim, followed by a newline if it lacks one.
std::string substitute_marker(const TestScript& script, std::string_view candidate);

struct RawExecution {
    int exit_code = 0;  // -signal when killed by a signal
    std::string stdout_text;
    std::string stderr_text;
    double duration_s = 0.0;
    bool timed_out = false;
};

/// Runs `interpreter... script` with the script's directory as working
/// directory and a minimal environment, killing the process group after
/// `timeout_s`. Throws SandboxSpawnFailure only.
RawExecution run_test(const std::filesystem::path& script, const std::vector<std::string>& interpreter,
                      double timeout_s);

enum class OutcomeKind { Pass, AssertionError, AttributeError, NameError, OtherError, Timeout };

struct TestOutcome {
    OutcomeKind kind = OutcomeKind::Pass;
    std::string exception_name;  // OtherError only

    static TestOutcome other(std::string name) { return {OutcomeKind::OtherError, std::move(name)}; }

    friend bool operator==(const TestOutcome&, const TestOutcome&) = default;
};

/// "Pass", "AssertionError", ..., "OtherError(<name>)", "Timeout".
std::string to_string(const TestOutcome& o);
TestOutcome test_outcome_from_string(std::string_view s);

/// Name of the exception on the last stderr line that looks like
/// `Name: ...` or `Name`; empty if none.
std::string final_exception_name(std::string_view stderr_text);

TestOutcome classify(const RawExecution& raw);

enum class SampleCategory { Runnable, AttributeError, NameError, Other };
inline constexpr std::size_t kCategoryCount = 4;

std::string_view to_string(SampleCategory c) noexcept;
SampleCategory category_of(const TestOutcome& o) noexcept;

/// Runnable if every outcome is Pass or AssertionError, otherwise the
/// category of the first outcome that is neither. Throws InvalidInput on an
/// empty list.
SampleCategory sample_category(const std::vector<TestOutcome>& outcomes);

using CategoryCounts = std::array<double, kCategoryCount>;  // indexed by SampleCategory

/// Each sample has weight 1 split evenly over its tests.
CategoryCounts normalized_counts(const std::vector<std::vector<TestOutcome>>& samples);
/// One unit per sample, on its sample category.
CategoryCounts sample_counts(const std::vector<std::vector<TestOutcome>>& samples);

/// Outcomes of one run, keyed by sample id.
using RunOutcomes = std::map<std::string, std::vector<TestOutcome>>;

struct AggregateReport {
    CategoryCounts test_level{};
    CategoryCounts sample_level{};
    std::size_t runs = 0;
    std::size_t samples = 0;
};

/// Mean over runs at both levels. Throws RunMismatch unless every run covers
/// the same sample ids, InvalidInput if there are no runs.
AggregateReport aggregate(const std::vector<RunOutcomes>& runs);

enum class RegressionCategory { ToAssertion, ToAttribute, ToName, ToOther, StayingCorrect };
inline constexpr std::size_t kRegressionCategoryCount = 5;

std::string_view to_string(RegressionCategory c) noexcept;

/// StayingCorrect if all Pass, otherwise decided by the first non-Pass outcome.
RegressionCategory regression_category(const std::vector<TestOutcome>& outcomes);

struct RegressionReport {
    std::array<double, kRegressionCategoryCount> counts{};  // mean over runs
    std::size_t runs = 0;
    std::size_t samples = 0;                 // originally correct samples considered
    std::vector<std::string> excluded;       // samples whose initial code did not pass
};

/// Considers only samples whose `before` outcomes are all Pass.
RegressionReport regression_check(const RunOutcomes& before, const std::vector<RunOutcomes>& after);

struct EvalConfig {
    std::filesystem::path work_root;  // defaults to the system temp directory
    int parallelism = 4;
    double default_timeout_s = 30.0;
    bool keep_workdirs = false;
};

struct EvaluationSummary {
    std::vector<std::filesystem::path> files;
    std::size_t executions = 0;
};

/// Runs every result of every `results_*.jsonl` in `results_dir` (plus each
/// sample's initial code once) against its task's tests. Writes
/// `evaluation_<mode>_<seed>.jsonl`, `evaluation_initial.jsonl` and raw logs
/// under `raw/`. Throws InvalidInput when there are no results.
EvaluationSummary evaluate(const std::filesystem::path& results_dir, const std::filesystem::path& tasks_dir,
                           const EvalConfig& cfg = {});

enum class ReportFormat { Csv, Text };

struct ReportOutput {
    std::string csv;   // all tables, blank-line separated
    std::string text;  // aligned rendering
};

/// Aggregates `evaluation_*.jsonl` in `results_dir` and writes
/// `report_test_level.csv`, `report_sample_level.csv`, `report_regression.csv`
/// (regression plans only) and `report.txt`. Throws InvalidInput when there
/// is nothing to report.
ReportOutput report(const std::filesystem::path& results_dir);

}  // namespace vqforge
