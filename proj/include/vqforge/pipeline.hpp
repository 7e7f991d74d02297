#pragma once

// Per-sample repair and multi-run experiments.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vqforge/llm_gateway.hpp"
#include "vqforge/localizer.hpp"
#include "vqforge/prompting.hpp"
#include "vqforge/vq_engine.hpp"

namespace vqforge {

enum class ModeKind { NoVQ, GeneralVQ, TargetedVQ };

struct RepairMode {
    ModeKind kind = ModeKind::NoVQ;
    int variant = 0;  // TargetedVQ only

    static RepairMode no_vq() { return {ModeKind::NoVQ, 0}; }
    static RepairMode general() { return {ModeKind::GeneralVQ, 0}; }
    static RepairMode targeted(int variant = 0) { return {ModeKind::TargetedVQ, variant}; }

    /// "no-vq", "general", "targeted-v<N>".
    std::string label() const;
    /// Report column title, e.g. "Targeted VQs (rephrasing 2)".
    std::string display_name() const;
    /// Accepts the labels above, plus "targeted" for variant 0. Throws
    /// InvalidInput.
    static RepairMode parse(std::string_view label);

    friend bool operator==(const RepairMode&, const RepairMode&) = default;
    friend auto operator<=>(const RepairMode&, const RepairMode&) = default;
};

struct Sample {
    std::string id;
    std::string task_id;
    SourceText source;
};

enum class RepairStatus { Repaired, PassThrough, ExtractionFailed, LocalizationFailed, BackendFailed };

std::string_view to_string(RepairStatus s) noexcept;
RepairStatus repair_status_from_string(std::string_view s);

struct RepairResult {
    std::string sample_id;
    std::string task_id;
    RepairMode mode;
    std::int64_t seed = 0;
    SourceText initial;
    VQChain chain;
    std::optional<ChatExchange> exchange;
    SourceText repaired;
    RepairStatus status = RepairStatus::PassThrough;
    std::string detail;  // failure diagnostics, empty otherwise
};

struct DecodingConfig {
    std::string model = "gpt-3.5-turbo";
    double temperature = 0.2;
    int max_tokens = 1024;
};

/// Everything repair_sample needs besides the sample itself.
struct PipelineDeps {
    LlmGateway* gateway = nullptr;       // may be null when only NoVQ runs
    const TemplateSet* templates = nullptr;
    LocalizerConfig localizer;
    std::vector<FewShotExemplar> exemplars;
    DecodingConfig decoding;
};

/// Repairs one sample. Syntax errors and extraction failures become statuses;
/// backend errors propagate so a single-shot caller can report them.
RepairResult repair_sample(const Sample& sample, const RepairMode& mode, std::int64_t seed, const PipelineDeps& deps);

/// Builds the chat request for a prompt; exposed for tooling and tests.
ChatRequest make_chat_request(const RepairPrompt& prompt, std::int64_t seed, const DecodingConfig& decoding);

enum class PlanKind { Repair, Regression };

struct ExperimentPlan {
    std::vector<Sample> samples;
    std::vector<RepairMode> modes;
    int runs = 5;
    std::vector<std::int64_t> seeds{1, 2, 3, 4, 5};
    PlanKind kind = PlanKind::Repair;
    nlohmann::json config = nlohmann::json::object();  // overrides for the global config

    /// Throws InvalidInput unless runs == seeds.size(), modes are non-empty
    /// and sample ids are unique.
    void validate() const;
};

/// Reads `{"samples":[{"id","task_id","file"}], "modes":[...], "runs", "seeds",
/// "kind":"repair"|"regression", "config":{...}}`. Sample files resolve
/// relative to the plan.
ExperimentPlan load_plan(const std::filesystem::path& path);

struct ExperimentRecord {
    std::filesystem::path dir;
    std::vector<std::filesystem::path> files;  // one per (mode, seed)
    std::vector<RepairResult> results;          // plan order: mode, seed, sample
};

std::string results_file_name(const RepairMode& mode, std::int64_t seed);

/// Runs every (mode, seed, sample) triple with up to `parallelism` workers and
/// writes `results_<mode>_<seed>.jsonl` plus `manifest.json` under `out_dir`.
/// Lines are committed in plan order as soon as their predecessors finish.
/// Backend failures are recorded as BackendFailed. Throws IoError only.
ExperimentRecord run_experiment(const ExperimentPlan& plan, const PipelineDeps& deps,
                                const std::filesystem::path& out_dir, int parallelism = 4);

nlohmann::json to_json(const TargetedSite& site);
nlohmann::json to_json(const VQChain& chain);
nlohmann::json to_json(const ChatExchange& exchange);
nlohmann::json to_json(const RepairResult& result);
nlohmann::json to_json(const LocalizationReport& report);
RepairResult repair_result_from_json(const nlohmann::json& j);

/// Reads a results JSON-lines file. Throws IoError or InvalidInput.
std::vector<RepairResult> load_results(const std::filesystem::path& path);

}  // namespace vqforge
