#include "vqforge/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "vqforge/errors.hpp"
#include "vqforge/evalharness.hpp"

#ifndef VQFORGE_DATA_DIR
#define VQFORGE_DATA_DIR "data"
#endif

namespace vqforge {

using nlohmann::json;

namespace {

const std::vector<std::string> kPathKeys{"store", "mock_script", "record", "builtins", "exemplars", "output_dir"};

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void resolve_paths(json& cfg, const std::filesystem::path& base) {
    auto fix = [&](json& v) {
        if (!v.is_string()) return;
        std::filesystem::path p = v.get<std::string>();
        if (!p.empty() && p.is_relative()) v = (base / p).lexically_normal().string();
    };
    for (const auto& key : kPathKeys) {
        if (cfg.contains(key)) fix(cfg[key]);
    }
    if (cfg.contains("templates") && cfg["templates"].is_array()) {
        for (auto& t : cfg["templates"]) fix(t);
    }
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

json default_config() {
    const std::filesystem::path data = VQFORGE_DATA_DIR;
    json seeds = json::array({1, 2, 3, 4, 5});
    return {{"backend", "live"},
            {"url", "https://api.openai.com/v1/chat/completions"},
            {"model", "gpt-3.5-turbo"},
            {"store", ""},
            {"mock_script", ""},
            {"record", ""},
            {"temperature", 0.2},
            {"max_tokens", 1024},
            {"max_retries", 3},
            {"templates", json::array({(data / "templates" / "canonical.tsv").string(),
                                       (data / "templates" / "rephrased.tsv").string()})},
            {"builtins", (data / "builtins.txt").string()},
            {"exemplars", (data / "exemplars.txt").string()},
            {"include_bare_attributes", false},
            {"exclude_names", json::array()},
            {"runs", 5},
            {"seeds", seeds},
            {"timeout_s", 30.0},
            {"parallelism", 4},
            {"output_dir", "vqforge-run"}};
}

void merge_config(json& base, const json& overrides) {
    if (!overrides.is_object()) throw InvalidInput("config must be a JSON object");
    const json defaults = default_config();
    for (const auto& [key, value] : overrides.items()) {
        if (!defaults.contains(key)) throw InvalidInput("unknown config key '" + key + "'");
        const json& d = defaults.at(key);
        bool ok = (d.is_number() && value.is_number()) || d.type() == value.type();
        if (d.is_number_integer() && !value.is_number_integer()) ok = false;
        if (!ok) throw InvalidInput("config key '" + key + "' has the wrong type");
        base[key] = value;
    }
    if (overrides.contains("runs") && !overrides.contains("seeds")) {
        json seeds = json::array();
        for (int i = 1; i <= overrides.at("runs").get<int>(); ++i) seeds.push_back(i);
        base["seeds"] = seeds;
    } else if (overrides.contains("seeds") && !overrides.contains("runs")) {
        base["runs"] = overrides.at("seeds").size();
    }
}

json parse_config_value(const std::string& key, const std::string& text) {
    const json defaults = default_config();
    if (!defaults.contains(key)) throw InvalidInput("unknown config key '" + key + "'");
    const json& d = defaults.at(key);
    try {
        if (d.is_boolean()) {
            if (text == "true" || text == "1") return true;
            if (text == "false" || text == "0") return false;
            throw InvalidInput("--" + key + " expects true or false");
        }
        if (d.is_number_integer()) return std::stoll(text);
        if (d.is_number()) return std::stod(text);
        if (d.is_array()) {
            json arr = json::array();
            for (const auto& item : split_list(text)) {
                if (key == "seeds") {
                    arr.push_back(std::stoll(item));
                } else {
                    arr.push_back(item);
                }
            }
            return arr;
        }
    } catch (const std::logic_error&) {
        throw InvalidInput("--" + key + ": cannot parse '" + text + "'");
    }
    return text;
}

json load_config_file(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw InvalidInput("config " + path.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw InvalidInput("config " + path.string() + " must be a JSON object");
    resolve_paths(doc, path.parent_path());
    return doc;
}

void validate_config(const json& cfg) {
    auto require_file = [](const std::string& key, const std::string& value) {
        if (value.empty()) throw InvalidInput("config key '" + key + "' is required");
        if (!std::filesystem::exists(value)) throw InvalidInput(key + " path does not exist: " + value);
    };
    for (const auto& t : cfg.at("templates")) require_file("templates", t.get<std::string>());
    require_file("builtins", cfg.at("builtins").get<std::string>());
    require_file("exemplars", cfg.at("exemplars").get<std::string>());
    backend_kind_from_string(cfg.at("backend").get<std::string>());
    if (cfg.at("runs").get<int>() != static_cast<int>(cfg.at("seeds").size())) {
        throw InvalidInput("runs must equal the number of seeds");
    }
    if (cfg.at("parallelism").get<int>() < 1) throw InvalidInput("parallelism must be >= 1");
    if (!(cfg.at("timeout_s").get<double>() > 0)) throw InvalidInput("timeout_s must be positive");
}

std::unique_ptr<LlmGateway> make_gateway(const json& cfg) {
    std::unique_ptr<ChatBackend> backend;
    switch (backend_kind_from_string(cfg.at("backend").get<std::string>())) {
        case BackendKind::Live: {
            LiveConfig live;
            live.url = cfg.at("url").get<std::string>();
            const char* key = std::getenv("VQFORGE_API_KEY");
            live.api_key = key ? key : "";
            live.max_retries = cfg.at("max_retries").get<int>();
            backend = std::make_unique<LiveBackend>(live);
            break;
        }
        case BackendKind::Replay:
            if (cfg.at("store").get<std::string>().empty()) throw InvalidInput("replay backend needs 'store'");
            if (!std::filesystem::exists(cfg.at("store").get<std::string>())) {
                throw InvalidInput("replay store does not exist: " + cfg.at("store").get<std::string>());
            }
            backend = std::make_unique<ReplayBackend>(ReplayStore::open(cfg.at("store").get<std::string>()));
            break;
        case BackendKind::Mock:
            if (cfg.at("mock_script").get<std::string>().empty()) throw InvalidInput("mock backend needs 'mock_script'");
            backend = std::make_unique<MockBackend>(load_mock_script(cfg.at("mock_script").get<std::string>()));
            break;
    }
    std::shared_ptr<ReplayStore> recorder;
    if (const auto& rec = cfg.at("record").get<std::string>(); !rec.empty()) recorder = ReplayStore::open(rec);
    return std::make_unique<LlmGateway>(std::move(backend), std::move(recorder), cfg.at("parallelism").get<int>());
}

PipelineDeps make_pipeline_deps(const json& cfg, TemplateSet& templates_storage) {
    std::vector<std::filesystem::path> template_paths;
    for (const auto& t : cfg.at("templates")) template_paths.emplace_back(t.get<std::string>());
    templates_storage = load_templates(template_paths);
    PipelineDeps deps;
    deps.templates = &templates_storage;
    deps.localizer.builtins = load_builtins(cfg.at("builtins").get<std::string>());
    deps.localizer.include_bare_attributes = cfg.at("include_bare_attributes").get<bool>();
    deps.localizer.exclude_name_patterns = cfg.at("exclude_names").get<std::vector<std::string>>();
    deps.exemplars = load_exemplars(cfg.at("exemplars").get<std::string>());
    deps.decoding.model = cfg.at("model").get<std::string>();
    deps.decoding.temperature = cfg.at("temperature").get<double>();
    deps.decoding.max_tokens = cfg.at("max_tokens").get<int>();
    return deps;
}

namespace {

struct Invocation {
    std::string config_path;
    std::map<std::string, std::string> flags;  // config key -> raw flag text

    json resolve(const json* plan_config = nullptr) const {
        json cfg = default_config();
        if (!config_path.empty()) merge_config(cfg, load_config_file(config_path));
        if (plan_config) merge_config(cfg, *plan_config);
        json overrides = json::object();
        for (const auto& [key, text] : flags) overrides[key] = parse_config_value(key, text);
        merge_config(cfg, overrides);
        validate_config(cfg);
        return cfg;
    }
};

SourceText read_source(const std::string& file) { return SourceText(read_text(file), file); }

int cmd_localize(const Invocation& inv, const std::string& file, std::ostream& out) {
    json cfg = inv.resolve();
    TemplateSet templates;
    PipelineDeps deps = make_pipeline_deps(cfg, templates);
    out << to_json(localize(read_source(file), deps.localizer)).dump(2) << '\n';
    return kExitOk;
}

int cmd_vq(const Invocation& inv, const std::string& file, int variant, bool as_json, std::ostream& out) {
    json cfg = inv.resolve();
    TemplateSet templates;
    PipelineDeps deps = make_pipeline_deps(cfg, templates);
    VQChain chain = build_chain(localize(read_source(file), deps.localizer), templates, variant);
    if (as_json) {
        out << to_json(chain).dump(2) << '\n';
    } else {
        for (const auto& q : chain.questions) out << q.text << '\n';
    }
    return kExitOk;
}

int cmd_repair(const Invocation& inv, const std::string& file, const std::string& mode_text, int variant,
               std::int64_t seed, std::string result_path, std::ostream& out, std::ostream& err) {
    json cfg = inv.resolve();
    RepairMode mode = RepairMode::parse(mode_text);
    if (mode.kind == ModeKind::TargetedVQ && mode_text == "targeted") mode.variant = variant;
    TemplateSet templates;
    PipelineDeps deps = make_pipeline_deps(cfg, templates);
    std::unique_ptr<LlmGateway> gateway;
    if (mode.kind != ModeKind::NoVQ) {
        gateway = make_gateway(cfg);
        deps.gateway = gateway.get();
    }
    SourceText source = read_source(file);
    Sample sample{std::filesystem::path(file).stem().string(), std::filesystem::path(file).stem().string(), source};
    RepairResult result = repair_sample(sample, mode, seed, deps);

    if (result_path.empty()) result_path = file + ".repair.json";
    std::ofstream rf(result_path, std::ios::binary | std::ios::trunc);
    rf << to_json(result).dump(2) << '\n';
    if (!rf) throw IoError("cannot write " + result_path);

    switch (result.status) {
        case RepairStatus::LocalizationFailed:
            err << file << ": " << result.detail << '\n';
            return kExitInput;
        case RepairStatus::ExtractionFailed:
            err << file << ": " << result.detail << '\n';
            return kExitRepair;
        case RepairStatus::BackendFailed:
            err << file << ": " << result.detail << '\n';
            return kExitBackend;
        case RepairStatus::Repaired:
        case RepairStatus::PassThrough:
            break;
    }
    const std::string& code = result.repaired.content();
    out << code;
    if (result.status == RepairStatus::Repaired && (code.empty() || code.back() != '\n')) out << '\n';
    return kExitOk;
}

int cmd_experiment(const Invocation& inv, const std::string& plan_file, std::ostream& out, std::ostream& err) {
    json raw_plan;
    try {
        raw_plan = json::parse(read_text(plan_file));
    } catch (const json::parse_error& e) {
        throw InvalidInput("plan " + plan_file + ": " + e.what());
    }
    json plan_config = raw_plan.value("config", json::object());
    resolve_paths(plan_config, std::filesystem::path(plan_file).parent_path());
    json cfg = inv.resolve(&plan_config);

    ExperimentPlan plan = load_plan(plan_file);
    bool plan_sets_seeds = raw_plan.contains("seeds") || raw_plan.contains("runs");
    bool flags_set_seeds = inv.flags.count("seeds") || inv.flags.count("runs");
    if (!plan_sets_seeds || flags_set_seeds) {
        plan.seeds = cfg.at("seeds").get<std::vector<std::int64_t>>();
        plan.runs = cfg.at("runs").get<int>();
    }
    plan.validate();

    TemplateSet templates;
    PipelineDeps deps = make_pipeline_deps(cfg, templates);
    for (const auto& m : plan.modes) {
        if (m.kind == ModeKind::TargetedVQ && !templates.has_variant(m.variant)) {
            throw UnknownVariant("template variant " + std::to_string(m.variant) + " is not loaded");
        }
    }
    std::unique_ptr<LlmGateway> gateway;
    bool needs_llm = std::any_of(plan.modes.begin(), plan.modes.end(),
                                 [](const RepairMode& m) { return m.kind != ModeKind::NoVQ; });
    if (needs_llm) {
        gateway = make_gateway(cfg);
        deps.gateway = gateway.get();
    }
    std::filesystem::path out_dir = cfg.at("output_dir").get<std::string>();
    ExperimentRecord record = run_experiment(plan, deps, out_dir, cfg.at("parallelism").get<int>());

    std::map<RepairStatus, int> counts;
    for (const auto& r : record.results) ++counts[r.status];
    out << "wrote " << record.results.size() << " results in " << record.files.size() << " files to "
        << out_dir.string() << '\n';
    for (const auto& [status, n] : counts) out << "  " << to_string(status) << ": " << n << '\n';
    if (counts.count(RepairStatus::BackendFailed)) {
        err << counts[RepairStatus::BackendFailed] << " results failed at the backend\n";
        return kExitBackend;
    }
    return kExitOk;
}

int cmd_evaluate(const Invocation& inv, const std::string& results_dir, const std::string& tasks_dir,
                 std::ostream& out) {
    json cfg = inv.resolve();
    EvalConfig ec;
    ec.parallelism = cfg.at("parallelism").get<int>();
    ec.default_timeout_s = cfg.at("timeout_s").get<double>();
    EvaluationSummary summary = evaluate(results_dir, tasks_dir, ec);
    out << "ran " << summary.executions << " test executions; wrote " << summary.files.size()
        << " evaluation files to " << results_dir << '\n';
    return kExitOk;
}

int cmd_report(const std::string& results_dir, const std::string& format, std::ostream& out) {
    ReportOutput r = report(results_dir);
    out << (format == "csv" ? r.csv : r.text);
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Repair LLM-generated Python with targeted verification questions", "vqforge"};
    app.require_subcommand(1);
    app.fallthrough();

    Invocation inv;
    app.add_option("--config", inv.config_path, "JSON config file")->check(CLI::ExistingFile);
    const json defaults = default_config();
    std::map<std::string, std::string> flag_values;
    for (const auto& [key, value] : defaults.items()) {
        app.add_option("--" + key, flag_values[key], "override config key '" + key + "'");
    }

    std::string file;
    int variant = 0;
    std::int64_t seed = 1;
    bool as_json = false;
    std::string mode;
    std::string result_path;
    std::string results_dir;
    std::string tasks_dir;
    std::string format = "text";

    auto* localize_cmd = app.add_subcommand("localize", "print targeted sites as JSON");
    localize_cmd->add_option("file", file, "Python source")->required();

    auto* vq_cmd = app.add_subcommand("vq", "print the verification-question chain");
    vq_cmd->add_option("file", file, "Python source")->required();
    vq_cmd->add_option("--variant", variant, "template variant")->check(CLI::NonNegativeNumber);
    vq_cmd->add_flag("--json", as_json, "print questions with their targets as JSON");

    auto* repair_cmd = app.add_subcommand("repair", "repair one file and print the code");
    repair_cmd->add_option("file", file, "Python source")->required();
    repair_cmd->add_option("--mode", mode, "no-vq, general, targeted or targeted-vN")->required();
    repair_cmd->add_option("--variant", variant, "template variant for targeted mode")->check(CLI::NonNegativeNumber);
    repair_cmd->add_option("--seed", seed, "run seed");
    repair_cmd->add_option("--result", result_path, "where to write the result JSON (default <file>.repair.json)");

    auto* experiment_cmd = app.add_subcommand("experiment", "run every (mode, seed, sample) of a plan");
    experiment_cmd->add_option("plan", file, "plan JSON")->required()->check(CLI::ExistingFile);

    auto* evaluate_cmd = app.add_subcommand("evaluate", "run task tests against experiment results");
    evaluate_cmd->add_option("results_dir", results_dir)->required()->check(CLI::ExistingDirectory);
    evaluate_cmd->add_option("tasks_dir", tasks_dir)->required()->check(CLI::ExistingDirectory);

    auto* report_cmd = app.add_subcommand("report", "aggregate evaluations into tables");
    report_cmd->add_option("results_dir", results_dir)->required();
    report_cmd->add_option("--format", format)->check(CLI::IsMember({"csv", "text"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }
    for (const auto& [key, value] : flag_values) {
        if (app.count("--" + key)) inv.flags[key] = value;
    }

    try {
        if (*localize_cmd) return cmd_localize(inv, file, out);
        if (*vq_cmd) return cmd_vq(inv, file, variant, as_json, out);
        if (*repair_cmd) return cmd_repair(inv, file, mode, variant, seed, result_path, out, err);
        if (*experiment_cmd) return cmd_experiment(inv, file, out, err);
        if (*evaluate_cmd) return cmd_evaluate(inv, results_dir, tasks_dir, out);
        if (*report_cmd) return cmd_report(results_dir, format, out);
    } catch (const SyntaxError& e) {
        err << file << ":" << e.line() << ":" << e.column() << ": SyntaxError: " << e.reason() << '\n';
        return kExitInput;
    } catch (const BackendError& e) {
        err << "backend error: " << e.what() << '\n';
        return kExitBackend;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        err << "unexpected error: " << e.what() << '\n';
        return kExitUnexpected;
    }
    return kExitUnexpected;
}

}  // namespace vqforge
