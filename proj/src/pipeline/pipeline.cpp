#include "vqforge/pipeline.hpp"

#include <algorithm>
#include <condition_variable>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "vqforge/errors.hpp"

namespace vqforge {

using nlohmann::json;

std::string RepairMode::label() const {
    switch (kind) {
        case ModeKind::NoVQ: return "no-vq";
        case ModeKind::GeneralVQ: return "general";
        case ModeKind::TargetedVQ: return "targeted-v" + std::to_string(variant);
    }
    return "no-vq";
}

std::string RepairMode::display_name() const {
    switch (kind) {
        case ModeKind::NoVQ: return "No VQ";
        case ModeKind::GeneralVQ: return "General VQ";
        case ModeKind::TargetedVQ:
            return variant == 0 ? "Targeted VQs" : "Targeted VQs (rephrasing " + std::to_string(variant) + ")";
    }
    return "No VQ";
}

RepairMode RepairMode::parse(std::string_view label) {
    if (label == "no-vq") return no_vq();
    if (label == "general") return general();
    if (label == "targeted") return targeted(0);
    constexpr std::string_view prefix = "targeted-v";
    if (label.substr(0, prefix.size()) == prefix && label.size() > prefix.size()) {
        std::string digits(label.substr(prefix.size()));
        if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }) &&
            digits.size() < 6) {
            return targeted(std::stoi(digits));
        }
    }
    throw InvalidInput("unknown mode '" + std::string(label) + "' (expected no-vq, general, targeted or targeted-vN)");
}

std::string_view to_string(RepairStatus s) noexcept {
    switch (s) {
        case RepairStatus::Repaired: return "Repaired";
        case RepairStatus::PassThrough: return "PassThrough";
        case RepairStatus::ExtractionFailed: return "ExtractionFailed";
        case RepairStatus::LocalizationFailed: return "LocalizationFailed";
        case RepairStatus::BackendFailed: return "BackendFailed";
    }
    return "PassThrough";
}

RepairStatus repair_status_from_string(std::string_view s) {
    for (auto st : {RepairStatus::Repaired, RepairStatus::PassThrough, RepairStatus::ExtractionFailed,
                    RepairStatus::LocalizationFailed, RepairStatus::BackendFailed}) {
        if (to_string(st) == s) return st;
    }
    throw InvalidInput("unknown repair status '" + std::string(s) + "'");
}

ChatRequest make_chat_request(const RepairPrompt& prompt, std::int64_t seed, const DecodingConfig& decoding) {
    ChatRequest req;
    req.model = decoding.model;
    req.messages = {{"system", prompt.system_preamble}, {"user", prompt.rendered}};
    req.temperature = decoding.temperature;
    req.seed = seed;
    req.max_tokens = decoding.max_tokens;
    return req;
}

namespace {

RepairResult start(const Sample& sample, const RepairMode& mode, std::int64_t seed) {
    RepairResult r{sample.id, sample.task_id, mode, seed, sample.source, {}, std::nullopt, sample.source,
                   RepairStatus::PassThrough, {}};
    return r;
}

void complete_and_extract(RepairResult& r, const RepairPrompt& prompt, const PipelineDeps& deps) {
    if (!deps.gateway) throw InvalidInput("mode " + r.mode.label() + " needs an LLM backend");
    r.exchange = deps.gateway->complete(make_chat_request(prompt, r.seed, deps.decoding));
    try {
        SourceText code = extract_code(r.exchange->response_text);
        r.repaired = SourceText(code.content(), r.initial.origin());
        r.status = RepairStatus::Repaired;
    } catch (const NoCodeFound& e) {
        r.status = RepairStatus::ExtractionFailed;
        r.detail = e.what();
    }
}

}  // namespace

RepairResult repair_sample(const Sample& sample, const RepairMode& mode, std::int64_t seed, const PipelineDeps& deps) {
    RepairResult r = start(sample, mode, seed);
    switch (mode.kind) {
        case ModeKind::NoVQ:
            return r;
        case ModeKind::GeneralVQ:
            complete_and_extract(r, build_general_prompt(sample.source), deps);
            return r;
        case ModeKind::TargetedVQ: {
            if (!deps.templates) throw InvalidInput("targeted mode needs a template set");
            std::optional<LocalizationReport> report;
            try {
                report = localize(sample.source, deps.localizer);
            } catch (const SyntaxError& e) {
                r.status = RepairStatus::LocalizationFailed;
                r.detail = e.what();
                return r;
            }
            r.chain = build_chain(*report, *deps.templates, mode.variant);
            if (r.chain.empty()) return r;
            auto prompt = build_repair_prompt(order_exemplars(deps.exemplars, seed), sample.source, r.chain);
            complete_and_extract(r, prompt, deps);
            return r;
        }
    }
    return r;
}

void ExperimentPlan::validate() const {
    if (runs < 1) throw InvalidInput("plan runs must be >= 1");
    if (static_cast<std::size_t>(runs) != seeds.size()) {
        throw InvalidInput("plan lists " + std::to_string(seeds.size()) + " seeds for " + std::to_string(runs) +
                           " runs");
    }
    if (std::set<std::int64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw InvalidInput("plan seeds must be distinct");
    }
    if (modes.empty()) throw InvalidInput("plan has no modes");
    if (std::set<RepairMode>(modes.begin(), modes.end()).size() != modes.size()) {
        throw InvalidInput("plan repeats a mode");
    }
    std::set<std::string> ids;
    for (const auto& s : samples) {
        if (s.id.empty()) throw InvalidInput("plan sample without an id");
        if (!ids.insert(s.id).second) throw InvalidInput("duplicate sample id '" + s.id + "'");
    }
}

namespace {

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

ExperimentPlan load_plan(const std::filesystem::path& path) {
    ExperimentPlan plan;
    json doc;
    try {
        doc = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw InvalidInput("plan " + path.string() + ": " + e.what());
    }
    const auto base = path.parent_path();
    try {
        for (const auto& s : doc.value("samples", json::array())) {
            std::string id = s.at("id").get<std::string>();
            std::string task = s.value("task_id", id);
            auto file = base / s.at("file").get<std::string>();
            plan.samples.push_back(Sample{id, task, SourceText(read_text(file), file.string())});
        }
        plan.modes.clear();
        for (const auto& m : doc.at("modes")) plan.modes.push_back(RepairMode::parse(m.get<std::string>()));
        if (doc.contains("seeds")) {
            plan.seeds = doc.at("seeds").get<std::vector<std::int64_t>>();
            plan.runs = doc.value("runs", static_cast<int>(plan.seeds.size()));
        } else if (doc.contains("runs")) {
            plan.runs = doc.at("runs").get<int>();
            plan.seeds.clear();
            for (int i = 1; i <= plan.runs; ++i) plan.seeds.push_back(i);
        }
        std::string kind = doc.value("kind", std::string("repair"));
        if (kind == "repair") {
            plan.kind = PlanKind::Repair;
        } else if (kind == "regression") {
            plan.kind = PlanKind::Regression;
        } else {
            throw InvalidInput("plan kind must be repair or regression, got '" + kind + "'");
        }
        plan.config = doc.value("config", json::object());
    } catch (const json::exception& e) {
        throw InvalidInput("plan " + path.string() + ": " + e.what());
    }
    plan.validate();
    return plan;
}

std::string results_file_name(const RepairMode& mode, std::int64_t seed) {
    return "results_" + mode.label() + "_" + std::to_string(seed) + ".jsonl";
}

json to_json(const TargetedSite& site) {
    return {{"kind", std::string(to_string(site.kind))},
            {"rendering", site.rendering},
            {"receiver_text", site.receiver_text ? json(*site.receiver_text) : json(nullptr)},
            {"name", site.name},
            {"span", {site.span.begin, site.span.end}}};
}

json to_json(const VQChain& chain) {
    json out = json::array();
    for (const auto& q : chain.questions) {
        json targets = json::array();
        for (const auto& t : q.targets) targets.push_back(to_json(t));
        out.push_back({{"pattern", std::string(to_string(q.pattern))}, {"text", q.text}, {"targets", targets}});
    }
    return out;
}

json to_json(const ChatExchange& ex) {
    json messages = json::array();
    for (const auto& m : ex.request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    return {{"request",
             {{"model", ex.request.model},
              {"messages", messages},
              {"temperature", ex.request.temperature},
              {"seed", ex.request.seed},
              {"max_tokens", ex.request.max_tokens}}},
            {"response_text", ex.response_text},
            {"latency_ms", ex.latency_ms},
            {"backend", std::string(to_string(ex.backend))},
            {"request_digest", ex.request_digest}};
}

json to_json(const RepairResult& r) {
    return {{"sample_id", r.sample_id},
            {"task_id", r.task_id},
            {"mode", r.mode.label()},
            {"seed", r.seed},
            {"initial", r.initial.content()},
            {"chain", to_json(r.chain)},
            {"exchange", r.exchange ? to_json(*r.exchange) : json(nullptr)},
            {"repaired", r.repaired.content()},
            {"status", std::string(to_string(r.status))},
            {"detail", r.detail}};
}

json to_json(const LocalizationReport& report) {
    json attrs = json::array();
    json halls = json::array();
    for (const auto& s : report.attribute_targets) attrs.push_back(to_json(s));
    for (const auto& s : report.hallucination_targets) halls.push_back(to_json(s));
    return {{"source", report.source.origin()}, {"attribute_targets", attrs}, {"hallucination_targets", halls}};
}

namespace {

TargetedSite site_from_json(const json& j) {
    TargetedSite s;
    auto kind = j.at("kind").get<std::string>();
    if (kind == "AttributeCall") {
        s.kind = SiteKind::AttributeCall;
    } else if (kind == "HallucinatedCall") {
        s.kind = SiteKind::HallucinatedCall;
    } else {
        throw InvalidInput("unknown site kind '" + kind + "'");
    }
    s.rendering = j.at("rendering").get<std::string>();
    if (!j.at("receiver_text").is_null()) s.receiver_text = j.at("receiver_text").get<std::string>();
    s.name = j.at("name").get<std::string>();
    s.span = Span{j.at("span").at(0).get<std::uint32_t>(), j.at("span").at(1).get<std::uint32_t>()};
    return s;
}

}  // namespace

RepairResult repair_result_from_json(const json& j) {
    try {
        RepairResult r{j.at("sample_id").get<std::string>(),
                       j.at("task_id").get<std::string>(),
                       RepairMode::parse(j.at("mode").get<std::string>()),
                       j.at("seed").get<std::int64_t>(),
                       SourceText(j.at("initial").get<std::string>(), j.at("sample_id").get<std::string>()),
                       {},
                       std::nullopt,
                       SourceText(j.at("repaired").get<std::string>(), j.at("sample_id").get<std::string>()),
                       repair_status_from_string(j.at("status").get<std::string>()),
                       j.value("detail", std::string())};
        for (const auto& q : j.at("chain")) {
            VerificationQuestion vq;
            vq.pattern = bug_pattern_from_string(q.at("pattern").get<std::string>());
            vq.text = q.at("text").get<std::string>();
            for (const auto& t : q.at("targets")) vq.targets.push_back(site_from_json(t));
            r.chain.questions.push_back(std::move(vq));
        }
        if (!j.at("exchange").is_null()) {
            const json& e = j.at("exchange");
            const json& rq = e.at("request");
            ChatExchange ex;
            ex.request.model = rq.at("model").get<std::string>();
            for (const auto& m : rq.at("messages")) {
                ex.request.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
            }
            ex.request.temperature = rq.at("temperature").get<double>();
            ex.request.seed = rq.at("seed").get<std::int64_t>();
            ex.request.max_tokens = rq.at("max_tokens").get<int>();
            ex.response_text = e.at("response_text").get<std::string>();
            ex.latency_ms = e.at("latency_ms").get<std::int64_t>();
            ex.backend = backend_kind_from_string(e.at("backend").get<std::string>());
            ex.request_digest = e.at("request_digest").get<std::string>();
            r.exchange = std::move(ex);
        }
        return r;
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("malformed repair result: ") + e.what());
    }
}

std::vector<RepairResult> load_results(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<RepairResult> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(repair_result_from_json(json::parse(line)));
        } catch (const json::parse_error& e) {
            throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const InvalidInput& e) {
            throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

ExperimentRecord run_experiment(const ExperimentPlan& plan, const PipelineDeps& deps,
                                const std::filesystem::path& out_dir, int parallelism) {
    plan.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    struct Job {
        std::size_t file;
        const Sample* sample;
        RepairMode mode;
        std::int64_t seed;
    };
    ExperimentRecord record;
    record.dir = out_dir;
    std::vector<std::ofstream> outs;
    std::vector<Job> jobs;
    for (const auto& mode : plan.modes) {
        for (auto seed : plan.seeds) {
            record.files.push_back(out_dir / results_file_name(mode, seed));
            outs.emplace_back(record.files.back(), std::ios::binary | std::ios::trunc);
            if (!outs.back()) throw IoError("cannot write " + record.files.back().string());
            for (const auto& s : plan.samples) jobs.push_back({record.files.size() - 1, &s, mode, seed});
        }
    }

    std::vector<std::optional<RepairResult>> done(jobs.size());
    std::size_t next_job = 0;
    std::size_t next_commit = 0;
    std::mutex mu;
    std::optional<IoError> io_failure;

    auto commit_ready = [&] {
        while (next_commit < jobs.size() && done[next_commit]) {
            auto& out = outs[jobs[next_commit].file];
            out << to_json(*done[next_commit]).dump() << '\n';
            out.flush();
            if (!out && !io_failure) io_failure.emplace("cannot append to " + record.files[jobs[next_commit].file].string());
            ++next_commit;
        }
    };

    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(mu);
                if (next_job == jobs.size()) return;
                i = next_job++;
            }
            const Job& job = jobs[i];
            std::optional<RepairResult> r;
            try {
                r = repair_sample(*job.sample, job.mode, job.seed, deps);
            } catch (const BackendError& e) {
                r = start(*job.sample, job.mode, job.seed);
                r->status = RepairStatus::BackendFailed;
                r->detail = e.what();
            }
            std::lock_guard lock(mu);
            done[i] = std::move(r);
            commit_ready();
        }
    };

    int workers = std::max(1, std::min<int>(parallelism, static_cast<int>(std::max<std::size_t>(jobs.size(), 1))));
    std::vector<std::thread> threads;
    std::exception_ptr failure;
    std::mutex failure_mu;
    for (int t = 0; t < workers; ++t) {
        threads.emplace_back([&] {
            try {
                worker();
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                std::lock_guard jobs_lock(mu);
                next_job = jobs.size();
            }
        });
    }
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
    if (io_failure) throw *io_failure;

    for (auto& r : done) record.results.push_back(std::move(*r));

    std::map<std::string, int> status_counts;
    for (const auto& r : record.results) ++status_counts[std::string(to_string(r.status))];
    json modes = json::array();
    for (const auto& m : plan.modes) modes.push_back(m.label());
    json files = json::array();
    for (const auto& f : record.files) files.push_back(f.filename().string());
    json samples = json::array();
    for (const auto& s : plan.samples) samples.push_back({{"id", s.id}, {"task_id", s.task_id}});
    json manifest = {{"kind", plan.kind == PlanKind::Repair ? "repair" : "regression"},
                     {"modes", modes},
                     {"seeds", plan.seeds},
                     {"runs", plan.runs},
                     {"samples", samples},
                     {"model", deps.decoding.model},
                     {"temperature", deps.decoding.temperature},
                     {"max_tokens", deps.decoding.max_tokens},
                     {"backend", deps.gateway ? std::string(to_string(deps.gateway->kind())) : std::string("none")},
                     {"files", files},
                     {"status_counts", status_counts}};
    std::ofstream mf(out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
    mf << manifest.dump(2) << '\n';
    if (!mf) throw IoError("cannot write " + (out_dir / "manifest.json").string());
    return record;
}

}  // namespace vqforge
