#include "vqforge/llm_gateway.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "vqforge/errors.hpp"
#include "vqforge/prompting.hpp"

namespace vqforge {

using nlohmann::json;

std::atomic<std::uint64_t> LiveBackend::attempts_{0};

std::string_view to_string(BackendKind k) noexcept {
    switch (k) {
        case BackendKind::Live: return "live";
        case BackendKind::Replay: return "replay";
        case BackendKind::Mock: return "mock";
    }
    return "mock";
}

BackendKind backend_kind_from_string(std::string_view s) {
    if (s == "live") return BackendKind::Live;
    if (s == "replay") return BackendKind::Replay;
    if (s == "mock") return BackendKind::Mock;
    throw InvalidInput("unknown backend '" + std::string(s) + "' (expected live, replay or mock)");
}

void ChatRequest::validate() const {
    if (messages.empty()) throw InvalidInput("chat request has no messages");
    for (const auto& m : messages) {
        if (m.role != "system" && m.role != "user") throw InvalidInput("unsupported message role '" + m.role + "'");
    }
    if (messages.back().role != "user") throw InvalidInput("last chat message must come from the user");
    if (!(temperature >= 0.0)) throw InvalidInput("temperature must be >= 0");
    if (max_tokens <= 0) throw InvalidInput("max_tokens must be positive");
}

namespace {

json request_json(const ChatRequest& req) {
    json messages = json::array();
    for (const auto& m : req.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", req.model},
            {"messages", std::move(messages)},
            {"temperature", req.temperature},
            {"seed", req.seed},
            {"max_tokens", req.max_tokens}};
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

ChatExchange make_exchange(const ChatRequest& req, std::string response, std::int64_t latency, BackendKind kind) {
    return ChatExchange{req, std::move(response), latency, kind, request_digest(req)};
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string subject_block(std::string_view user_message) {
    std::string needle = "\n" + std::string(kCodeTag) + "\n";
    if (user_message.substr(0, kCodeTag.size() + 1) == std::string(kCodeTag) + "\n" &&
        user_message.find(needle) == std::string_view::npos) {
        return std::string(user_message);
    }
    auto pos = user_message.rfind(needle);
    return std::string(pos == std::string_view::npos ? user_message : user_message.substr(pos + 1));
}

}  // namespace

std::string canonical_request(const ChatRequest& req) { return request_json(req).dump(); }

std::string request_digest(const ChatRequest& req) { return sha256_hex(canonical_request(req)); }

std::shared_ptr<ReplayStore> ReplayStore::open(const std::filesystem::path& path) {
    std::shared_ptr<ReplayStore> store(new ReplayStore(path));
    if (!std::filesystem::exists(path)) {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        std::ofstream create(path, std::ios::binary | std::ios::app);
        if (!create) throw IoError("cannot create replay store " + path.string());
        return store;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read replay store " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            json record = json::parse(line);
            std::string digest = record.at("digest").get<std::string>();
            std::string response = record.at("response_text").get<std::string>();
            store->responses_.emplace(std::move(digest), std::move(response));
        } catch (const json::exception& e) {
            throw CorruptStore("replay store " + path.string() + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return store;
}

std::optional<std::string> ReplayStore::lookup(const std::string& digest) const {
    std::lock_guard lock(mu_);
    auto it = responses_.find(digest);
    if (it == responses_.end()) return std::nullopt;
    return it->second;
}

bool ReplayStore::record(const ChatExchange& exchange) {
    std::lock_guard lock(mu_);
    if (responses_.count(exchange.request_digest)) return false;
    json record = {{"digest", exchange.request_digest},
                   {"request", request_json(exchange.request)},
                   {"response_text", exchange.response_text},
                   {"backend", std::string(to_string(exchange.backend))},
                   {"latency_ms", exchange.latency_ms}};
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out << record.dump() << '\n';
    out.flush();
    if (!out) throw IoError("cannot append to replay store " + path_.string());
    responses_.emplace(exchange.request_digest, exchange.response_text);
    return true;
}

std::size_t ReplayStore::size() const {
    std::lock_guard lock(mu_);
    return responses_.size();
}

ReplayBackend::ReplayBackend(std::shared_ptr<const ReplayStore> store) : store_(std::move(store)) {
    if (!store_) throw InvalidInput("replay backend needs a store");
}

ChatExchange ReplayBackend::complete(const ChatRequest& req) {
    std::string digest = request_digest(req);
    auto hit = store_->lookup(digest);
    if (!hit) throw ReplayMiss(digest);
    return ChatExchange{req, std::move(*hit), 0, BackendKind::Replay, std::move(digest)};
}

MockScript load_mock_script(const std::filesystem::path& path) {
    MockScript script;
    json doc;
    try {
        doc = json::parse(read_file(path));
        for (const auto& r : doc.value("rules", json::array())) {
            MockRule rule;
            rule.when = r.at("when").get<std::vector<std::string>>();
            if (r.contains("respond_file")) {
                rule.respond = read_file(path.parent_path() / r.at("respond_file").get<std::string>());
            } else {
                rule.respond = r.at("respond").get<std::string>();
            }
            script.rules.push_back(std::move(rule));
        }
        script.fallback = doc.value("fallback", std::string("echo"));
    } catch (const json::exception& e) {
        throw InvalidInput("mock script " + path.string() + ": " + e.what());
    }
    if (script.fallback != "echo" && script.fallback != "refuse") {
        throw InvalidInput("mock script " + path.string() + ": fallback must be echo or refuse");
    }
    return script;
}

MockBackend::MockBackend(MockScript script) : script_(std::move(script)) {}

ChatExchange MockBackend::complete(const ChatRequest& req) {
    const std::string& user = req.messages.back().content;
    const std::string subject = subject_block(user);
    for (const auto& rule : script_.rules) {
        bool all = std::all_of(rule.when.begin(), rule.when.end(),
                               [&](const std::string& s) { return subject.find(s) != std::string::npos; });
        if (all) return make_exchange(req, rule.respond, 0, BackendKind::Mock);
    }
    if (script_.fallback == "refuse") return make_exchange(req, "I cannot repair this code.", 0, BackendKind::Mock);
    std::string code = subject;
    try {
        auto blocks = parse_tagged(subject);
        if (!blocks.empty()) code = blocks.back().code;
    } catch (const InvalidInput&) {
    }
    return make_exchange(req, wrap_in_fence(code), 0, BackendKind::Mock);
}

LiveBackend::LiveBackend(LiveConfig cfg) : cfg_(std::move(cfg)) {
    const std::string& url = cfg_.url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw InvalidInput("live backend URL lacks a scheme: " + url);
    std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw InvalidInput("unsupported URL scheme '" + scheme + "'");
    auto path_begin = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_begin);
    path_ = path_begin == std::string::npos ? "/" : url.substr(path_begin);
    if (scheme_host_port_.size() <= scheme_end + 3) throw InvalidInput("live backend URL lacks a host: " + url);
    if (cfg_.max_retries < 0) throw InvalidInput("max_retries must be >= 0");
}

std::string live_request_body(const ChatRequest& req) { return request_json(req).dump(); }

std::string parse_live_response(std::string_view body) {
    try {
        json doc = json::parse(body);
        const json& first = doc.at("choices").at(0);
        if (first.contains("message")) return first.at("message").at("content").get<std::string>();
        return first.at("text").get<std::string>();
    } catch (const json::exception& e) {
        throw MalformedResponse(std::string("unexpected completion body: ") + e.what());
    }
}

ChatExchange LiveBackend::complete(const ChatRequest& req) {
    httplib::Client client(scheme_host_port_);
    auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(cfg_.timeout_s));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    if (!cfg_.api_key.empty()) client.set_bearer_token_auth(cfg_.api_key);
    const std::string body = live_request_body(req);

    std::string last_error;
    bool rate_limited = false;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<std::int64_t>(cfg_.backoff_base_ms)
                                                                  << (attempt - 1)));
        }
        ++attempts_;
        auto start = std::chrono::steady_clock::now();
        auto res = client.Post(path_, body, "application/json");
        auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
        if (!res) {
            last_error = "request failed: " + httplib::to_string(res.error());
            rate_limited = false;
            continue;
        }
        int status = res->status;
        if (status == 200) return make_exchange(req, parse_live_response(res->body), latency.count(), BackendKind::Live);
        last_error = "HTTP " + std::to_string(status);
        rate_limited = status == 429;
        bool transient = status == 408 || status == 429 || status >= 500;
        if (!transient) throw BackendUnavailable(scheme_host_port_ + path_ + ": " + last_error);
    }
    if (rate_limited) throw RateLimited(scheme_host_port_ + path_ + ": " + last_error + " after retries");
    throw BackendUnavailable(scheme_host_port_ + path_ + ": " + last_error + " after retries");
}

LlmGateway::LlmGateway(std::unique_ptr<ChatBackend> backend, std::shared_ptr<ReplayStore> recorder, int max_in_flight)
    : backend_(std::move(backend)), recorder_(std::move(recorder)), slots_(std::max(1, std::min(max_in_flight, 1024))) {
    if (!backend_) throw InvalidInput("gateway needs a backend");
    if (max_in_flight < 1) throw InvalidInput("max_in_flight must be >= 1");
}

ChatExchange LlmGateway::complete(const ChatRequest& req) {
    req.validate();
    slots_.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{slots_};
    ChatExchange ex = backend_->complete(req);
    if (recorder_) recorder_->record(ex);
    return ex;
}

}  // namespace vqforge
