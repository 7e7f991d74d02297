#pragma once

// Chat-completion access with live, replay and mock backends.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

namespace vqforge {

enum class BackendKind { Live, Replay, Mock };

std::string_view to_string(BackendKind k) noexcept;
/// Parses "live" / "replay" / "mock". Throws InvalidInput.
BackendKind backend_kind_from_string(std::string_view s);

struct ChatMessage {
    std::string role;  // "system" or "user"
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.2;
    std::int64_t seed = 0;
    int max_tokens = 1024;

    /// Throws InvalidInput unless messages are non-empty, roles are valid,
    /// the last role is user, temperature >= 0 and max_tokens > 0.
    void validate() const;

    friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

/// Compact JSON with sorted keys; every request field takes part.
std::string canonical_request(const ChatRequest& req);
/// Lower-case hex SHA-256 of canonical_request.
std::string request_digest(const ChatRequest& req);

struct ChatExchange {
    ChatRequest request;
    std::string response_text;
    std::int64_t latency_ms = 0;
    BackendKind backend = BackendKind::Mock;
    std::string request_digest;
};

/// Append-only JSON-lines store of exchanges keyed by request digest. The
/// first record for a digest wins. Thread-safe.
class ReplayStore {
public:
    /// Opens (creating if needed) the store at `path`. Throws IoError, or
    /// CorruptStore naming the first unreadable line.
    static std::shared_ptr<ReplayStore> open(const std::filesystem::path& path);

    std::optional<std::string> lookup(const std::string& digest) const;
    /// Appends `exchange` unless its digest is already present; returns
    /// whether a line was written.
    bool record(const ChatExchange& exchange);
    std::size_t size() const;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    explicit ReplayStore(std::filesystem::path path) : path_(std::move(path)) {}

    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::map<std::string, std::string> responses_;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatExchange complete(const ChatRequest& req) = 0;
    virtual BackendKind kind() const noexcept = 0;
};

class ReplayBackend final : public ChatBackend {
public:
    explicit ReplayBackend(std::shared_ptr<const ReplayStore> store);
    /// Throws ReplayMiss when the digest is not in the store.
    ChatExchange complete(const ChatRequest& req) override;
    BackendKind kind() const noexcept override { return BackendKind::Replay; }

private:
    std::shared_ptr<const ReplayStore> store_;
};

/// Scripted responses. A rule fires when every `when` substring occurs in the
/// subject block of the last user message (the text from its last `<CODE>`
/// tag on). Unmatched requests fall back to `echo` (the subject code, fenced)
/// or `refuse` (a prose reply with no code).
struct MockRule {
    std::vector<std::string> when;
    std::string respond;
};

struct MockScript {
    std::vector<MockRule> rules;
    std::string fallback = "echo";
};

/// Reads `{"rules":[{"when":[...],"respond":"..."|"respond_file":"..."}],
/// "fallback":"echo"|"refuse"}`; respond_file is relative to the script.
MockScript load_mock_script(const std::filesystem::path& path);

class MockBackend final : public ChatBackend {
public:
    explicit MockBackend(MockScript script);
    ChatExchange complete(const ChatRequest& req) override;
    BackendKind kind() const noexcept override { return BackendKind::Mock; }

private:
    MockScript script_;
};

struct LiveConfig {
    std::string url;  // full endpoint, e.g. https://host/v1/chat/completions
    std::string api_key;
    double timeout_s = 120.0;
    int max_retries = 3;
    int backoff_base_ms = 500;  // doubled after each retry
};

class LiveBackend final : public ChatBackend {
public:
    /// Throws InvalidInput on an unusable URL.
    explicit LiveBackend(LiveConfig cfg);
    /// Retries connection failures, 408, 429 and 5xx. Throws RateLimited,
    /// BackendUnavailable or MalformedResponse.
    ChatExchange complete(const ChatRequest& req) override;
    BackendKind kind() const noexcept override { return BackendKind::Live; }

    /// HTTP attempts made by every LiveBackend in this process.
    static std::uint64_t attempts() noexcept { return attempts_.load(); }

private:
    LiveConfig cfg_;
    std::string scheme_host_port_;
    std::string path_;
    static std::atomic<std::uint64_t> attempts_;
};

/// Wire body sent by LiveBackend.
std::string live_request_body(const ChatRequest& req);
/// Extracts the generated text from a choices-style response body. Throws
/// MalformedResponse.
std::string parse_live_response(std::string_view body);

/// Bounds in-flight requests and optionally records every exchange.
class LlmGateway {
public:
    LlmGateway(std::unique_ptr<ChatBackend> backend, std::shared_ptr<ReplayStore> recorder = nullptr,
               int max_in_flight = 4);

    /// Validates the request, then delegates to the backend.
    ChatExchange complete(const ChatRequest& req);
    BackendKind kind() const noexcept { return backend_->kind(); }

private:
    std::unique_ptr<ChatBackend> backend_;
    std::shared_ptr<ReplayStore> recorder_;
    std::counting_semaphore<1024> slots_;
};

}  // namespace vqforge
