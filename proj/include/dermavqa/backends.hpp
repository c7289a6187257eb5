#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "dermavqa/common.hpp"

namespace dvqa {

inline constexpr int kEmbeddingDim = 768;

// Vector with the wrong dimensionality coming back from a service or caller.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(ErrorKind::Runtime, msg) {}
};

struct GenerationParams {
    double temperature = 0.9;
    double top_p = 0.95;
    int top_k = 64;
    int max_new_tokens = 100;
    bool sampling = true;

    void validate() const;
};

struct BackendConfig {
    std::string mode = "mock";  // "mock" or "http"
    std::string endpoint;       // full URL, e.g. http://host:8080/chat
    std::string auth_env;       // env var holding the API key; never stored in config
    int timeout_ms = 30000;
    int retries = 2;
    int backoff_ms = 100;
    std::string model;
    std::string fixtures_path;  // mock chat only

    void validate(const std::string& label) const;
};

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
};

// `stage` routes mock fixtures and labels logs; it is not part of the wire
// format. Image attachments are file paths, base64-encoded for HTTP.
struct ChatRequest {
    std::string stage;
    std::vector<ChatMessage> messages;
    std::vector<std::string> image_paths;
    GenerationParams params;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string chat(const ChatRequest& request) = 0;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    // One unit-norm kEmbeddingDim vector per input text.
    virtual std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) = 0;
};

class ScoringBackend {
public:
    virtual ~ScoringBackend() = default;
    // One relevance score per passage, higher = more relevant.
    virtual std::vector<double> score_pairs(const std::string& query,
                                            const std::vector<std::string>& passages) = 0;
};

void l2_normalize(std::vector<float>& v);

// ---- HTTP clients ------------------------------------------------------
// Wire contracts:
//   chat:  POST {messages:[{role,content,images?}], params} -> {text}
//   embed: POST {texts:[...]} -> {vectors:[[...]]}
//   score: POST {query, passages:[...]} -> {scores:[...]}
// Auth header from the env var named in config; request logs redact it.

class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(BackendConfig config);
    std::string chat(const ChatRequest& request) override;

private:
    BackendConfig config_;
};

class HttpEmbeddingBackend : public EmbeddingBackend {
public:
    explicit HttpEmbeddingBackend(BackendConfig config);
    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override;

private:
    BackendConfig config_;
};

class HttpScoringBackend : public ScoringBackend {
public:
    explicit HttpScoringBackend(BackendConfig config);
    std::vector<double> score_pairs(const std::string& query,
                                    const std::vector<std::string>& passages) override;

private:
    BackendConfig config_;
};

// ---- deterministic mocks -------------------------------------------------

struct ChatFixtureRule {
    std::string stage;     // empty = any stage
    std::string contains;  // substring matched against the rendered messages
    std::string response;
};

struct ChatFailureRule {
    std::string stage;
    std::string contains;
    int times = 1;  // negative = fail forever
};

// Fixture-driven: first matching rule wins, then per-stage defaults from the
// fixture file, then built-in schema-valid defaults. Pure function of the
// request, so full-pipeline mock runs are byte-reproducible.
class MockChatBackend : public ChatBackend {
public:
    MockChatBackend() = default;
    void load_fixture_file(const std::filesystem::path& path);

    std::string chat(const ChatRequest& request) override;

    void add_rule(ChatFixtureRule rule);
    void set_default(const std::string& stage, const std::string& response);
    void add_failure(ChatFailureRule rule);

    int total_calls() const;
    int calls_for_stage(const std::string& stage) const;
    std::vector<ChatRequest> history() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::string> defaults_;
    std::vector<ChatFixtureRule> rules_;
    std::vector<ChatFailureRule> failures_;
    std::vector<ChatRequest> history_;
    std::map<std::string, int> stage_calls_;
    int total_calls_ = 0;
};

// Seeded hash of the text expanded into a unit vector; identical texts map to
// identical vectors.
class MockEmbeddingBackend : public EmbeddingBackend {
public:
    explicit MockEmbeddingBackend(std::uint64_t seed = 0) : seed_(seed) {}
    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override;

    void fail_next(int times) { fail_next_ = times; }
    int total_calls() const { return total_calls_; }

    static std::vector<float> vector_for(std::uint64_t seed, const std::string& text);

private:
    std::uint64_t seed_;
    std::atomic<int> fail_next_{0};
    std::atomic<int> total_calls_{0};
};

// score = |distinct query tokens present in passage| / |distinct query tokens|
class MockScoringBackend : public ScoringBackend {
public:
    std::vector<double> score_pairs(const std::string& query,
                                    const std::vector<std::string>& passages) override;

    void fail_next(int times) { fail_next_ = times; }
    int total_calls() const { return total_calls_; }

private:
    std::atomic<int> fail_next_{0};
    std::atomic<int> total_calls_{0};
};

std::unique_ptr<ChatBackend> make_chat_backend(const BackendConfig& config);
std::unique_ptr<EmbeddingBackend> make_embedding_backend(const BackendConfig& config,
                                                         std::uint64_t seed);
std::unique_ptr<ScoringBackend> make_scoring_backend(const BackendConfig& config);

}  // namespace dvqa
