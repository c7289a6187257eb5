#include "dermavqa/backends.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dermavqa/knowledge.hpp"

namespace dvqa {

using nlohmann::json;

void GenerationParams::validate() const {
    if (temperature < 0) throw ConfigError("generation.temperature must be >= 0");
    if (!(top_p > 0 && top_p <= 1)) throw ConfigError("generation.top_p must be in (0,1]");
    if (top_k < 1) throw ConfigError("generation.top_k must be >= 1");
    if (max_new_tokens < 1) throw ConfigError("generation.max_new_tokens must be >= 1");
}

void BackendConfig::validate(const std::string& label) const {
    if (mode != "mock" && mode != "http")
        throw ConfigError("backends." + label + ".mode must be \"mock\" or \"http\"");
    if (mode == "http" && endpoint.empty())
        throw ConfigError("backends." + label + ".endpoint required for http mode");
    if (timeout_ms <= 0) throw ConfigError("backends." + label + ".timeout_ms must be > 0");
    if (retries < 0) throw ConfigError("backends." + label + ".retries must be >= 0");
    if (backoff_ms < 0) throw ConfigError("backends." + label + ".backoff_ms must be >= 0");
}

void l2_normalize(std::vector<float>& v) {
    double norm = 0.0;
    for (float x : v) norm += static_cast<double>(x) * x;
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
        if (!v.empty()) v[0] = 1.0f;
        return;
    }
    for (float& x : v) x = static_cast<float>(x / norm);
}

// ---- HTTP plumbing -------------------------------------------------------

namespace {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

ParsedUrl parse_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("backend endpoint must be a full URL: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string auth_token(const BackendConfig& config) {
    if (config.auth_env.empty()) return "";
    const char* value = std::getenv(config.auth_env.c_str());
    return value ? std::string(value) : std::string();
}

// POSTs `body`, retrying per config. Total attempts = retries + 1.
json post_json(const BackendConfig& config, const json& body, const std::string& label) {
    ParsedUrl url = parse_url(config.endpoint);
    std::string token = auth_token(config);
    std::vector<std::string> attempt_errors;

    for (int attempt = 0; attempt <= config.retries; ++attempt) {
        if (attempt > 0) {
            int delay = config.backoff_ms * (1 << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        httplib::Client client(url.origin);
        client.set_connection_timeout(0, config.timeout_ms * 1000);
        client.set_read_timeout(config.timeout_ms / 1000, (config.timeout_ms % 1000) * 1000);
        httplib::Headers headers;
        if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

        auto res = client.Post(url.path, headers, body.dump(), "application/json");
        if (res && res->status >= 200 && res->status < 300) {
            log_debug(label + " request to " + url.origin + url.path + " ok (auth " +
                      (token.empty() ? "none" : "***redacted***") + ")");
            json parsed = json::parse(res->body, nullptr, false);
            if (parsed.is_discarded())
                throw BackendError(label + ": response is not valid JSON");
            return parsed;
        }
        if (res) {
            attempt_errors.push_back("attempt " + std::to_string(attempt + 1) + ": HTTP " +
                                     std::to_string(res->status));
        } else {
            attempt_errors.push_back("attempt " + std::to_string(attempt + 1) + ": " +
                                     httplib::to_string(res.error()));
        }
    }
    throw BackendError(label + " failed after " + std::to_string(config.retries + 1) +
                       " attempts [" + join(attempt_errors, "; ") + "]");
}

json params_to_json(const GenerationParams& p) {
    return json{{"temperature", p.temperature},
                {"top_p", p.top_p},
                {"top_k", p.top_k},
                {"max_new_tokens", p.max_new_tokens},
                {"sampling", p.sampling}};
}

}  // namespace

HttpChatBackend::HttpChatBackend(BackendConfig config) : config_(std::move(config)) {}

std::string HttpChatBackend::chat(const ChatRequest& request) {
    json messages = json::array();
    for (size_t i = 0; i < request.messages.size(); ++i) {
        const auto& m = request.messages[i];
        json msg{{"role", m.role}, {"content", m.content}};
        // Attachments ride on the last user message.
        if (i + 1 == request.messages.size() && !request.image_paths.empty()) {
            json images = json::array();
            for (const auto& path : request.image_paths)
                images.push_back(base64_encode(read_text_file(path)));
            msg["images"] = images;
        }
        messages.push_back(std::move(msg));
    }
    json body{{"messages", messages}, {"params", params_to_json(request.params)}};
    if (!config_.model.empty()) body["model"] = config_.model;

    json response = post_json(config_, body, "chat[" + request.stage + "]");
    if (!response.contains("text") || !response["text"].is_string())
        throw BackendError("chat: response missing \"text\" field");
    return response["text"].get<std::string>();
}

HttpEmbeddingBackend::HttpEmbeddingBackend(BackendConfig config) : config_(std::move(config)) {}

std::vector<std::vector<float>> HttpEmbeddingBackend::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw BackendError("embed: texts must be non-empty");
    json response = post_json(config_, json{{"texts", texts}}, "embed");
    if (!response.contains("vectors") || !response["vectors"].is_array() ||
        response["vectors"].size() != texts.size())
        throw BackendError("embed: response missing \"vectors\" or count mismatch");
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const auto& vec : response["vectors"]) {
        if (!vec.is_array() || vec.size() != static_cast<size_t>(kEmbeddingDim))
            throw ShapeError("embed: expected " + std::to_string(kEmbeddingDim) +
                             "-dim vectors, got " + std::to_string(vec.size()));
        std::vector<float> v;
        v.reserve(kEmbeddingDim);
        for (const auto& x : vec) v.push_back(x.get<float>());
        l2_normalize(v);
        out.push_back(std::move(v));
    }
    return out;
}

HttpScoringBackend::HttpScoringBackend(BackendConfig config) : config_(std::move(config)) {}

std::vector<double> HttpScoringBackend::score_pairs(const std::string& query,
                                                    const std::vector<std::string>& passages) {
    if (passages.empty()) throw BackendError("score_pairs: passages must be non-empty");
    json response = post_json(config_, json{{"query", query}, {"passages", passages}}, "score");
    if (!response.contains("scores") || !response["scores"].is_array() ||
        response["scores"].size() != passages.size())
        throw BackendError("score: response missing \"scores\" or count mismatch");
    return response["scores"].get<std::vector<double>>();
}

// ---- mocks ---------------------------------------------------------------

namespace {

std::string render_request(const ChatRequest& request) {
    std::string out;
    for (const auto& m : request.messages) {
        out += m.content;
        out.push_back('\n');
    }
    for (const auto& p : request.image_paths) {
        out += p;
        out.push_back('\n');
    }
    return out;
}

const std::map<std::string, std::string>& builtin_defaults() {
    static const std::map<std::string, std::string> defaults = {
        {"image_analysis",
         R"({"morphology":["raised"],"anatomical_locations":["lower leg"],"colors":["red"],)"
         R"("textures":["scaly"],"distribution":"localized","trauma_signs":[],"chronicity_cues":[]})"},
        {"clinical_context",
         R"({"demographics":{},"reported_locations":[],"appearance":"","duration":"",)"
         R"("progression":"","triggers":[],"history":"","itch":"unmentioned","pain":"unmentioned"})"},
        {"diagnosis_extraction",
         R"({"hypotheses":[{"name":"eczema","confidence":0.6},{"name":"dermatitis","confidence":0.3}]})"},
        {"query_generation", R"({"queries":["eczema common presentation"]})"},
        {"evidence_integration", R"({"concordance_notes":"sources broadly concordant"})"},
        {"reasoning",
         R"({"answers":["Not mentioned"],"confidence":0.9,"rationale":"mock default answer"})"},
        {"reflection",
         R"({"requires_revision":false,"critique":"reasoning appears sound","adjusted_confidence":0.8})"},
        {"reanalysis",
         R"({"answers":["Not mentioned"],"confidence":0.8,"rationale":"mock reanalysis"})"},
    };
    return defaults;
}

}  // namespace

void MockChatBackend::load_fixture_file(const std::filesystem::path& path) {
    json spec = json::parse(read_text_file(path), nullptr, false);
    if (spec.is_discarded())
        throw FormatError("chat fixtures: invalid JSON in " + path.string());
    if (spec.contains("defaults")) {
        for (auto& [stage, response] : spec["defaults"].items())
            set_default(stage, response.is_string() ? response.get<std::string>()
                                                    : response.dump());
    }
    for (const auto& rule : spec.value("rules", json::array())) {
        const auto& resp = rule.at("response");
        add_rule({rule.value("stage", ""), rule.value("contains", ""),
                  resp.is_string() ? resp.get<std::string>() : resp.dump()});
    }
    for (const auto& rule : spec.value("failures", json::array())) {
        add_failure({rule.value("stage", ""), rule.value("contains", ""),
                     rule.value("times", 1)});
    }
}

std::string MockChatBackend::chat(const ChatRequest& request) {
    std::lock_guard<std::mutex> lock(mutex_);
    ++total_calls_;
    ++stage_calls_[request.stage];
    history_.push_back(request);

    std::string rendered = render_request(request);
    for (auto& failure : failures_) {
        if (!failure.stage.empty() && failure.stage != request.stage) continue;
        if (!failure.contains.empty() && rendered.find(failure.contains) == std::string::npos)
            continue;
        if (failure.times == 0) continue;
        if (failure.times > 0) --failure.times;
        throw BackendError("mock chat failure injected for stage " + request.stage);
    }
    for (const auto& rule : rules_) {
        if (!rule.stage.empty() && rule.stage != request.stage) continue;
        if (!rule.contains.empty() && rendered.find(rule.contains) == std::string::npos) continue;
        return rule.response;
    }
    if (auto it = defaults_.find(request.stage); it != defaults_.end()) return it->second;
    if (auto it = builtin_defaults().find(request.stage); it != builtin_defaults().end())
        return it->second;
    return "{}";
}

void MockChatBackend::add_rule(ChatFixtureRule rule) {
    std::lock_guard<std::mutex> lock(mutex_);
    rules_.push_back(std::move(rule));
}

void MockChatBackend::set_default(const std::string& stage, const std::string& response) {
    std::lock_guard<std::mutex> lock(mutex_);
    defaults_[stage] = response;
}

void MockChatBackend::add_failure(ChatFailureRule rule) {
    std::lock_guard<std::mutex> lock(mutex_);
    failures_.push_back(std::move(rule));
}

int MockChatBackend::total_calls() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return total_calls_;
}

int MockChatBackend::calls_for_stage(const std::string& stage) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = stage_calls_.find(stage);
    return it == stage_calls_.end() ? 0 : it->second;
}

std::vector<ChatRequest> MockChatBackend::history() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return history_;
}

std::vector<float> MockEmbeddingBackend::vector_for(std::uint64_t seed, const std::string& text) {
    std::mt19937_64 rng(seed ^ fnv1a64(text));
    std::vector<float> v(kEmbeddingDim);
    for (float& x : v) {
        // top 53 bits -> uniform double in [0,1); avoids distribution objects,
        // which are not bit-identical across standard libraries
        double u = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
        x = static_cast<float>(2.0 * u - 1.0);
    }
    l2_normalize(v);
    return v;
}

std::vector<std::vector<float>> MockEmbeddingBackend::embed(const std::vector<std::string>& texts) {
    ++total_calls_;
    if (fail_next_ != 0) {
        if (fail_next_ > 0) --fail_next_;
        throw BackendError("mock embedding failure injected");
    }
    if (texts.empty()) throw BackendError("embed: texts must be non-empty");
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) out.push_back(vector_for(seed_, text));
    return out;
}

std::vector<double> MockScoringBackend::score_pairs(const std::string& query,
                                                    const std::vector<std::string>& passages) {
    ++total_calls_;
    if (fail_next_ != 0) {
        if (fail_next_ > 0) --fail_next_;
        throw BackendError("mock scoring failure injected");
    }
    if (passages.empty()) throw BackendError("score_pairs: passages must be non-empty");
    auto query_tokens = tokenize(query);
    std::vector<std::string> distinct;
    for (const auto& t : query_tokens)
        if (std::find(distinct.begin(), distinct.end(), t) == distinct.end())
            distinct.push_back(t);

    std::vector<double> scores;
    scores.reserve(passages.size());
    for (const auto& passage : passages) {
        auto passage_tokens = tokenize(passage);
        int hits = 0;
        for (const auto& t : distinct)
            if (std::find(passage_tokens.begin(), passage_tokens.end(), t) != passage_tokens.end())
                ++hits;
        scores.push_back(distinct.empty() ? 0.0
                                          : static_cast<double>(hits) / distinct.size());
    }
    return scores;
}

std::unique_ptr<ChatBackend> make_chat_backend(const BackendConfig& config) {
    if (config.mode == "mock") {
        auto mock = std::make_unique<MockChatBackend>();
        if (!config.fixtures_path.empty()) mock->load_fixture_file(config.fixtures_path);
        return mock;
    }
    return std::make_unique<HttpChatBackend>(config);
}

std::unique_ptr<EmbeddingBackend> make_embedding_backend(const BackendConfig& config,
                                                         std::uint64_t seed) {
    if (config.mode == "mock") return std::make_unique<MockEmbeddingBackend>(seed);
    return std::make_unique<HttpEmbeddingBackend>(config);
}

std::unique_ptr<ScoringBackend> make_scoring_backend(const BackendConfig& config) {
    if (config.mode == "mock") return std::make_unique<MockScoringBackend>();
    return std::make_unique<HttpScoringBackend>(config);
}

}  // namespace dvqa
