#include "dermavqa/config.hpp"

#include <cstdlib>
#include <set>

namespace dvqa {

using nlohmann::json;

namespace {

std::string resolve_path(const std::string& value, const std::filesystem::path& base_dir) {
    if (value.empty() || base_dir.empty()) return value;
    std::filesystem::path p(value);
    if (p.is_absolute()) return value;
    return (base_dir / p).lexically_normal().string();
}

BackendConfig backend_from_json(const json& doc, const std::filesystem::path& base_dir) {
    BackendConfig config;
    config.mode = doc.value("mode", config.mode);
    config.endpoint = doc.value("endpoint", config.endpoint);
    config.auth_env = doc.value("auth_env", config.auth_env);
    config.timeout_ms = doc.value("timeout_ms", config.timeout_ms);
    config.retries = doc.value("retries", config.retries);
    config.backoff_ms = doc.value("backoff_ms", config.backoff_ms);
    config.model = doc.value("model", config.model);
    config.fixtures_path = resolve_path(doc.value("fixtures", ""), base_dir);
    return config;
}

json backend_to_json(const BackendConfig& config) {
    return json{{"mode", config.mode},         {"endpoint", config.endpoint},
                {"auth_env", config.auth_env}, {"timeout_ms", config.timeout_ms},
                {"retries", config.retries},   {"backoff_ms", config.backoff_ms},
                {"model", config.model},       {"fixtures", config.fixtures_path}};
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& doc,
                                         const std::filesystem::path& base_dir) {
    try {
        return from_json_checked(doc, base_dir);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

PipelineConfig PipelineConfig::from_json_checked(const json& doc,
                                                 const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("config: expected a JSON object");

    static const std::set<std::string> known_keys = {
        "paths",     "backends", "generation", "reflection_threshold", "retrieval",
        "weight_table", "seed",  "workers",    "batch_size",           "mock_backends"};
    for (auto& [key, _] : doc.items())
        if (!known_keys.count(key)) log_warn("config: ignoring unknown key \"" + key + "\"");

    PipelineConfig config;
    if (doc.contains("paths")) {
        const json& paths = doc["paths"];
        if (!paths.is_object()) throw ConfigError("config: \"paths\" must be an object");
        auto path_of = [&](const char* key) { return resolve_path(paths.value(key, ""), base_dir); };
        config.paths.data_dir = path_of("data_dir");
        config.paths.definitions = path_of("definitions");
        config.paths.images_dir = path_of("images_dir");
        config.paths.knowledge_base = path_of("knowledge_base");
        config.paths.kb_index_dir = path_of("kb_index_dir");
        config.paths.batches_dir = path_of("batches_dir");
        config.paths.output_dir = path_of("output_dir");
        config.paths.templates_dir = path_of("templates_dir");
        for (const auto& entry : paths.value("advisory_predictions", json::array())) {
            if (!entry.is_string())
                throw ConfigError("config: paths.advisory_predictions must be strings");
            config.paths.advisory_predictions.push_back(
                resolve_path(entry.get<std::string>(), base_dir));
        }
    }
    if (doc.contains("backends")) {
        const json& backends = doc["backends"];
        if (backends.contains("chat"))
            config.chat_backend = backend_from_json(backends["chat"], base_dir);
        if (backends.contains("embedding"))
            config.embedding_backend = backend_from_json(backends["embedding"], base_dir);
        if (backends.contains("scorer"))
            config.scorer_backend = backend_from_json(backends["scorer"], base_dir);
    }
    if (doc.contains("generation")) {
        const json& gen = doc["generation"];
        config.generation.temperature = gen.value("temperature", config.generation.temperature);
        config.generation.top_p = gen.value("top_p", config.generation.top_p);
        config.generation.top_k = gen.value("top_k", config.generation.top_k);
        config.generation.max_new_tokens =
            gen.value("max_new_tokens", config.generation.max_new_tokens);
        config.generation.sampling = gen.value("sampling", config.generation.sampling);
    }
    config.reflection_threshold = doc.value("reflection_threshold", config.reflection_threshold);
    if (doc.contains("retrieval")) {
        const json& retrieval = doc["retrieval"];
        if (retrieval.contains("gated_families")) {
            config.retrieval.gated_families.clear();
            for (const auto& family : retrieval["gated_families"])
                config.retrieval.gated_families.push_back(family.get<std::string>());
        }
        config.retrieval.k_each = retrieval.value("k_each", config.retrieval.k_each);
        config.retrieval.top_k = retrieval.value("top_k", config.retrieval.top_k);
        config.retrieval.max_queries = retrieval.value("max_queries", config.retrieval.max_queries);
        config.retrieval.bm25_k1 = retrieval.value("bm25_k1", config.retrieval.bm25_k1);
        config.retrieval.bm25_b = retrieval.value("bm25_b", config.retrieval.bm25_b);
    }
    if (doc.contains("weight_table")) {
        if (!doc["weight_table"].is_object())
            throw ConfigError("config: weight_table must map family -> [visual,clinical,knowledge]");
        for (auto& [family, triple] : doc["weight_table"].items()) {
            if (!triple.is_array() || triple.size() != 3)
                throw ConfigError("config: weight_table." + family +
                                  " must be a 3-element array");
            config.weight_table[family] = {triple[0].get<double>(), triple[1].get<double>(),
                                           triple[2].get<double>()};
        }
    }
    config.seed = doc.value("seed", config.seed);
    config.workers = doc.value("workers", config.workers);
    config.batch_size = doc.value("batch_size", config.batch_size);
    config.mock_backends = doc.value("mock_backends", config.mock_backends);
    if (config.mock_backends) {
        config.chat_backend.mode = "mock";
        config.embedding_backend.mode = "mock";
        config.scorer_backend.mode = "mock";
    }
    return config;
}

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw ConfigError("config file not found: " + path.string());
    json doc = json::parse(read_text_file(path), nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config: invalid JSON in " + path.string());
    return from_json(doc, std::filesystem::absolute(path).parent_path());
}

void PipelineConfig::validate() const {
    if (!(reflection_threshold > 0.0 && reflection_threshold <= 1.0))
        throw ConfigError("reflection_threshold must be in (0,1]");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (retrieval.k_each < 1) throw ConfigError("retrieval.k_each must be >= 1");
    if (retrieval.top_k < 1) throw ConfigError("retrieval.top_k must be >= 1");
    if (retrieval.max_queries < 1) throw ConfigError("retrieval.max_queries must be >= 1");
    if (retrieval.bm25_k1 < 0) throw ConfigError("retrieval.bm25_k1 must be >= 0");
    if (!(retrieval.bm25_b >= 0 && retrieval.bm25_b <= 1))
        throw ConfigError("retrieval.bm25_b must be in [0,1]");
    generation.validate();
    chat_backend.validate("chat");
    embedding_backend.validate("embedding");
    scorer_backend.validate("scorer");
    for (const auto& [family, weights] : weight_table) {
        if (weights.visual < 0 || weights.clinical < 0 || weights.knowledge < 0)
            throw ConfigError("weight_table." + family + " has a negative component");
        if (weights.visual + weights.clinical + weights.knowledge <= 0)
            throw ConfigError("weight_table." + family + " must have a positive sum");
    }
}

json PipelineConfig::to_json() const {
    json weight_table_json = json::object();
    for (const auto& [family, weights] : weight_table)
        weight_table_json[family] = json::array({weights.visual, weights.clinical,
                                                 weights.knowledge});
    return json{
        {"paths",
         {{"data_dir", paths.data_dir},
          {"definitions", paths.definitions},
          {"images_dir", paths.images_dir},
          {"knowledge_base", paths.knowledge_base},
          {"kb_index_dir", paths.kb_index_dir},
          {"batches_dir", paths.batches_dir},
          {"output_dir", paths.output_dir},
          {"templates_dir", paths.templates_dir},
          {"advisory_predictions", paths.advisory_predictions}}},
        {"backends",
         {{"chat", backend_to_json(chat_backend)},
          {"embedding", backend_to_json(embedding_backend)},
          {"scorer", backend_to_json(scorer_backend)}}},
        {"generation",
         {{"temperature", generation.temperature},
          {"top_p", generation.top_p},
          {"top_k", generation.top_k},
          {"max_new_tokens", generation.max_new_tokens},
          {"sampling", generation.sampling}}},
        {"reflection_threshold", reflection_threshold},
        {"retrieval",
         {{"gated_families", retrieval.gated_families},
          {"k_each", retrieval.k_each},
          {"top_k", retrieval.top_k},
          {"max_queries", retrieval.max_queries},
          {"bm25_k1", retrieval.bm25_k1},
          {"bm25_b", retrieval.bm25_b}}},
        {"weight_table", weight_table_json},
        {"seed", seed},
        {"workers", workers},
        {"batch_size", batch_size},
        {"mock_backends", mock_backends}};
}

std::string PipelineConfig::config_hash() const { return hex64(fnv1a64(to_json().dump())); }

void apply_env_overrides(json& doc) {
    if (const char* seed = std::getenv("DVQA_SEED")) {
        try {
            doc["seed"] = std::stoull(seed);
        } catch (const std::exception&) {
            throw ConfigError("DVQA_SEED must be an unsigned integer");
        }
    }
    if (const char* workers = std::getenv("DVQA_WORKERS")) {
        try {
            doc["workers"] = std::stoi(workers);
        } catch (const std::exception&) {
            throw ConfigError("DVQA_WORKERS must be an integer");
        }
    }
    if (const char* mock = std::getenv("DVQA_MOCK_BACKENDS")) {
        std::string value = to_lower(mock);
        doc["mock_backends"] = (value == "1" || value == "true" || value == "yes");
    }
}

void set_config_option(json& doc, const std::string& dotted_key, const std::string& value) {
    if (dotted_key.empty()) throw ConfigError("config option key must be non-empty");
    json* node = &doc;
    auto parts = split(dotted_key, '.');
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object()) throw ConfigError("config option path blocked at " + parts[i]);
        node = &(*node)[parts[i]];
        if (node->is_null()) *node = json::object();
    }
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded())
        (*node)[parts.back()] = value;  // plain string
    else
        (*node)[parts.back()] = parsed;
}

}  // namespace dvqa
