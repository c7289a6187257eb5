#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dermavqa/agents.hpp"
#include "dermavqa/backends.hpp"

namespace dvqa {

struct PipelinePaths {
    std::string data_dir;        // [split].json and [split]_cvqa.json live here
    std::string definitions;     // closedquestions_definitions_imageclef2025.json
    std::string images_dir;      // relative image ids resolve against this
    std::string knowledge_base;  // JSONL or CSV corpus
    std::string kb_index_dir;
    std::string batches_dir;
    std::string output_dir;
    std::string templates_dir;
    std::vector<std::string> advisory_predictions;  // prediction CSV paths
};

struct RetrievalConfig {
    std::vector<std::string> gated_families = {"CQID034", "CQID012"};
    int k_each = 5;
    int top_k = 3;
    int max_queries = 3;
    double bm25_k1 = 1.5;
    double bm25_b = 0.75;
};

struct PipelineConfig {
    PipelinePaths paths;
    BackendConfig chat_backend;
    BackendConfig embedding_backend;
    BackendConfig scorer_backend;
    GenerationParams generation;
    double reflection_threshold = 0.75;
    RetrievalConfig retrieval;
    WeightTable weight_table = default_weight_table();
    std::uint64_t seed = 42;
    int workers = 1;
    int batch_size = 100;
    bool mock_backends = false;

    // Relative path fields in `doc` resolve against base_dir when given.
    // Mistyped values (wrong JSON types) surface as ConfigError.
    static PipelineConfig from_json(const nlohmann::json& doc,
                                    const std::filesystem::path& base_dir = {});
    static PipelineConfig from_file(const std::filesystem::path& path);

    void validate() const;
    nlohmann::json to_json() const;
    // FNV-1a over the canonical JSON dump; recorded in every run manifest.
    std::string config_hash() const;

private:
    static PipelineConfig from_json_checked(const nlohmann::json& doc,
                                            const std::filesystem::path& base_dir);
};

// Env overrides applied between file values and flag overrides:
// DVQA_SEED, DVQA_WORKERS, DVQA_MOCK_BACKENDS.
void apply_env_overrides(nlohmann::json& doc);

// Dotted-path override, e.g. set_config_option(doc, "paths.output_dir", "/tmp/x")
// or ("seed", "7"). Values parse as JSON scalars when possible, else strings.
void set_config_option(nlohmann::json& doc, const std::string& dotted_key,
                       const std::string& value);

}  // namespace dvqa
