#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dermavqa/config.hpp"

namespace dvqa {

inline constexpr const char* kVersion = "0.1.0";
// model_name attached to predictions produced by the run command
inline constexpr const char* kPipelineModelName = "agentic-rag";

struct CommandOutput {
    nlohmann::json manifest;
    std::filesystem::path manifest_path;
};

// Wires the modules into the operator-facing commands. One instance per
// config; commands are re-runnable and idempotent given identical inputs.
class Engine {
public:
    explicit Engine(PipelineConfig config);

    const PipelineConfig& config() const { return config_; }

    CommandOutput preprocess(const std::string& split);
    CommandOutput build_kb();
    CommandOutput run(const std::string& split);
    CommandOutput aggregate(const std::string& split);
    CommandOutput evaluate(const std::string& split);
    // submissions: (model name, submission.json path)
    CommandOutput agreement(const std::vector<std::pair<std::string, std::string>>& submissions,
                            bool include_gold, const std::string& split);

    std::filesystem::path split_json_path(const std::string& split) const;
    std::filesystem::path split_annotations_path(const std::string& split) const;
    std::filesystem::path batches_dir(const std::string& split) const;
    std::filesystem::path output_dir(const std::string& split) const;

private:
    CommandOutput write_manifest(const std::filesystem::path& path, const std::string& command,
                                 nlohmann::json extra) const;

    PipelineConfig config_;
};

}  // namespace dvqa
