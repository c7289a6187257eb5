#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dermavqa/dataset.hpp"

namespace fixtures {

// Unique self-deleting directory under the system temp root.
class TempDir {
public:
    explicit TempDir(const std::string& label);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

void write_jpeg(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path);

// Nine question families, 27 slot qids total, mirroring the challenge layout
// (CQID034 carries six slots A-F).
nlohmann::json synthetic_definitions_json();
std::vector<dvqa::QuestionDefinition> synthetic_definitions(const std::filesystem::path& scratch);

struct SplitSpec {
    std::string name = "valid";
    int encounters = 10;
    int images_per_encounter = 1;
    bool labeled = true;
};

struct SyntheticSplit {
    std::filesystem::path data_dir;
    std::filesystem::path images_dir;
    std::filesystem::path definitions_path;
    std::vector<std::string> encounter_ids;
    std::string split_name;
};

SyntheticSplit write_synthetic_split(const std::filesystem::path& dir, const SplitSpec& spec);

void write_knowledge_base(const std::filesystem::path& path, int extra_docs = 0);
void write_chat_fixtures(const std::filesystem::path& path);
void write_advisory_csv(const std::filesystem::path& path, const SyntheticSplit& split,
                        const std::string& model_name, int style);

// Full mock-backend config wired to the synthetic split; work products go
// under work_dir.
nlohmann::json base_config(const std::filesystem::path& work_dir, const SyntheticSplit& split,
                           const std::filesystem::path& chat_fixtures,
                           const std::filesystem::path& knowledge_base);

std::filesystem::path write_config(const std::filesystem::path& file,
                                   const nlohmann::json& config);

std::filesystem::path repo_templates_dir();

}  // namespace fixtures
