#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dermavqa/common.hpp"
#include "dermavqa/dataset.hpp"

namespace dvqa {

struct PredictionRecord {
    std::string encounter_id;
    std::string base_qid;
    std::string image_path;
    std::vector<std::string> answers;  // validated option strings, non-empty
    std::string model_name;

    bool operator==(const PredictionRecord&) const = default;
};

struct AggregatedAnswer {
    std::string encounter_id;
    std::string base_qid;
    std::vector<std::string> answers;        // <= max_answers, frequency-ranked
    std::map<std::string, int> slot_indices;  // qid -> option index, one per slot
};

// Seed material dependent only on the global seed and the (encounter, family)
// pair, so parallel execution order cannot change tie-breaks.
std::uint64_t make_seed(std::uint64_t global_seed, const std::string& encounter_id,
                        const std::string& base_qid);

// Frequency ranking across per-image records; ties resolved by a seeded
// deterministic shuffle of the tied class; truncated to max_answers.
std::vector<std::string> consolidate(const std::vector<PredictionRecord>& records,
                                     int max_answers, std::uint64_t seed_material);

std::vector<int> map_to_indices(const std::vector<std::string>& answers,
                                const std::vector<std::string>& options);

// Answers fill slots in order; remaining slots get not_mentioned_index.
std::map<std::string, int> distribute_slots(const std::vector<int>& indices,
                                            const std::vector<std::string>& family_slot_qids,
                                            int not_mentioned_index);

// CSV schema: encounter_id,base_qid,image_path,model_name,answers
// (answers semicolon-joined).
void write_prediction_csv(const std::filesystem::path& path,
                          const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_prediction_csv(const std::filesystem::path& path);

using EncounterFamilyKey = std::pair<std::string, std::string>;
std::map<EncounterFamilyKey, std::vector<PredictionRecord>> group_predictions(
    const std::vector<PredictionRecord>& records);

struct SubmissionFiles {
    std::filesystem::path json_path;
    std::filesystem::path csv_path;
    std::filesystem::path masks_dir;
};

// Submission JSON: [{encounter_id, answers:{qid:index}}] sorted by encounter
// then qid; CSV one row per (encounter, qid); masks_dir created empty.
SubmissionFiles emit_submission(const std::vector<AggregatedAnswer>& aggregated,
                                const std::vector<QuestionDefinition>& questions,
                                const std::filesystem::path& out_dir);

// encounter -> qid -> index
using SubmissionIndex = std::map<std::string, std::map<std::string, int>>;
SubmissionIndex load_submission(const std::filesystem::path& path);

}  // namespace dvqa
