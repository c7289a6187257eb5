#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dermavqa/common.hpp"

namespace dvqa {

// One slot of a closed question, e.g. CQID034-A. Slots sharing a base_qid
// form a family whose max_answers equals the slot count.
struct QuestionDefinition {
    std::string qid;
    std::string base_qid;
    int slot_index = 0;
    std::string question_text;
    std::vector<std::string> options;
    std::string question_type;
    std::string question_category;
    int max_answers = 1;

    bool operator==(const QuestionDefinition&) const = default;
};

struct EncounterRecord {
    std::string encounter_id;
    std::string query_title;
    std::string query_content;
    std::vector<std::string> image_ids;

    bool operator==(const EncounterRecord&) const = default;
};

struct AnnotationRecord {
    std::string encounter_id;
    std::map<std::string, std::vector<int>> answers;  // qid -> option indices

    bool operator==(const AnnotationRecord&) const = default;
};

// One row per (encounter, question family, image).
struct Sample {
    std::string encounter_id;
    std::string base_qid;
    std::string query_text;
    std::string image_path;
    std::optional<std::string> answer_text;
    std::string question_type;
    std::string question_category;
    bool is_multilabel = false;

    bool operator==(const Sample&) const = default;
};

struct ImageVerdict {
    bool valid = false;
    std::string reason;  // "missing", "empty", "corrupt header" when invalid
};

// Loaders for the three challenge input files. Schemas are documented in the
// README; missing or mistyped fields raise FormatError naming the field.
std::vector<QuestionDefinition> load_question_definitions(const std::filesystem::path& path);
std::vector<EncounterRecord> load_encounters(const std::filesystem::path& path);
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);

// Strips brackets and quotes, removes "(please specify)", collapses spacing.
std::string clean_answer_text(std::string_view raw);

// Strips leading "N. " / "N) " prefixes and documented instructional phrases.
std::string clean_question_text(std::string_view raw);

// "Not mentioned" survives only as the sole response across every slot;
// otherwise informative answers are deduplicated in slot order and joined.
std::string canonicalize_family_answers(const std::vector<std::vector<std::string>>& per_slot_answers);

std::string synthesize_prompt(const QuestionDefinition& question, const EncounterRecord& encounter);

ImageVerdict validate_image(const std::filesystem::path& path);

struct BuildReport {
    std::vector<Sample> samples;
    std::vector<std::string> warnings;
    std::map<std::string, int> samples_per_family;
    std::vector<std::string> excluded_images;  // "path: reason"
};

BuildReport build_samples(const std::vector<EncounterRecord>& encounters,
                          const std::vector<AnnotationRecord>& annotations,
                          const std::vector<QuestionDefinition>& definitions,
                          const std::filesystem::path& images_dir = {});

// NDJSON batches, batch_000.jsonl upward, zero-padded to 3 digits.
std::vector<std::filesystem::path> serialize_batches(const std::vector<Sample>& samples,
                                                     const std::filesystem::path& out_dir,
                                                     int batch_size = 100);
std::vector<Sample> load_batch(const std::filesystem::path& path);
std::vector<Sample> load_batches(const std::filesystem::path& dir);

// Family slots in definition order, and per-family helpers used downstream.
std::vector<std::string> family_base_qids(const std::vector<QuestionDefinition>& definitions);
std::vector<QuestionDefinition> family_slots(const std::vector<QuestionDefinition>& definitions,
                                             const std::string& base_qid);

}  // namespace dvqa
