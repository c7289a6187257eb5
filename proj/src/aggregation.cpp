#include "dermavqa/aggregation.hpp"

#include <algorithm>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "dermavqa/csv.hpp"

namespace dvqa {

using nlohmann::json;

std::uint64_t make_seed(std::uint64_t global_seed, const std::string& encounter_id,
                        const std::string& base_qid) {
    return global_seed ^ fnv1a64(encounter_id + "\x1f" + base_qid);
}

std::vector<std::string> consolidate(const std::vector<PredictionRecord>& records,
                                     int max_answers, std::uint64_t seed_material) {
    if (records.empty())
        throw PreconditionError("consolidate: record list must be non-empty");
    const std::string& encounter = records.front().encounter_id;
    const std::string& family = records.front().base_qid;
    for (const auto& record : records) {
        if (record.encounter_id != encounter || record.base_qid != family)
            throw PreconditionError("consolidate: records span multiple (encounter, family) pairs");
    }

    // sorted map: counting is order-free and iteration is deterministic
    std::map<std::string, int> votes;
    for (const auto& record : records)
        for (const auto& answer : record.answers) ++votes[answer];

    std::map<int, std::vector<std::string>, std::greater<int>> by_count;
    for (const auto& [answer, count] : votes) by_count[count].push_back(answer);

    std::vector<std::string> ranked;
    for (auto& [count, tied] : by_count) {
        // tied class arrives lexicographically sorted; its shuffle is a pure
        // function of the seed material and the class members
        log_debug("consolidate " + encounter + "/" + family + ": tied class at count " +
                  std::to_string(count) + " = [" + join(tied, ", ") + "]");
        std::mt19937_64 rng(seed_material ^ fnv1a64(join(tied, "\x1f")));
        for (size_t i = tied.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(rng() % i);
            std::swap(tied[i - 1], tied[j]);
        }
        for (auto& answer : tied) ranked.push_back(std::move(answer));
    }
    if (max_answers >= 0 && ranked.size() > static_cast<size_t>(max_answers))
        ranked.resize(max_answers);
    return ranked;
}

std::vector<int> map_to_indices(const std::vector<std::string>& answers,
                                const std::vector<std::string>& options) {
    std::vector<int> indices;
    indices.reserve(answers.size());
    for (const auto& answer : answers) {
        auto it = std::find(options.begin(), options.end(), answer);
        if (it == options.end())
            throw IntegrityError("map_to_indices: answer \"" + answer +
                                 "\" is not in the option list (upstream validation violated)");
        indices.push_back(static_cast<int>(it - options.begin()));
    }
    return indices;
}

std::map<std::string, int> distribute_slots(const std::vector<int>& indices,
                                            const std::vector<std::string>& family_slot_qids,
                                            int not_mentioned_index) {
    if (indices.size() > family_slot_qids.size())
        throw IntegrityError("distribute_slots: " + std::to_string(indices.size()) +
                             " answers exceed " + std::to_string(family_slot_qids.size()) +
                             " slots");
    std::map<std::string, int> slots;
    for (size_t i = 0; i < family_slot_qids.size(); ++i)
        slots[family_slot_qids[i]] =
            i < indices.size() ? indices[i] : not_mentioned_index;
    return slots;
}

void write_prediction_csv(const std::filesystem::path& path,
                          const std::vector<PredictionRecord>& records) {
    std::vector<csv::Row> rows;
    rows.push_back({"encounter_id", "base_qid", "image_path", "model_name", "answers"});
    for (const auto& record : records)
        rows.push_back({record.encounter_id, record.base_qid, record.image_path,
                        record.model_name, join(record.answers, ";")});
    csv::write_file(path, rows);
}

std::vector<PredictionRecord> read_prediction_csv(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw ConfigError("prediction file not found: " + path.string());
    auto rows = csv::read_file(path);
    if (rows.empty()) throw FormatError("prediction csv is empty: " + path.string());
    const csv::Row expected = {"encounter_id", "base_qid", "image_path", "model_name", "answers"};
    if (rows.front() != expected)
        throw FormatError("prediction csv " + path.string() +
                          ": unexpected header (want encounter_id,base_qid,image_path,"
                          "model_name,answers)");

    std::vector<PredictionRecord> records;
    for (size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != 5)
            throw FormatError("prediction csv " + path.string() + ": row " +
                              std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                              " fields, want 5");
        PredictionRecord record;
        record.encounter_id = row[0];
        record.base_qid = row[1];
        record.image_path = row[2];
        record.model_name = row[3];
        for (const auto& answer : split(row[4], ';')) {
            std::string trimmed = trim(answer);
            if (!trimmed.empty()) record.answers.push_back(trimmed);
        }
        if (record.answers.empty())
            throw FormatError("prediction csv " + path.string() + ": row " +
                              std::to_string(r + 1) + " has no answers");
        records.push_back(std::move(record));
    }
    return records;
}

std::map<EncounterFamilyKey, std::vector<PredictionRecord>> group_predictions(
    const std::vector<PredictionRecord>& records) {
    std::map<EncounterFamilyKey, std::vector<PredictionRecord>> grouped;
    for (const auto& record : records)
        grouped[{record.encounter_id, record.base_qid}].push_back(record);
    return grouped;
}

SubmissionFiles emit_submission(const std::vector<AggregatedAnswer>& aggregated,
                                const std::vector<QuestionDefinition>& questions,
                                const std::filesystem::path& out_dir) {
    auto families = family_base_qids(questions);

    // completeness: every encounter must cover every family exactly once
    std::map<std::string, std::set<std::string>> seen;
    for (const auto& agg : aggregated) {
        if (!seen[agg.encounter_id].insert(agg.base_qid).second)
            throw IntegrityError("emit_submission: duplicate entry for " + agg.encounter_id +
                                 "/" + agg.base_qid);
    }
    std::vector<std::string> gaps;
    for (const auto& [encounter, covered] : seen)
        for (const auto& family : families)
            if (!covered.count(family)) gaps.push_back(encounter + "/" + family);
    if (!gaps.empty())
        throw IntegrityError("emit_submission: missing families: " + join(gaps, ", "));

    std::map<std::string, const AggregatedAnswer*> by_encounter_family;
    for (const auto& agg : aggregated)
        by_encounter_family[agg.encounter_id + "\x1f" + agg.base_qid] = &agg;

    std::map<std::string, std::map<std::string, int>> per_encounter;
    for (const auto& agg : aggregated)
        for (const auto& [qid, index] : agg.slot_indices)
            per_encounter[agg.encounter_id][qid] = index;

    json submission = json::array();
    for (const auto& [encounter, qid_indices] : per_encounter) {
        json answers = json::object();
        for (const auto& [qid, index] : qid_indices) answers[qid] = index;
        submission.push_back(json{{"encounter_id", encounter}, {"answers", answers}});
    }

    std::map<std::string, const QuestionDefinition*> def_by_qid;
    for (const auto& def : questions) def_by_qid[def.qid] = &def;

    std::vector<csv::Row> rows;
    rows.push_back({"encounter_id", "qid", "answer_text", "option_index"});
    for (const auto& [encounter, qid_indices] : per_encounter) {
        for (const auto& [qid, index] : qid_indices) {
            auto it = def_by_qid.find(qid);
            if (it == def_by_qid.end())
                throw IntegrityError("emit_submission: unknown qid " + qid);
            const auto& options = it->second->options;
            if (index < 0 || index >= static_cast<int>(options.size()))
                throw IntegrityError("emit_submission: index " + std::to_string(index) +
                                     " out of range for " + qid);
            rows.push_back({encounter, qid, options[index], std::to_string(index)});
        }
    }

    SubmissionFiles files;
    std::filesystem::create_directories(out_dir);
    files.json_path = out_dir / "submission.json";
    files.csv_path = out_dir / "predictions_detail.csv";
    files.masks_dir = out_dir / "masks";
    write_text_file(files.json_path, submission.dump(2) + "\n");
    csv::write_file(files.csv_path, rows);
    std::filesystem::create_directories(files.masks_dir);
    return files;
}

SubmissionIndex load_submission(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw ConfigError("submission file not found: " + path.string());
    json root = json::parse(read_text_file(path), nullptr, false);
    if (root.is_discarded() || !root.is_array())
        throw FormatError("submission: expected a JSON array in " + path.string());
    SubmissionIndex index;
    for (const auto& entry : root) {
        if (!entry.is_object() || !entry.contains("encounter_id") ||
            !entry["encounter_id"].is_string() || !entry.contains("answers") ||
            !entry["answers"].is_object())
            throw FormatError("submission: entries need encounter_id and an answers object");
        const std::string encounter = entry["encounter_id"].get<std::string>();
        for (auto& [qid, value] : entry["answers"].items()) {
            if (!value.is_number_integer())
                throw FormatError("submission: non-integer index for " + encounter + "/" + qid);
            index[encounter][qid] = value.get<int>();
        }
    }
    return index;
}

}  // namespace dvqa
