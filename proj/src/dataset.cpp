#include "dermavqa/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace dvqa {

using nlohmann::json;

namespace {

json parse_json_file(const std::filesystem::path& path, const std::string& what) {
    if (!std::filesystem::exists(path))
        throw ConfigError(what + " file not found: " + path.string());
    json parsed = json::parse(read_text_file(path), nullptr, false);
    if (parsed.is_discarded())
        throw FormatError(what + ": invalid JSON in " + path.string());
    return parsed;
}

// Challenge files ship with both plain and _en-suffixed keys depending on
// export; accept either spelling.
const json* find_key(const json& obj, std::initializer_list<const char*> names) {
    for (const char* name : names) {
        if (auto it = obj.find(name); it != obj.end() && !it->is_null()) return &*it;
    }
    return nullptr;
}

std::string require_string(const json& obj, std::initializer_list<const char*> names,
                           const std::string& context) {
    const json* value = find_key(obj, names);
    if (!value || !value->is_string())
        throw FormatError(context + ": missing or non-string field \"" +
                          std::string(*names.begin()) + "\"");
    return value->get<std::string>();
}

std::string optional_string(const json& obj, std::initializer_list<const char*> names) {
    const json* value = find_key(obj, names);
    return value && value->is_string() ? value->get<std::string>() : std::string();
}

}  // namespace

namespace {

std::string clean_answer_pass(std::string_view raw) {
    std::string s = remove_all_ci(raw, "(please specify)");
    std::string stripped;
    stripped.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (c == '[' || c == ']' || c == '\'' || c == '"') {
            ++i;
            continue;
        }
        // UTF-8 curly quotes: U+2018..U+201D
        if (static_cast<unsigned char>(c) == 0xE2 && i + 2 < s.size() &&
            static_cast<unsigned char>(s[i + 1]) == 0x80) {
            unsigned char third = static_cast<unsigned char>(s[i + 2]);
            if (third >= 0x98 && third <= 0x9D) {
                i += 3;
                continue;
            }
        }
        stripped.push_back(c);
        ++i;
    }
    return collapse_whitespace(stripped);
}

}  // namespace

std::string clean_answer_text(std::string_view raw) {
    // Each pass only shrinks the string, but bracket stripping or whitespace
    // collapsing can expose a fresh "(please specify)", so run to fixpoint to
    // keep the cleaner idempotent.
    std::string s = clean_answer_pass(raw);
    for (;;) {
        std::string next = clean_answer_pass(s);
        if (next == s) return s;
        s = std::move(next);
    }
}

std::string clean_question_text(std::string_view raw) {
    std::string s(raw);
    // leading "12. " / "3) " enumeration prefixes
    size_t i = 0;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t digits_end = i;
    while (digits_end < s.size() && std::isdigit(static_cast<unsigned char>(s[digits_end])))
        ++digits_end;
    if (digits_end > i && digits_end < s.size() &&
        (s[digits_end] == '.' || s[digits_end] == ')')) {
        s = s.substr(digits_end + 1);
    }
    s = collapse_whitespace(s);
    for (;;) {
        std::string next = collapse_whitespace(
            remove_all_ci(s, "Please specify which affected area for each selection."));
        if (next == s) return s;
        s = std::move(next);
    }
}

std::vector<QuestionDefinition> load_question_definitions(const std::filesystem::path& path) {
    json root = parse_json_file(path, "question definitions");
    if (!root.is_array())
        throw FormatError("question definitions: expected a top-level JSON array");

    std::vector<QuestionDefinition> defs;
    defs.reserve(root.size());
    std::vector<std::string> seen_qids;
    for (const auto& entry : root) {
        if (!entry.is_object())
            throw FormatError("question definitions: entries must be objects");
        QuestionDefinition def;
        def.qid = require_string(entry, {"qid"}, "question definitions");
        if (std::find(seen_qids.begin(), seen_qids.end(), def.qid) != seen_qids.end())
            throw IntegrityError("question definitions: duplicate qid " + def.qid);
        seen_qids.push_back(def.qid);

        auto hyphen = def.qid.find('-');
        def.base_qid = hyphen == std::string::npos ? def.qid : def.qid.substr(0, hyphen);
        def.question_text =
            require_string(entry, {"question_text", "question_en"}, "definition " + def.qid);
        def.question_type = optional_string(entry, {"question_type", "question_type_en"});
        def.question_category =
            optional_string(entry, {"question_category", "question_category_en"});

        const json* options = find_key(entry, {"options", "options_en"});
        if (!options || !options->is_array())
            throw FormatError("definition " + def.qid + ": missing or non-array field \"options\"");
        for (const auto& opt : *options) {
            if (!opt.is_string())
                throw FormatError("definition " + def.qid + ": options must be strings");
            def.options.push_back(clean_answer_text(opt.get<std::string>()));
        }
        if (def.options.empty())
            throw FormatError("definition " + def.qid + ": options must be non-empty");
        for (size_t a = 0; a < def.options.size(); ++a)
            for (size_t b = a + 1; b < def.options.size(); ++b)
                if (def.options[a] == def.options[b])
                    throw IntegrityError("definition " + def.qid +
                                         ": duplicate option after cleaning: " + def.options[a]);
        defs.push_back(std::move(def));
    }

    // slot numbering + family-wide max_answers and consistency checks
    std::map<std::string, int> slot_counts;
    for (auto& def : defs) {
        def.slot_index = slot_counts[def.base_qid]++;
    }
    for (auto& def : defs) {
        def.max_answers = slot_counts[def.base_qid];
        if (def.max_answers < 1 || def.max_answers > 9)
            throw IntegrityError("family " + def.base_qid + ": slot count " +
                                 std::to_string(def.max_answers) + " outside [1,9]");
    }
    for (const auto& def : defs) {
        const auto& first = *std::find_if(defs.begin(), defs.end(), [&](const auto& d) {
            return d.base_qid == def.base_qid;
        });
        if (def.options != first.options || def.question_type != first.question_type ||
            def.question_category != first.question_category)
            throw IntegrityError("family " + def.base_qid +
                                 ": slots disagree on options or metadata (" + def.qid + ")");
    }
    return defs;
}

std::vector<EncounterRecord> load_encounters(const std::filesystem::path& path) {
    json root = parse_json_file(path, "encounters");
    if (!root.is_array()) throw FormatError("encounters: expected a top-level JSON array");

    std::vector<EncounterRecord> encounters;
    encounters.reserve(root.size());
    std::vector<std::string> seen;
    for (const auto& entry : root) {
        if (!entry.is_object()) throw FormatError("encounters: entries must be objects");
        EncounterRecord rec;
        rec.encounter_id = require_string(entry, {"encounter_id"}, "encounters");
        if (std::find(seen.begin(), seen.end(), rec.encounter_id) != seen.end())
            throw IntegrityError("encounters: duplicate encounter_id " + rec.encounter_id);
        seen.push_back(rec.encounter_id);
        rec.query_title = optional_string(entry, {"query_title", "query_title_en"});
        rec.query_content = optional_string(entry, {"query_content", "query_content_en"});
        const json* images = find_key(entry, {"image_ids", "image_id"});
        if (!images || !images->is_array())
            throw FormatError("encounter " + rec.encounter_id +
                              ": missing or non-array field \"image_ids\"");
        for (const auto& img : *images) {
            if (!img.is_string())
                throw FormatError("encounter " + rec.encounter_id + ": image_ids must be strings");
            rec.image_ids.push_back(img.get<std::string>());
        }
        encounters.push_back(std::move(rec));
    }
    return encounters;
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
    json root = parse_json_file(path, "annotations");
    if (!root.is_array()) throw FormatError("annotations: expected a top-level JSON array");

    std::vector<AnnotationRecord> annotations;
    annotations.reserve(root.size());
    for (const auto& entry : root) {
        if (!entry.is_object()) throw FormatError("annotations: entries must be objects");
        AnnotationRecord rec;
        rec.encounter_id = require_string(entry, {"encounter_id"}, "annotations");
        const json* answers = find_key(entry, {"answers"});
        if (!answers || !answers->is_object())
            throw FormatError("annotation " + rec.encounter_id +
                              ": missing or non-object field \"answers\"");
        for (auto& [qid, value] : answers->items()) {
            std::vector<int> indices;
            if (value.is_number_integer()) {
                indices.push_back(value.get<int>());
            } else if (value.is_array()) {
                for (const auto& idx : value) {
                    if (!idx.is_number_integer())
                        throw FormatError("annotation " + rec.encounter_id + "/" + qid +
                                          ": indices must be integers");
                    indices.push_back(idx.get<int>());
                }
            } else {
                throw FormatError("annotation " + rec.encounter_id + "/" + qid +
                                  ": expected index or index list");
            }
            rec.answers[qid] = std::move(indices);
        }
        annotations.push_back(std::move(rec));
    }
    return annotations;
}

std::string canonicalize_family_answers(
    const std::vector<std::vector<std::string>>& per_slot_answers) {
    bool all_sole_not_mentioned = !per_slot_answers.empty();
    for (const auto& slot : per_slot_answers) {
        if (slot.empty() ||
            !std::all_of(slot.begin(), slot.end(),
                         [](const std::string& a) { return a == "Not mentioned"; })) {
            all_sole_not_mentioned = false;
            break;
        }
    }
    if (all_sole_not_mentioned) return "Not mentioned";

    std::vector<std::string> merged;
    for (const auto& slot : per_slot_answers) {
        for (const auto& answer : slot) {
            if (answer == "Not mentioned" || answer.empty()) continue;
            if (std::find(merged.begin(), merged.end(), answer) == merged.end())
                merged.push_back(answer);
        }
    }
    return join(merged, ", ");
}

std::string synthesize_prompt(const QuestionDefinition& question,
                              const EncounterRecord& encounter) {
    std::string background = collapse_whitespace(encounter.query_title);
    std::string content = collapse_whitespace(encounter.query_content);
    if (!content.empty()) {
        if (!background.empty()) background += " ";
        background += content;
    }

    std::string prompt = "Question: " + clean_question_text(question.question_text) + "\n";
    prompt += "Type: " + question.question_type +
              " | Category: " + question.question_category + "\n";
    prompt += "Background:" + (background.empty() ? "" : " " + background) + "\n";
    prompt += "Options: " + join(question.options, ", ") + "\n";
    prompt +=
        "Reply with the exact text of the applicable option(s) only, separated by commas if "
        "more than one applies. If the information is not available, reply \"Not mentioned\".";
    return prompt;
}

ImageVerdict validate_image(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec) || ec) return {false, "missing"};
    std::ifstream in(path, std::ios::binary);
    if (!in) return {false, "missing"};
    unsigned char header[12] = {};
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    auto got = static_cast<size_t>(in.gcount());
    if (got == 0) return {false, "empty"};

    auto is_jpeg = got >= 3 && header[0] == 0xFF && header[1] == 0xD8 && header[2] == 0xFF;
    auto is_png = got >= 8 && header[0] == 0x89 && header[1] == 'P' && header[2] == 'N' &&
                  header[3] == 'G' && header[4] == 0x0D && header[5] == 0x0A &&
                  header[6] == 0x1A && header[7] == 0x0A;
    auto is_gif = got >= 6 && std::memcmp(header, "GIF87a", 6) == 0;
    auto is_gif89 = got >= 6 && std::memcmp(header, "GIF89a", 6) == 0;
    auto is_webp = got >= 12 && std::memcmp(header, "RIFF", 4) == 0 &&
                   std::memcmp(header + 8, "WEBP", 4) == 0;
    if (is_jpeg || is_png || is_gif || is_gif89 || is_webp) return {true, ""};
    return {false, "corrupt header"};
}

std::vector<std::string> family_base_qids(const std::vector<QuestionDefinition>& definitions) {
    std::vector<std::string> families;
    for (const auto& def : definitions)
        if (std::find(families.begin(), families.end(), def.base_qid) == families.end())
            families.push_back(def.base_qid);
    return families;
}

std::vector<QuestionDefinition> family_slots(const std::vector<QuestionDefinition>& definitions,
                                             const std::string& base_qid) {
    std::vector<QuestionDefinition> slots;
    for (const auto& def : definitions)
        if (def.base_qid == base_qid) slots.push_back(def);
    return slots;
}

BuildReport build_samples(const std::vector<EncounterRecord>& encounters,
                          const std::vector<AnnotationRecord>& annotations,
                          const std::vector<QuestionDefinition>& definitions,
                          const std::filesystem::path& images_dir) {
    BuildReport report;
    auto families = family_base_qids(definitions);

    std::map<std::string, const AnnotationRecord*> annotation_by_encounter;
    std::map<std::string, const EncounterRecord*> encounter_by_id;
    for (const auto& enc : encounters) encounter_by_id[enc.encounter_id] = &enc;
    for (const auto& ann : annotations) {
        if (!encounter_by_id.count(ann.encounter_id))
            throw IntegrityError("annotation references unknown encounter " + ann.encounter_id);
        for (const auto& [qid, indices] : ann.answers) {
            auto it = std::find_if(definitions.begin(), definitions.end(),
                                   [&](const auto& d) { return d.qid == qid; });
            if (it == definitions.end())
                throw IntegrityError("annotation " + ann.encounter_id +
                                     " references unknown qid " + qid);
            for (int idx : indices)
                if (idx < 0 || idx >= static_cast<int>(it->options.size()))
                    throw IntegrityError("annotation " + ann.encounter_id + "/" + qid +
                                         ": index " + std::to_string(idx) + " out of range");
        }
        annotation_by_encounter[ann.encounter_id] = &ann;
    }

    for (const auto& encounter : encounters) {
        std::vector<std::string> valid_paths;
        for (const auto& image_id : encounter.image_ids) {
            std::filesystem::path path(image_id);
            if (path.is_relative() && !images_dir.empty()) path = images_dir / path;
            if (std::find(valid_paths.begin(), valid_paths.end(), path.string()) !=
                valid_paths.end()) {
                report.warnings.push_back("encounter " + encounter.encounter_id +
                                          " lists image " + path.string() + " twice; ignored");
                log_warn(report.warnings.back());
                continue;
            }
            ImageVerdict verdict = validate_image(path);
            if (verdict.valid) {
                valid_paths.push_back(path.string());
            } else {
                report.excluded_images.push_back(path.string() + ": " + verdict.reason);
                log_warn("excluding image " + path.string() + " (" + verdict.reason + ")");
            }
        }
        if (valid_paths.empty()) {
            report.warnings.push_back("encounter " + encounter.encounter_id +
                                      " has no valid images; skipped");
            log_warn(report.warnings.back());
            continue;
        }

        const AnnotationRecord* annotation = nullptr;
        if (auto it = annotation_by_encounter.find(encounter.encounter_id);
            it != annotation_by_encounter.end())
            annotation = it->second;

        for (const auto& family : families) {
            auto slots = family_slots(definitions, family);
            const QuestionDefinition& lead = slots.front();

            std::optional<std::string> answer_text;
            if (annotation) {
                std::vector<std::vector<std::string>> per_slot;
                bool any_slot = false;
                for (const auto& slot : slots) {
                    auto it = annotation->answers.find(slot.qid);
                    if (it == annotation->answers.end()) continue;
                    any_slot = true;
                    std::vector<std::string> texts;
                    for (int idx : it->second) texts.push_back(slot.options[idx]);
                    per_slot.push_back(std::move(texts));
                }
                if (any_slot) answer_text = canonicalize_family_answers(per_slot);
            }

            std::string prompt = synthesize_prompt(lead, encounter);
            for (const auto& image_path : valid_paths) {
                Sample sample;
                sample.encounter_id = encounter.encounter_id;
                sample.base_qid = family;
                sample.query_text = prompt;
                sample.image_path = image_path;
                sample.answer_text = answer_text;
                sample.question_type = lead.question_type;
                sample.question_category = lead.question_category;
                sample.is_multilabel = lead.max_answers > 1;
                report.samples.push_back(std::move(sample));
                ++report.samples_per_family[family];
            }
        }
    }
    return report;
}

namespace {

json sample_to_json(const Sample& sample) {
    json record{{"encounter_id", sample.encounter_id},
                {"base_qid", sample.base_qid},
                {"query_text", sample.query_text},
                {"image_path", sample.image_path},
                {"question_type", sample.question_type},
                {"question_category", sample.question_category},
                {"is_multilabel", sample.is_multilabel}};
    if (sample.answer_text) record["answer_text"] = *sample.answer_text;
    return record;
}

Sample sample_from_json(const json& record) {
    Sample sample;
    sample.encounter_id = record.at("encounter_id").get<std::string>();
    sample.base_qid = record.at("base_qid").get<std::string>();
    sample.query_text = record.at("query_text").get<std::string>();
    sample.image_path = record.at("image_path").get<std::string>();
    sample.question_type = record.at("question_type").get<std::string>();
    sample.question_category = record.at("question_category").get<std::string>();
    sample.is_multilabel = record.at("is_multilabel").get<bool>();
    if (record.contains("answer_text")) sample.answer_text = record["answer_text"].get<std::string>();
    return sample;
}

}  // namespace

std::vector<std::filesystem::path> serialize_batches(const std::vector<Sample>& samples,
                                                     const std::filesystem::path& out_dir,
                                                     int batch_size) {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    std::filesystem::create_directories(out_dir);
    // stale batches from a previous, larger run would corrupt load_batches
    for (const auto& entry : std::filesystem::directory_iterator(out_dir)) {
        const auto name = entry.path().filename().string();
        if (starts_with(name, "batch_") && entry.path().extension() == ".jsonl")
            std::filesystem::remove(entry.path());
    }

    std::vector<std::filesystem::path> files;
    size_t batch_index = 0;
    for (size_t start = 0; start < samples.size(); start += batch_size) {
        char name[32];
        std::snprintf(name, sizeof(name), "batch_%03zu.jsonl", batch_index++);
        std::filesystem::path path = out_dir / name;
        std::string content;
        size_t end = std::min(samples.size(), start + batch_size);
        for (size_t i = start; i < end; ++i) {
            content += sample_to_json(samples[i]).dump();
            content.push_back('\n');
        }
        write_text_file(path, content);
        files.push_back(path);
    }
    return files;
}

std::vector<Sample> load_batch(const std::filesystem::path& path) {
    std::vector<Sample> samples;
    for (const auto& line : read_lines(path)) {
        if (trim(line).empty()) continue;
        json record = json::parse(line, nullptr, false);
        if (record.is_discarded())
            throw FormatError("batch " + path.string() + ": invalid JSON line");
        try {
            samples.push_back(sample_from_json(record));
        } catch (const json::exception& e) {
            throw FormatError("batch " + path.string() + ": malformed record: " + e.what());
        }
    }
    return samples;
}

std::vector<Sample> load_batches(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw ConfigError("batch directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (starts_with(name, "batch_") && entry.path().extension() == ".jsonl")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Sample> samples;
    for (const auto& file : files) {
        auto batch = load_batch(file);
        samples.insert(samples.end(), batch.begin(), batch.end());
    }
    return samples;
}

}  // namespace dvqa
