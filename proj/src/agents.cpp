#include "dermavqa/agents.hpp"

#include <algorithm>
#include <set>

namespace dvqa {

using nlohmann::json;

std::string to_string(TriState state) {
    switch (state) {
        case TriState::Yes: return "yes";
        case TriState::No: return "no";
        default: return "unmentioned";
    }
}

TriState tri_state_from_string(std::string_view s) {
    std::string lowered = to_lower(trim(s));
    if (lowered == "yes") return TriState::Yes;
    if (lowered == "no") return TriState::No;
    return TriState::Unmentioned;
}

std::vector<std::string> DiagnosisHypotheses::names() const {
    std::vector<std::string> out;
    out.reserve(ranked.size());
    for (const auto& h : ranked) out.push_back(h.name);
    return out;
}

// ---- templates -------------------------------------------------------------

TemplateStore::TemplateStore(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw ConfigError("template directory not found: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".txt") continue;
        templates_[entry.path().stem().string()] = read_text_file(entry.path());
    }
    if (templates_.empty())
        throw ConfigError("template directory has no .txt templates: " + dir.string());
}

std::string TemplateStore::render(const std::string& name,
                                  const std::map<std::string, std::string>& values) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw ConfigError("missing prompt template: " + name);
    std::string out = it->second;
    for (const auto& [key, value] : values) {
        std::string placeholder = "{{" + key + "}}";
        size_t pos = 0;
        while ((pos = out.find(placeholder, pos)) != std::string::npos) {
            out.replace(pos, placeholder.size(), value);
            pos += value.size();
        }
    }
    return out;
}

// ---- structured response parsing -------------------------------------------

json parse_structured_response(const std::string& raw) {
    json parsed = json::parse(raw, nullptr, false);
    if (!parsed.is_discarded()) return parsed;

    // models often wrap JSON in prose; take the first balanced brace span
    size_t start = raw.find('{');
    if (start != std::string::npos) {
        int depth = 0;
        bool in_string = false;
        for (size_t i = start; i < raw.size(); ++i) {
            char c = raw[i];
            if (in_string) {
                if (c == '\\') {
                    ++i;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}') {
                if (--depth == 0) {
                    json span = json::parse(raw.substr(start, i - start + 1), nullptr, false);
                    if (!span.is_discarded()) return span;
                    break;
                }
            }
        }
    }
    std::string preview = raw.size() > 200 ? raw.substr(0, 200) + "..." : raw;
    throw ParseError("no parseable JSON in response: " + preview);
}

// ---- field extraction helpers -----------------------------------------------

namespace {

std::vector<std::string> string_list(const json& obj, const std::string& key,
                                     std::vector<std::string>& warnings) {
    std::vector<std::string> out;
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return out;
    if (it->is_string()) {
        std::string v = trim(it->get<std::string>());
        if (!v.empty()) out.push_back(v);
        return out;
    }
    if (!it->is_array()) {
        warnings.push_back("field \"" + key + "\" unparseable; left empty");
        return out;
    }
    for (const auto& item : *it) {
        if (item.is_string()) {
            std::string v = trim(item.get<std::string>());
            if (!v.empty()) out.push_back(v);
        } else {
            warnings.push_back("field \"" + key + "\" has a non-string entry; skipped");
        }
    }
    return out;
}

std::string string_field(const json& obj, const std::string& key,
                         std::vector<std::string>& warnings) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return "";
    if (!it->is_string()) {
        warnings.push_back("field \"" + key + "\" unparseable; left empty");
        return "";
    }
    return trim(it->get<std::string>());
}

void union_into(std::vector<std::string>& target, const std::vector<std::string>& source) {
    for (const auto& v : source)
        if (std::find(target.begin(), target.end(), v) == target.end()) target.push_back(v);
}

std::set<std::string> as_set(const std::vector<std::string>& values) {
    return {values.begin(), values.end()};
}

}  // namespace

// ---- agents ------------------------------------------------------------------

ImageFindings analyze_image(const std::string& image_path, ChatBackend& backend,
                            const TemplateStore& templates, const GenerationParams& params) {
    ChatRequest request;
    request.stage = "image_analysis";
    request.params = params;
    request.messages = {{"system", templates.render("image_analysis", {})},
                        {"user", "Analyze the attached dermatology image: " + image_path}};
    request.image_paths = {image_path};

    std::string response;
    try {
        response = backend.chat(request);
    } catch (const Error& e) {
        throw BackendError("image analysis failed for " + image_path + ": " + e.what());
    }

    ImageFindings findings;
    findings.source_image = image_path;
    json parsed;
    try {
        parsed = parse_structured_response(response);
    } catch (const ParseError& e) {
        findings.parse_warnings.push_back(std::string("unparseable image analysis: ") + e.what());
        return findings;
    }
    if (!parsed.is_object()) {
        findings.parse_warnings.push_back("image analysis response is not an object");
        return findings;
    }
    if (parsed.empty())
        findings.parse_warnings.push_back("image analysis returned an empty object");
    findings.morphology = string_list(parsed, "morphology", findings.parse_warnings);
    findings.anatomical_locations =
        string_list(parsed, "anatomical_locations", findings.parse_warnings);
    findings.colors = string_list(parsed, "colors", findings.parse_warnings);
    findings.textures = string_list(parsed, "textures", findings.parse_warnings);
    findings.distribution = string_field(parsed, "distribution", findings.parse_warnings);
    findings.trauma_signs = string_list(parsed, "trauma_signs", findings.parse_warnings);
    findings.chronicity_cues = string_list(parsed, "chronicity_cues", findings.parse_warnings);
    return findings;
}

UnifiedFindings aggregate_findings(const std::vector<ImageFindings>& per_image) {
    if (per_image.empty())
        throw PreconditionError("aggregate_findings: per-image findings must be non-empty");

    UnifiedFindings unified;
    struct FieldView {
        const char* name;
        std::vector<std::string> ImageFindings::* member;
        std::vector<std::string> UnifiedFindings::* target;
    };
    static const FieldView fields[] = {
        {"morphology", &ImageFindings::morphology, &UnifiedFindings::morphology},
        {"anatomical_locations", &ImageFindings::anatomical_locations,
         &UnifiedFindings::anatomical_locations},
        {"colors", &ImageFindings::colors, &UnifiedFindings::colors},
        {"textures", &ImageFindings::textures, &UnifiedFindings::textures},
        {"trauma_signs", &ImageFindings::trauma_signs, &UnifiedFindings::trauma_signs},
        {"chronicity_cues", &ImageFindings::chronicity_cues, &UnifiedFindings::chronicity_cues},
    };

    for (const auto& field : fields) {
        for (const auto& findings : per_image)
            union_into(unified.*(field.target), findings.*(field.member));
        if (per_image.size() > 1) {
            auto first = as_set(per_image.front().*(field.member));
            bool varies = std::any_of(per_image.begin() + 1, per_image.end(),
                                      [&](const auto& f) { return as_set(f.*(field.member)) != first; });
            if (varies) {
                std::vector<std::string> per_image_views;
                for (const auto& f : per_image)
                    per_image_views.push_back("[" + join(f.*(field.member), ", ") + "]");
                unified.variation_notes[field.name] =
                    "varies across images: " + join(per_image_views, " vs ");
            }
        }
    }

    for (const auto& findings : per_image) {
        if (!findings.distribution.empty())
            union_into(unified.distributions, {findings.distribution});
        unified.source_images.push_back(findings.source_image);
    }
    if (per_image.size() > 1) {
        auto first = per_image.front().distribution;
        bool varies = std::any_of(per_image.begin() + 1, per_image.end(),
                                  [&](const auto& f) { return f.distribution != first; });
        if (varies) {
            std::vector<std::string> views;
            for (const auto& f : per_image) views.push_back(f.distribution);
            unified.variation_notes["distribution"] =
                "varies across images: " + join(views, " vs ");
        }
    }
    return unified;
}

ClinicalContext extract_clinical_context(const std::string& title, const std::string& content,
                                         ChatBackend& backend, const TemplateStore& templates,
                                         const GenerationParams& params) {
    ChatRequest request;
    request.stage = "clinical_context";
    request.params = params;
    request.messages = {{"system", templates.render("clinical_context", {})},
                        {"user", "Title: " + title + "\nPatient description: " + content}};

    std::string response = backend.chat(request);

    ClinicalContext context;
    json parsed;
    try {
        parsed = parse_structured_response(response);
    } catch (const ParseError& e) {
        context.parse_warnings.push_back(std::string("unparseable clinical context: ") + e.what());
        return context;
    }
    if (!parsed.is_object()) {
        context.parse_warnings.push_back("clinical context response is not an object");
        return context;
    }
    if (auto it = parsed.find("demographics"); it != parsed.end() && it->is_object()) {
        for (auto& [key, value] : it->items())
            context.demographics[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
    context.reported_locations =
        string_list(parsed, "reported_locations", context.parse_warnings);
    context.appearance = string_field(parsed, "appearance", context.parse_warnings);
    context.duration = string_field(parsed, "duration", context.parse_warnings);
    context.progression = string_field(parsed, "progression", context.parse_warnings);
    context.triggers = string_list(parsed, "triggers", context.parse_warnings);
    context.history = string_field(parsed, "history", context.parse_warnings);
    context.itch = tri_state_from_string(string_field(parsed, "itch", context.parse_warnings));
    context.pain = tri_state_from_string(string_field(parsed, "pain", context.parse_warnings));
    return context;
}

DiagnosisHypotheses extract_diagnoses(const UnifiedFindings& findings,
                                      const ClinicalContext& context, ChatBackend& backend,
                                      const TemplateStore& templates,
                                      const GenerationParams& params) {
    DiagnosisHypotheses hypotheses;
    ChatRequest request;
    request.stage = "diagnosis_extraction";
    request.params = params;
    request.messages = {{"system", templates.render("diagnosis_extraction", {})},
                        {"user", "Image findings: " + to_json(findings).dump() +
                                     "\nClinical context: " + to_json(context).dump()}};

    std::string response;
    try {
        response = backend.chat(request);
    } catch (const Error& e) {
        hypotheses.degraded = true;
        log_warn(std::string("diagnosis extraction degraded: ") + e.what());
        return hypotheses;
    }

    json parsed;
    try {
        parsed = parse_structured_response(response);
    } catch (const ParseError& e) {
        hypotheses.degraded = true;
        log_warn(std::string("diagnosis extraction unparseable: ") + e.what());
        return hypotheses;
    }

    std::set<std::string> seen;
    for (const auto& entry : parsed.value("hypotheses", json::array())) {
        DiagnosisHypothesis h;
        if (entry.is_string()) {
            h.name = trim(entry.get<std::string>());
        } else if (entry.is_object() && entry.contains("name") && entry["name"].is_string()) {
            h.name = trim(entry["name"].get<std::string>());
            if (entry.contains("confidence") && entry["confidence"].is_number())
                h.confidence = std::clamp(entry["confidence"].get<double>(), 0.0, 1.0);
        }
        if (h.name.empty()) continue;
        if (!seen.insert(to_lower(h.name)).second) continue;
        hypotheses.ranked.push_back(std::move(h));
    }
    return hypotheses;
}

WeightTable default_weight_table() {
    WeightTable table;
    const EvidenceWeights visual_led{0.6, 0.25, 0.15};
    const EvidenceWeights clinical_led{0.25, 0.6, 0.15};
    const EvidenceWeights knowledge_led{0.2, 0.2, 0.6};
    for (const char* family : {"CQID012", "CQID020", "CQID034", "CQID035", "CQID036"})
        table[family] = visual_led;
    for (const char* family : {"CQID015", "CQID025"}) table[family] = clinical_led;
    for (const char* family : {"CQID010", "CQID011"}) table[family] = knowledge_led;
    return table;
}

EvidenceBundle integrate_evidence(const UnifiedFindings& findings, const ClinicalContext& context,
                                  const std::vector<std::string>& passages,
                                  const QuestionDefinition& question,
                                  const WeightTable& weight_table, ChatBackend& backend,
                                  const TemplateStore& templates,
                                  const GenerationParams& params) {
    EvidenceBundle bundle;
    bundle.findings = findings;
    bundle.context = context;
    bundle.passages = passages;
    bundle.question_family = question.base_qid;

    EvidenceWeights w{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    auto it = weight_table.find(question.base_qid);
    if (it == weight_table.end()) {
        bundle.warnings.push_back("no weight entry for family " + question.base_qid +
                                  "; using uniform weights");
        log_warn(bundle.warnings.back());
    } else {
        w = it->second;
        if (w.visual < 0 || w.clinical < 0 || w.knowledge < 0) {
            bundle.warnings.push_back("negative weight for family " + question.base_qid +
                                      "; clamped to zero");
            w.visual = std::max(w.visual, 0.0);
            w.clinical = std::max(w.clinical, 0.0);
            w.knowledge = std::max(w.knowledge, 0.0);
        }
        double sum = w.visual + w.clinical + w.knowledge;
        if (sum <= 0) {
            bundle.warnings.push_back("degenerate weights for family " + question.base_qid +
                                      "; using uniform weights");
            w = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
        } else {
            w.visual /= sum;
            w.clinical /= sum;
            w.knowledge /= sum;
        }
    }
    bundle.weights = w;

    json weights_view{{"visual", w.visual}, {"clinical", w.clinical}, {"knowledge", w.knowledge}};
    ChatRequest request;
    request.stage = "evidence_integration";
    request.params = params;
    request.messages = {
        {"system", templates.render("evidence_integration", {})},
        {"user", "Question family: " + question.base_qid +
                     "\nQuestion: " + clean_question_text(question.question_text) +
                     "\nSource weights: " + weights_view.dump() +
                     "\nImage findings: " + to_json(findings).dump() +
                     "\nClinical context: " + to_json(context).dump() +
                     "\nRetrieved passages: " + json(passages).dump()}};
    try {
        json parsed = parse_structured_response(backend.chat(request));
        if (parsed.is_object())
            bundle.concordance_notes = parsed.value("concordance_notes", "");
    } catch (const Error& e) {
        bundle.warnings.push_back(std::string("evidence synthesis degraded: ") + e.what());
        log_warn(bundle.warnings.back());
    }
    return bundle;
}

// ---- JSON views ---------------------------------------------------------------

json to_json(const ImageFindings& findings) {
    return json{{"morphology", findings.morphology},
                {"anatomical_locations", findings.anatomical_locations},
                {"colors", findings.colors},
                {"textures", findings.textures},
                {"distribution", findings.distribution},
                {"trauma_signs", findings.trauma_signs},
                {"chronicity_cues", findings.chronicity_cues},
                {"source_image", findings.source_image}};
}

json to_json(const UnifiedFindings& findings) {
    return json{{"morphology", findings.morphology},
                {"anatomical_locations", findings.anatomical_locations},
                {"colors", findings.colors},
                {"textures", findings.textures},
                {"distributions", findings.distributions},
                {"trauma_signs", findings.trauma_signs},
                {"chronicity_cues", findings.chronicity_cues},
                {"source_images", findings.source_images},
                {"variation_notes", findings.variation_notes}};
}

json to_json(const ClinicalContext& context) {
    return json{{"demographics", context.demographics},
                {"reported_locations", context.reported_locations},
                {"appearance", context.appearance},
                {"duration", context.duration},
                {"progression", context.progression},
                {"triggers", context.triggers},
                {"history", context.history},
                {"itch", to_string(context.itch)},
                {"pain", to_string(context.pain)}};
}

json to_json(const EvidenceBundle& bundle) {
    return json{{"findings", to_json(bundle.findings)},
                {"context", to_json(bundle.context)},
                {"passages", bundle.passages},
                {"weights",
                 {{"visual", bundle.weights.visual},
                  {"clinical", bundle.weights.clinical},
                  {"knowledge", bundle.weights.knowledge}}},
                {"concordance_notes", bundle.concordance_notes},
                {"question_family", bundle.question_family}};
}

}  // namespace dvqa
