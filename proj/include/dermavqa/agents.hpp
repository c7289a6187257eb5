#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dermavqa/backends.hpp"
#include "dermavqa/dataset.hpp"

namespace dvqa {

enum class TriState { Yes, No, Unmentioned };

std::string to_string(TriState state);
TriState tri_state_from_string(std::string_view s);

// Structured features extracted from a single image. Lists may be empty,
// never absent.
struct ImageFindings {
    std::vector<std::string> morphology;
    std::vector<std::string> anatomical_locations;
    std::vector<std::string> colors;
    std::vector<std::string> textures;
    std::string distribution;
    std::vector<std::string> trauma_signs;
    std::vector<std::string> chronicity_cues;
    std::string source_image;
    std::vector<std::string> parse_warnings;

    bool operator==(const ImageFindings&) const = default;
};

// Field-wise union across an encounter's images, with notes where images
// disagreed.
struct UnifiedFindings {
    std::vector<std::string> morphology;
    std::vector<std::string> anatomical_locations;
    std::vector<std::string> colors;
    std::vector<std::string> textures;
    std::vector<std::string> distributions;
    std::vector<std::string> trauma_signs;
    std::vector<std::string> chronicity_cues;
    std::vector<std::string> source_images;
    std::map<std::string, std::string> variation_notes;  // field -> note

    bool operator==(const UnifiedFindings&) const = default;
};

struct ClinicalContext {
    std::map<std::string, std::string> demographics;
    std::vector<std::string> reported_locations;
    std::string appearance;
    std::string duration;
    std::string progression;
    std::vector<std::string> triggers;
    std::string history;
    TriState itch = TriState::Unmentioned;
    TriState pain = TriState::Unmentioned;
    std::vector<std::string> parse_warnings;

    bool operator==(const ClinicalContext&) const = default;
};

struct DiagnosisHypothesis {
    std::string name;
    std::optional<double> confidence;

    bool operator==(const DiagnosisHypothesis&) const = default;
};

struct DiagnosisHypotheses {
    std::vector<DiagnosisHypothesis> ranked;
    bool degraded = false;

    std::vector<std::string> names() const;
    bool operator==(const DiagnosisHypotheses&) const = default;
};

struct EvidenceWeights {
    double visual = 0.0;
    double clinical = 0.0;
    double knowledge = 0.0;

    bool operator==(const EvidenceWeights&) const = default;
};

struct EvidenceBundle {
    UnifiedFindings findings;
    ClinicalContext context;
    std::vector<std::string> passages;
    EvidenceWeights weights;
    std::string concordance_notes;
    std::string question_family;
    std::vector<std::string> warnings;

    bool operator==(const EvidenceBundle&) const = default;
};

// Prompt templates are files shipped with the repo ({{placeholder}}
// substitution), overridable via config.
class TemplateStore {
public:
    TemplateStore() = default;
    explicit TemplateStore(const std::filesystem::path& dir);

    std::string render(const std::string& name,
                       const std::map<std::string, std::string>& values) const;
    bool has(const std::string& name) const { return templates_.count(name) > 0; }

private:
    std::map<std::string, std::string> templates_;
};

// Strict JSON parse; on failure retries on the first balanced brace span.
nlohmann::json parse_structured_response(const std::string& raw);

ImageFindings analyze_image(const std::string& image_path, ChatBackend& backend,
                            const TemplateStore& templates, const GenerationParams& params);

UnifiedFindings aggregate_findings(const std::vector<ImageFindings>& per_image);

ClinicalContext extract_clinical_context(const std::string& title, const std::string& content,
                                         ChatBackend& backend, const TemplateStore& templates,
                                         const GenerationParams& params);

DiagnosisHypotheses extract_diagnoses(const UnifiedFindings& findings,
                                      const ClinicalContext& context, ChatBackend& backend,
                                      const TemplateStore& templates,
                                      const GenerationParams& params);

// family -> {visual, clinical, knowledge}
using WeightTable = std::map<std::string, EvidenceWeights>;
WeightTable default_weight_table();

EvidenceBundle integrate_evidence(const UnifiedFindings& findings, const ClinicalContext& context,
                                  const std::vector<std::string>& passages,
                                  const QuestionDefinition& question,
                                  const WeightTable& weight_table, ChatBackend& backend,
                                  const TemplateStore& templates, const GenerationParams& params);

// JSON views used in prompts and traces.
nlohmann::json to_json(const ImageFindings& findings);
nlohmann::json to_json(const UnifiedFindings& findings);
nlohmann::json to_json(const ClinicalContext& context);
nlohmann::json to_json(const EvidenceBundle& bundle);

}  // namespace dvqa
