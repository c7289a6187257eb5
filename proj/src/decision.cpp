#include "dermavqa/decision.hpp"

#include <algorithm>
#include <chrono>

namespace dvqa {

using nlohmann::json;

ValidatedAnswers validate_answers(const std::vector<std::string>& raw_answers,
                                  const std::vector<std::string>& options) {
    ValidatedAnswers result;
    auto canonical = [](const std::string& s) { return to_lower(clean_answer_text(s)); };

    for (const auto& raw : raw_answers) {
        std::string key = canonical(raw);
        if (key.empty()) continue;
        bool matched = false;
        for (const auto& option : options) {
            if (canonical(option) == key) {
                if (std::find(result.answers.begin(), result.answers.end(), option) ==
                    result.answers.end())
                    result.answers.push_back(option);
                matched = true;
                break;
            }
        }
        if (!matched)
            result.warnings.push_back("answer \"" + raw + "\" is not an option; dropped");
    }

    if (result.answers.empty()) {
        auto nm = std::find_if(options.begin(), options.end(), [&](const std::string& o) {
            return canonical(o) == "not mentioned";
        });
        if (nm != options.end()) {
            result.answers.push_back(*nm);
        } else if (!options.empty()) {
            result.answers.push_back(options.front());
            result.warnings.push_back(
                "no valid answer and no \"Not mentioned\" option; defaulted to first option");
        } else {
            result.warnings.push_back("no options available to validate against");
        }
    }
    return result;
}

std::string trace_to_jsonl(const std::vector<TraceRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += json{{"encounter_id", r.encounter_id},
                    {"base_qid", r.base_qid},
                    {"stage", r.stage},
                    {"payload", r.payload},
                    {"timestamp", r.timestamp}}
                   .dump();
        out.push_back('\n');
    }
    return out;
}

std::int64_t SystemClock::now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

namespace {

json advisory_to_json(const AdvisoryMap& advisory) {
    json out = json::object();
    for (const auto& [model, answers] : advisory) out[model] = answers;
    return out;
}

struct ParsedDecision {
    std::vector<std::string> answers;
    std::optional<double> confidence;
    std::string rationale;
    std::vector<std::string> warnings;
};

ParsedDecision parse_decision_response(const std::string& response) {
    ParsedDecision out;
    json parsed;
    try {
        parsed = parse_structured_response(response);
    } catch (const ParseError& e) {
        out.warnings.push_back(std::string("unparseable decision response: ") + e.what());
        return out;
    }
    if (!parsed.is_object()) {
        out.warnings.push_back("decision response is not an object");
        return out;
    }
    if (auto it = parsed.find("answers"); it != parsed.end()) {
        if (it->is_string()) {
            out.answers.push_back(it->get<std::string>());
        } else if (it->is_array()) {
            for (const auto& a : *it)
                if (a.is_string()) out.answers.push_back(a.get<std::string>());
        }
    }
    if (auto it = parsed.find("confidence"); it != parsed.end() && it->is_number())
        out.confidence = std::clamp(it->get<double>(), 0.0, 1.0);
    if (auto it = parsed.find("rationale"); it != parsed.end() && it->is_string())
        out.rationale = it->get<std::string>();
    return out;
}

// Missing or invalid confidence defaults to 0.5, low enough to force
// reflection.
double confidence_or_default(const ParsedDecision& parsed, std::vector<std::string>& warnings) {
    if (parsed.confidence) return *parsed.confidence;
    warnings.push_back("missing or non-numeric confidence; defaulting to 0.5");
    return 0.5;
}

}  // namespace

Decision reason(const QuestionDefinition& question, const std::vector<std::string>& options,
                const EvidenceBundle& evidence, const AdvisoryMap& advisory,
                ChatBackend& backend, const TemplateStore& templates,
                const GenerationParams& params) {
    if (options.empty()) throw PreconditionError("reason: options must be non-empty");

    ChatRequest request;
    request.stage = "reasoning";
    request.params = params;
    request.messages = {
        {"system", templates.render("reasoning", {})},
        {"user", "Question: " + clean_question_text(question.question_text) +
                     "\nQuestion type: " + question.question_type +
                     "\nOptions: " + join(options, ", ") +
                     "\nAnswer limit: " + std::to_string(question.max_answers) +
                     "\nIntegrated evidence: " + to_json(evidence).dump() +
                     "\nAdvisory model predictions (fallible, may contain errors): " +
                     advisory_to_json(advisory).dump()}};

    std::string response = backend.chat(request);
    ParsedDecision parsed = parse_decision_response(response);

    Decision decision;
    decision.warnings = parsed.warnings;
    decision.confidence = confidence_or_default(parsed, decision.warnings);
    decision.rationale = parsed.rationale;
    decision.advisory_snapshot = advisory;
    decision.revised = false;

    ValidatedAnswers validated = validate_answers(parsed.answers, options);
    decision.answers = validated.answers;
    decision.warnings.insert(decision.warnings.end(), validated.warnings.begin(),
                             validated.warnings.end());
    return decision;
}

ReflectionVerdict reflect(const Decision& decision, const QuestionDefinition& question,
                          const EvidenceBundle& evidence, double threshold,
                          ChatBackend& backend, const TemplateStore& templates,
                          const GenerationParams& params) {
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw ConfigError("reflection threshold must be in (0,1]");

    ReflectionVerdict verdict;
    if (decision.confidence >= threshold) return verdict;  // untriggered, no backend call
    verdict.triggered = true;

    ChatRequest request;
    request.stage = "reflection";
    request.params = params;
    request.messages = {
        {"system", templates.render("reflection", {})},
        {"user", "Question: " + clean_question_text(question.question_text) +
                     "\nOptions: " + join(question.options, ", ") +
                     "\nIntegrated evidence: " + to_json(evidence).dump() +
                     "\nProvisional answer: " + json(decision.answers).dump() +
                     "\nConfidence: " + std::to_string(decision.confidence) +
                     "\nRationale: " + decision.rationale}};

    try {
        json parsed = parse_structured_response(backend.chat(request));
        if (!parsed.is_object()) throw ParseError("reflection response is not an object");
        verdict.requires_revision = parsed.value("requires_revision", false);
        verdict.critique = parsed.value("critique", "");
        if (auto it = parsed.find("adjusted_confidence"); it != parsed.end() && it->is_number())
            verdict.adjusted_confidence = std::clamp(it->get<double>(), 0.0, 1.0);
    } catch (const Error& e) {
        // fail-safe: keep the original decision
        verdict.requires_revision = false;
        verdict.degraded = true;
        log_warn(std::string("reflection degraded: ") + e.what());
    }
    return verdict;
}

Decision reanalyze(const QuestionDefinition& question, const EvidenceBundle& evidence,
                   const Decision& prior, const std::string& critique, ChatBackend& backend,
                   const TemplateStore& templates, const GenerationParams& params) {
    ChatRequest request;
    request.stage = "reanalysis";
    request.params = params;
    request.messages = {
        {"system", templates.render("reanalysis", {})},
        {"user", "Question: " + clean_question_text(question.question_text) +
                     "\nOptions: " + join(question.options, ", ") +
                     "\nAnswer limit: " + std::to_string(question.max_answers) +
                     "\nIntegrated evidence: " + to_json(evidence).dump() +
                     "\nPrior answer: " + json(prior.answers).dump() +
                     "\nPrior rationale: " + prior.rationale +
                     "\nCritique of the prior answer: " + critique}};

    std::string response;
    try {
        response = backend.chat(request);
    } catch (const Error& e) {
        Decision unchanged = prior;
        unchanged.warnings.push_back(std::string("reanalysis degraded; keeping prior: ") +
                                     e.what());
        log_warn(unchanged.warnings.back());
        return unchanged;
    }

    ParsedDecision parsed = parse_decision_response(response);
    Decision decision;
    decision.revised = true;
    decision.advisory_snapshot = prior.advisory_snapshot;
    decision.warnings = parsed.warnings;
    decision.confidence = confidence_or_default(parsed, decision.warnings);
    decision.rationale = parsed.rationale;

    ValidatedAnswers validated = validate_answers(parsed.answers, question.options);
    decision.answers = validated.answers;
    decision.warnings.insert(decision.warnings.end(), validated.warnings.begin(),
                             validated.warnings.end());
    return decision;
}

Decision run_decision_loop(const QuestionDefinition& question, const EvidenceBundle& evidence,
                           const AdvisoryMap& advisory, const DecisionLoopConfig& config,
                           ChatBackend& backend, const TemplateStore& templates,
                           const GenerationParams& params, const LoopIdentity& identity,
                           TraceSink& trace, Clock& clock) {
    Decision decision =
        reason(question, question.options, evidence, advisory, backend, templates, params);
    trace.append({identity.encounter_id, identity.base_qid, "reason",
                  json{{"answers", decision.answers},
                       {"confidence", decision.confidence},
                       {"rationale", decision.rationale},
                       {"warnings", decision.warnings}},
                  clock.now_ms()});

    ReflectionVerdict verdict =
        reflect(decision, question, evidence, config.threshold, backend, templates, params);
    json verdict_payload{{"triggered", verdict.triggered},
                         {"requires_revision", verdict.requires_revision},
                         {"critique", verdict.critique},
                         {"degraded", verdict.degraded}};
    // adjusted confidence is recorded here only; the decision keeps its own
    if (verdict.adjusted_confidence)
        verdict_payload["adjusted_confidence"] = *verdict.adjusted_confidence;
    trace.append({identity.encounter_id, identity.base_qid, "reflect", verdict_payload,
                  clock.now_ms()});

    if (verdict.requires_revision) {
        decision = reanalyze(question, evidence, decision, verdict.critique, backend, templates,
                             params);
        trace.append({identity.encounter_id, identity.base_qid, "reanalyze",
                      json{{"answers", decision.answers},
                           {"confidence", decision.confidence},
                           {"rationale", decision.rationale},
                           {"revised", decision.revised},
                           {"warnings", decision.warnings}},
                      clock.now_ms()});
    }

    trace.append({identity.encounter_id, identity.base_qid, "final",
                  json{{"answers", decision.answers},
                       {"confidence", decision.confidence},
                       {"revised", decision.revised}},
                  clock.now_ms()});
    return decision;
}

}  // namespace dvqa
