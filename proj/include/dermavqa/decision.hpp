#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dermavqa/agents.hpp"
#include "dermavqa/backends.hpp"
#include "dermavqa/dataset.hpp"

namespace dvqa {

using AdvisoryMap = std::map<std::string, std::vector<std::string>>;

struct Decision {
    std::vector<std::string> answers;
    double confidence = 0.0;
    std::string rationale;
    AdvisoryMap advisory_snapshot;
    bool revised = false;
    std::vector<std::string> warnings;

    bool operator==(const Decision&) const = default;
};

struct ReflectionVerdict {
    bool requires_revision = false;
    std::string critique;
    std::optional<double> adjusted_confidence;
    bool triggered = false;  // confidence was strictly below threshold
    bool degraded = false;   // backend failed during a triggered reflection

    bool operator==(const ReflectionVerdict&) const = default;
};

struct ValidatedAnswers {
    std::vector<std::string> answers;
    std::vector<std::string> warnings;
};

// Case-insensitive match after cleaning; unmatched answers dropped; empty
// results fall back to "Not mentioned" (or the first option, with a warning).
ValidatedAnswers validate_answers(const std::vector<std::string>& raw_answers,
                                  const std::vector<std::string>& options);

// ---- trace records -------------------------------------------------------

struct TraceRecord {
    std::string encounter_id;
    std::string base_qid;
    std::string stage;
    nlohmann::json payload;
    std::int64_t timestamp = 0;
};

class TraceSink {
public:
    virtual ~TraceSink() = default;
    virtual void append(const TraceRecord& record) = 0;
};

class MemoryTraceSink : public TraceSink {
public:
    void append(const TraceRecord& record) override { records_.push_back(record); }
    const std::vector<TraceRecord>& records() const { return records_; }

private:
    std::vector<TraceRecord> records_;
};

class NullTraceSink : public TraceSink {
public:
    void append(const TraceRecord&) override {}
};

std::string trace_to_jsonl(const std::vector<TraceRecord>& records);

class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() = 0;
};

class SystemClock : public Clock {
public:
    std::int64_t now_ms() override;
};

// Stage counter starting at 0; keeps mock-mode traces byte-stable and
// schedule-independent.
class LogicalClock : public Clock {
public:
    std::int64_t now_ms() override { return next_++; }

private:
    std::int64_t next_ = 0;
};

// ---- decision stages -------------------------------------------------------

Decision reason(const QuestionDefinition& question, const std::vector<std::string>& options,
                const EvidenceBundle& evidence, const AdvisoryMap& advisory,
                ChatBackend& backend, const TemplateStore& templates,
                const GenerationParams& params);

// No backend call when confidence >= threshold ("falls below" is strict).
ReflectionVerdict reflect(const Decision& decision, const QuestionDefinition& question,
                          const EvidenceBundle& evidence, double threshold,
                          ChatBackend& backend, const TemplateStore& templates,
                          const GenerationParams& params);

// Single corrective pass; backend failure returns the prior decision with a
// degradation warning.
Decision reanalyze(const QuestionDefinition& question, const EvidenceBundle& evidence,
                   const Decision& prior, const std::string& critique, ChatBackend& backend,
                   const TemplateStore& templates, const GenerationParams& params);

struct DecisionLoopConfig {
    double threshold = 0.75;
};

struct LoopIdentity {
    std::string encounter_id;
    std::string base_qid;
};

// reason -> reflect -> (reanalyze if flagged); 1-3 backend calls total.
Decision run_decision_loop(const QuestionDefinition& question, const EvidenceBundle& evidence,
                           const AdvisoryMap& advisory, const DecisionLoopConfig& config,
                           ChatBackend& backend, const TemplateStore& templates,
                           const GenerationParams& params, const LoopIdentity& identity,
                           TraceSink& trace, Clock& clock);

}  // namespace dvqa
