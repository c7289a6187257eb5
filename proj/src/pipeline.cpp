#include "dermavqa/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "dermavqa/aggregation.hpp"
#include "dermavqa/agents.hpp"
#include "dermavqa/backends.hpp"
#include "dermavqa/csv.hpp"
#include "dermavqa/dataset.hpp"
#include "dermavqa/decision.hpp"
#include "dermavqa/evaluation.hpp"
#include "dermavqa/knowledge.hpp"

namespace dvqa {

using nlohmann::json;

Engine::Engine(PipelineConfig config) : config_(std::move(config)) { config_.validate(); }

std::filesystem::path Engine::split_json_path(const std::string& split) const {
    return std::filesystem::path(config_.paths.data_dir) / (split + ".json");
}

std::filesystem::path Engine::split_annotations_path(const std::string& split) const {
    return std::filesystem::path(config_.paths.data_dir) / (split + "_cvqa.json");
}

std::filesystem::path Engine::batches_dir(const std::string& split) const {
    return std::filesystem::path(config_.paths.batches_dir) / split;
}

std::filesystem::path Engine::output_dir(const std::string& split) const {
    return std::filesystem::path(config_.paths.output_dir) / split;
}

CommandOutput Engine::write_manifest(const std::filesystem::path& path,
                                     const std::string& command, json extra) const {
    json manifest{{"command", command},
                  {"version", kVersion},
                  {"config_hash", config_.config_hash()},
                  {"seed", config_.seed}};
    manifest.update(extra);
    write_text_file(path, manifest.dump(2) + "\n");
    return {manifest, path};
}

// ---- preprocess ------------------------------------------------------------

CommandOutput Engine::preprocess(const std::string& split) {
    auto definitions = load_question_definitions(config_.paths.definitions);
    auto encounters = load_encounters(split_json_path(split));

    std::vector<AnnotationRecord> annotations;
    auto annotations_path = split_annotations_path(split);
    if (std::filesystem::exists(annotations_path)) {
        annotations = load_annotations(annotations_path);
    } else {
        log_info("no annotations for split \"" + split + "\" (" + annotations_path.string() +
                 "); building unlabeled samples");
    }

    BuildReport report = build_samples(encounters, annotations, definitions,
                                       config_.paths.images_dir);
    auto dir = batches_dir(split);
    auto files = serialize_batches(report.samples, dir, config_.batch_size);

    json batch_names = json::array();
    for (const auto& file : files) batch_names.push_back(file.filename().string());
    json extra{{"split", split},
               {"encounters", encounters.size()},
               {"samples", report.samples.size()},
               {"samples_per_family", report.samples_per_family},
               {"batches", batch_names},
               {"batch_size", config_.batch_size},
               {"excluded_images", report.excluded_images},
               {"warnings", report.warnings},
               {"labeled", !annotations.empty()}};
    return write_manifest(dir / "manifest.json", "preprocess", extra);
}

// ---- build-kb ----------------------------------------------------------------

CommandOutput Engine::build_kb() {
    auto docs = ingest_knowledge_base(config_.paths.knowledge_base);
    auto embedder = make_embedding_backend(config_.embedding_backend, config_.seed);
    auto index = KnowledgeIndex::build(std::move(docs), *embedder, config_.retrieval.bm25_k1,
                                       config_.retrieval.bm25_b);
    std::filesystem::path dir = config_.paths.kb_index_dir;
    index.save(dir);

    json extra{{"documents", index.documents().size()},
               {"embedding_dim", kEmbeddingDim},
               {"bm25_k1", config_.retrieval.bm25_k1},
               {"bm25_b", config_.retrieval.bm25_b}};
    return write_manifest(dir / "build_manifest.json", "build-kb", extra);
}

// ---- run ----------------------------------------------------------------------

namespace {

struct RunTask {
    std::string encounter_id;
    std::string base_qid;
    std::vector<std::string> images;
};

struct TaskOutcome {
    Decision decision;
    std::vector<TraceRecord> trace;
    bool retrieved = false;
};

json trace_record_to_json(const TraceRecord& record) {
    return json{{"encounter_id", record.encounter_id},
                {"base_qid", record.base_qid},
                {"stage", record.stage},
                {"payload", record.payload},
                {"timestamp", record.timestamp}};
}

TraceRecord trace_record_from_json(const json& doc) {
    TraceRecord record;
    record.encounter_id = doc.value("encounter_id", "");
    record.base_qid = doc.value("base_qid", "");
    record.stage = doc.value("stage", "");
    record.payload = doc.value("payload", json::object());
    record.timestamp = doc.value("timestamp", std::int64_t{0});
    return record;
}

// Union of per-query reranked candidates, deduplicated by doc_id keeping the
// best rerank score, re-sorted and truncated to top_k.
void merge_candidates(std::vector<RetrievalCandidate>& merged,
                      const std::vector<RetrievalCandidate>& incoming) {
    for (const auto& candidate : incoming) {
        auto it = std::find_if(merged.begin(), merged.end(),
                               [&](const auto& c) { return c.doc_id == candidate.doc_id; });
        if (it == merged.end()) {
            merged.push_back(candidate);
        } else {
            it->keyword_score = std::max(it->keyword_score, candidate.keyword_score);
            it->dense_score = std::max(it->dense_score, candidate.dense_score);
            if (candidate.rerank_score &&
                (!it->rerank_score || *candidate.rerank_score > *it->rerank_score))
                it->rerank_score = candidate.rerank_score;
        }
    }
}

struct TaskContext {
    const PipelineConfig& config;
    const TemplateStore& templates;
    const std::map<std::string, QuestionDefinition>& lead_defs;
    const std::map<std::string, EncounterRecord>& encounters;
    const std::map<EncounterFamilyKey, AdvisoryMap>& advisory;
    const KnowledgeIndex* kb;
    const RetrievalGateConfig& gate;
    ChatBackend& chat;
    EmbeddingBackend& embedder;
    ScoringBackend& scorer;
    bool deterministic_clock;
};

TaskOutcome process_task(const RunTask& task, const TaskContext& ctx) {
    MemoryTraceSink sink;
    LogicalClock logical;
    SystemClock system;
    Clock& clock = ctx.deterministic_clock ? static_cast<Clock&>(logical)
                                           : static_cast<Clock&>(system);

    auto enc_it = ctx.encounters.find(task.encounter_id);
    if (enc_it == ctx.encounters.end())
        throw IntegrityError("run: batch sample references unknown encounter " +
                             task.encounter_id);
    const EncounterRecord& encounter = enc_it->second;
    const QuestionDefinition& lead = ctx.lead_defs.at(task.base_qid);
    const GenerationParams& params = ctx.config.generation;

    std::vector<ImageFindings> per_image;
    for (const auto& image : task.images) {
        ImageFindings findings = analyze_image(image, ctx.chat, ctx.templates, params);
        sink.append({task.encounter_id, task.base_qid, "image_analysis",
                     json{{"image", image},
                          {"findings", to_json(findings)},
                          {"warnings", findings.parse_warnings}},
                     clock.now_ms()});
        per_image.push_back(std::move(findings));
    }
    UnifiedFindings unified = aggregate_findings(per_image);

    ClinicalContext context = extract_clinical_context(
        encounter.query_title, encounter.query_content, ctx.chat, ctx.templates, params);
    sink.append({task.encounter_id, task.base_qid, "clinical_context",
                 json{{"context", to_json(context)}, {"warnings", context.parse_warnings}},
                 clock.now_ms()});

    TaskOutcome outcome;
    std::vector<std::string> passages;
    bool gate_open = should_retrieve(lead.question_type, task.base_qid, ctx.gate);
    if (gate_open && ctx.kb) {
        DiagnosisHypotheses hypotheses =
            extract_diagnoses(unified, context, ctx.chat, ctx.templates, params);
        sink.append({task.encounter_id, task.base_qid, "diagnosis_extraction",
                     json{{"hypotheses", hypotheses.names()}, {"degraded", hypotheses.degraded}},
                     clock.now_ms()});

        QueryGenerationResult queries =
            generate_queries(hypotheses.names(), lead, ctx.chat, ctx.templates, params,
                             ctx.config.retrieval.max_queries);

        std::vector<RetrievalCandidate> merged;
        bool dense_degraded = false;
        bool rerank_degraded = false;
        for (const auto& query : queries.queries) {
            HybridResult hybrid =
                ctx.kb->hybrid_search(query, ctx.config.retrieval.k_each, ctx.embedder);
            dense_degraded |= hybrid.dense_degraded;
            if (hybrid.candidates.empty()) continue;
            HybridResult reranked = ctx.kb->rerank(query, std::move(hybrid.candidates),
                                                   ctx.scorer, ctx.config.retrieval.top_k);
            rerank_degraded |= reranked.rerank_degraded;
            merge_candidates(merged, reranked.candidates);
        }
        std::sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) {
            double ra = a.rerank_score.value_or(0.0), rb = b.rerank_score.value_or(0.0);
            if (ra != rb) return ra > rb;
            return a.doc_id < b.doc_id;
        });
        if (merged.size() > static_cast<size_t>(ctx.config.retrieval.top_k))
            merged.resize(ctx.config.retrieval.top_k);

        json doc_ids = json::array();
        for (const auto& candidate : merged) {
            passages.push_back(ctx.kb->document(candidate.doc_id).body);
            doc_ids.push_back(candidate.doc_id);
        }
        outcome.retrieved = true;
        sink.append({task.encounter_id, task.base_qid, "retrieval",
                     json{{"queries", queries.queries},
                          {"query_generation_degraded", queries.degraded},
                          {"doc_ids", doc_ids},
                          {"dense_degraded", dense_degraded},
                          {"rerank_degraded", rerank_degraded}},
                     clock.now_ms()});
    }

    EvidenceBundle bundle = integrate_evidence(unified, context, passages, lead,
                                               ctx.config.weight_table, ctx.chat, ctx.templates,
                                               params);
    sink.append({task.encounter_id, task.base_qid, "evidence_integration",
                 json{{"weights",
                       {{"visual", bundle.weights.visual},
                        {"clinical", bundle.weights.clinical},
                        {"knowledge", bundle.weights.knowledge}}},
                      {"concordance_notes", bundle.concordance_notes},
                      {"passages", bundle.passages.size()},
                      {"warnings", bundle.warnings}},
                 clock.now_ms()});

    AdvisoryMap advisory;
    if (auto it = ctx.advisory.find({task.encounter_id, task.base_qid});
        it != ctx.advisory.end())
        advisory = it->second;

    DecisionLoopConfig loop_config{ctx.config.reflection_threshold};
    outcome.decision = run_decision_loop(lead, bundle, advisory, loop_config, ctx.chat,
                                         ctx.templates, params,
                                         {task.encounter_id, task.base_qid}, sink, clock);
    outcome.trace = sink.records();
    return outcome;
}

}  // namespace

CommandOutput Engine::run(const std::string& split) {
    auto definitions = load_question_definitions(config_.paths.definitions);
    auto families = family_base_qids(definitions);
    std::map<std::string, QuestionDefinition> lead_defs;
    for (const auto& family : families)
        lead_defs[family] = family_slots(definitions, family).front();

    auto samples = load_batches(batches_dir(split));
    if (samples.empty())
        throw ConfigError("run: no batches found in " + batches_dir(split).string() +
                          "; run preprocess first");

    std::map<std::string, EncounterRecord> encounters;
    for (auto& encounter : load_encounters(split_json_path(split)))
        encounters[encounter.encounter_id] = std::move(encounter);

    std::map<EncounterFamilyKey, AdvisoryMap> advisory;
    for (const auto& path : config_.paths.advisory_predictions) {
        for (const auto& record : read_prediction_csv(path)) {
            auto& answers = advisory[{record.encounter_id, record.base_qid}][record.model_name];
            for (const auto& answer : record.answers)
                if (std::find(answers.begin(), answers.end(), answer) == answers.end())
                    answers.push_back(answer);
        }
    }

    RetrievalGateConfig gate;
    gate.image_dependent_families = config_.retrieval.gated_families;
    gate.known_families = families;

    bool any_retrieval = std::any_of(families.begin(), families.end(), [&](const auto& f) {
        return should_retrieve(lead_defs.at(f).question_type, f, gate);
    });
    KnowledgeIndex kb;
    if (any_retrieval) kb = KnowledgeIndex::load(config_.paths.kb_index_dir);

    TemplateStore templates{std::filesystem::path(config_.paths.templates_dir)};
    auto chat = make_chat_backend(config_.chat_backend);
    auto embedder = make_embedding_backend(config_.embedding_backend, config_.seed);
    auto scorer = make_scoring_backend(config_.scorer_backend);

    // one task per (encounter, family), images joined across that pair's samples
    std::vector<RunTask> tasks;
    std::map<EncounterFamilyKey, size_t> task_index;
    for (const auto& sample : samples) {
        EncounterFamilyKey key{sample.encounter_id, sample.base_qid};
        if (!lead_defs.count(sample.base_qid))
            throw IntegrityError("run: batch sample references unknown family " +
                                 sample.base_qid);
        auto it = task_index.find(key);
        if (it == task_index.end()) {
            task_index[key] = tasks.size();
            tasks.push_back({sample.encounter_id, sample.base_qid, {sample.image_path}});
        } else {
            auto& images = tasks[it->second].images;
            if (std::find(images.begin(), images.end(), sample.image_path) == images.end())
                images.push_back(sample.image_path);
        }
    }

    auto out = output_dir(split);
    std::filesystem::create_directories(out);
    auto checkpoint_path = out / "checkpoint.jsonl";

    std::map<EncounterFamilyKey, TaskOutcome> outcomes;
    if (std::filesystem::exists(checkpoint_path)) {
        auto lines = read_lines(checkpoint_path);
        size_t last_content = lines.size();
        while (last_content > 0 && trim(lines[last_content - 1]).empty()) --last_content;
        std::string valid_lines;
        for (size_t line_no = 0; line_no < lines.size(); ++line_no) {
            const auto& line = lines[line_no];
            if (trim(line).empty()) continue;
            json doc = json::parse(line, nullptr, false);
            if (doc.is_discarded()) {
                // a kill mid-append leaves a truncated final record; that task
                // simply reruns
                if (line_no + 1 == last_content) {
                    log_warn("run: dropping truncated final checkpoint line in " +
                             checkpoint_path.string());
                    break;
                }
                throw FormatError("run: corrupt checkpoint line " +
                                  std::to_string(line_no + 1) + " in " +
                                  checkpoint_path.string());
            }
            valid_lines += line;
            valid_lines.push_back('\n');
            TaskOutcome outcome;
            outcome.decision.answers = doc.value("answers", std::vector<std::string>{});
            outcome.decision.confidence = doc.value("confidence", 0.0);
            outcome.decision.rationale = doc.value("rationale", "");
            outcome.decision.revised = doc.value("revised", false);
            outcome.decision.warnings = doc.value("warnings", std::vector<std::string>{});
            outcome.retrieved = doc.value("retrieved", false);
            for (const auto& record : doc.value("trace", json::array()))
                outcome.trace.push_back(trace_record_from_json(record));
            outcomes[{doc.value("encounter_id", ""), doc.value("base_qid", "")}] =
                std::move(outcome);
        }
        // rewrite so a dropped partial record or a missing trailing newline
        // cannot corrupt appended lines
        write_text_file(checkpoint_path, valid_lines);
        if (!outcomes.empty())
            log_info("run: resuming; " + std::to_string(outcomes.size()) +
                     " (encounter, family) pairs already checkpointed");
    }
    size_t resumed = outcomes.size();

    TaskContext ctx{config_,    templates, lead_defs, encounters, advisory,
                    any_retrieval ? &kb : nullptr,    gate,       *chat,
                    *embedder,  *scorer,   config_.chat_backend.mode == "mock"};

    std::vector<size_t> pending;
    for (size_t i = 0; i < tasks.size(); ++i)
        if (!outcomes.count({tasks[i].encounter_id, tasks[i].base_qid})) pending.push_back(i);

    std::mutex sink_mutex;
    std::ofstream checkpoint(checkpoint_path, std::ios::app);
    if (!checkpoint) throw IoError("cannot open checkpoint: " + checkpoint_path.string());

    auto record_outcome = [&](const RunTask& task, TaskOutcome outcome) {
        json trace = json::array();
        for (const auto& record : outcome.trace) trace.push_back(trace_record_to_json(record));
        json line{{"encounter_id", task.encounter_id},
                  {"base_qid", task.base_qid},
                  {"answers", outcome.decision.answers},
                  {"confidence", outcome.decision.confidence},
                  {"rationale", outcome.decision.rationale},
                  {"revised", outcome.decision.revised},
                  {"warnings", outcome.decision.warnings},
                  {"retrieved", outcome.retrieved},
                  {"trace", trace}};
        std::lock_guard<std::mutex> lock(sink_mutex);
        checkpoint << line.dump() << "\n";
        checkpoint.flush();
        outcomes[{task.encounter_id, task.base_qid}] = std::move(outcome);
    };

    int worker_count = std::max(1, std::min<int>(config_.workers,
                                                 static_cast<int>(pending.size())));
    if (worker_count <= 1) {
        for (size_t index : pending) record_outcome(tasks[index], process_task(tasks[index], ctx));
    } else {
        std::atomic<size_t> next{0};
        std::atomic<bool> failed{false};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto worker = [&]() {
            while (!failed.load()) {
                size_t slot = next.fetch_add(1);
                if (slot >= pending.size()) break;
                const RunTask& task = tasks[pending[slot]];
                try {
                    record_outcome(task, process_task(task, ctx));
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true);
                }
            }
        };
        std::vector<std::thread> threads;
        for (int i = 0; i < worker_count; ++i) threads.emplace_back(worker);
        for (auto& thread : threads) thread.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    // final outputs assembled from the full outcome map in task order, so
    // resumed and parallel runs emit identical bytes
    std::vector<PredictionRecord> predictions;
    std::string traces;
    size_t retrieval_tasks = 0;
    for (const auto& task : tasks) {
        const TaskOutcome& outcome = outcomes.at({task.encounter_id, task.base_qid});
        if (outcome.retrieved) ++retrieval_tasks;
        for (const auto& image : task.images)
            predictions.push_back({task.encounter_id, task.base_qid, image,
                                   outcome.decision.answers, kPipelineModelName});
        traces += trace_to_jsonl(outcome.trace);
    }
    auto predictions_path = out / "predictions.csv";
    write_prediction_csv(predictions_path, predictions);
    write_text_file(out / "traces.jsonl", traces);

    json extra{{"split", split},
               {"tasks", tasks.size()},
               {"resumed", resumed},
               {"decisions", tasks.size()},
               {"prediction_rows", predictions.size()},
               {"retrieval_tasks", retrieval_tasks},
               {"model_name", kPipelineModelName},
               {"workers", config_.workers}};
    return write_manifest(out / "run_manifest.json", "run", extra);
}

// ---- aggregate -----------------------------------------------------------------

CommandOutput Engine::aggregate(const std::string& split) {
    auto definitions = load_question_definitions(config_.paths.definitions);
    auto out = output_dir(split);
    auto records = read_prediction_csv(out / "predictions.csv");

    std::map<std::string, QuestionDefinition> lead_defs;
    std::map<std::string, std::vector<std::string>> slot_qids;
    for (const auto& family : family_base_qids(definitions)) {
        auto slots = family_slots(definitions, family);
        lead_defs[family] = slots.front();
        for (const auto& slot : slots) slot_qids[family].push_back(slot.qid);
    }

    std::vector<AggregatedAnswer> aggregated;
    for (auto& [key, group] : group_predictions(records)) {
        const auto& [encounter_id, base_qid] = key;
        auto lead_it = lead_defs.find(base_qid);
        if (lead_it == lead_defs.end())
            throw IntegrityError("aggregate: prediction references unknown family " + base_qid);
        const QuestionDefinition& lead = lead_it->second;

        auto answers = consolidate(group, lead.max_answers,
                                   make_seed(config_.seed, encounter_id, base_qid));
        auto indices = map_to_indices(answers, lead.options);

        int not_mentioned_index = 0;
        auto nm = std::find_if(lead.options.begin(), lead.options.end(), [](const auto& option) {
            return to_lower(option) == "not mentioned";
        });
        if (nm != lead.options.end()) {
            not_mentioned_index = static_cast<int>(nm - lead.options.begin());
        } else if (indices.size() < slot_qids[base_qid].size()) {
            log_warn("aggregate: family " + base_qid +
                     " has no \"Not mentioned\" option; unused slots fall back to index 0");
        }

        AggregatedAnswer agg;
        agg.encounter_id = encounter_id;
        agg.base_qid = base_qid;
        agg.answers = answers;
        agg.slot_indices = distribute_slots(indices, slot_qids[base_qid], not_mentioned_index);
        aggregated.push_back(std::move(agg));
    }

    auto files = emit_submission(aggregated, definitions, out);
    json extra{{"split", split},
               {"prediction_rows", records.size()},
               {"encounter_families", aggregated.size()},
               {"submission", files.json_path.filename().string()},
               {"detail_csv", files.csv_path.filename().string()},
               {"masks_dir", files.masks_dir.filename().string()}};
    return write_manifest(out / "aggregate_manifest.json", "aggregate", extra);
}

// ---- evaluate ------------------------------------------------------------------

CommandOutput Engine::evaluate(const std::string& split) {
    auto definitions = load_question_definitions(config_.paths.definitions);
    auto families = family_base_qids(definitions);
    auto out = output_dir(split);
    auto submission = load_submission(out / "submission.json");
    auto annotations = load_annotations(split_annotations_path(split));

    std::vector<FamilyScore> scores;
    SortedAlignmentPolicy policy;
    for (const auto& family : families) {
        std::vector<std::string> qids;
        for (const auto& slot : family_slots(definitions, family)) qids.push_back(slot.qid);

        FamilyPredictions predicted;
        for (const auto& [encounter, qid_indices] : submission) {
            std::vector<int> indices;
            for (const auto& qid : qids) {
                auto it = qid_indices.find(qid);
                if (it == qid_indices.end())
                    throw IntegrityError("evaluate: submission for " + encounter +
                                         " is missing slot " + qid);
                indices.push_back(it->second);
            }
            predicted[encounter] = std::move(indices);
        }

        FamilyPredictions gold;
        for (const auto& annotation : annotations) {
            std::vector<int> indices;
            bool any = false;
            for (const auto& qid : qids) {
                auto it = annotation.answers.find(qid);
                if (it == annotation.answers.end()) continue;
                any = true;
                indices.insert(indices.end(), it->second.begin(), it->second.end());
            }
            if (any) gold[annotation.encounter_id] = std::move(indices);
        }

        scores.push_back(score_family(predicted, gold, family, policy));
    }

    double average = average_accuracy(scores, families);
    auto scores_path = out / "scores.csv";
    write_scores_csv(scores_path, scores, average);

    json per_family = json::object();
    for (const auto& score : scores)
        per_family[score.base_qid] = json{{"accuracy", score.accuracy}, {"n", score.n}};
    json extra{{"split", split},
               {"scoring_policy", policy.name()},
               {"families", per_family},
               {"average_accuracy", average},
               {"scores_csv", scores_path.filename().string()}};
    return write_manifest(out / "evaluate_manifest.json", "evaluate", extra);
}

// ---- agreement ------------------------------------------------------------------

CommandOutput Engine::agreement(
    const std::vector<std::pair<std::string, std::string>>& submissions, bool include_gold,
    const std::string& split) {
    if (submissions.empty())
        throw ConfigError("agreement: at least one submission file is required");

    PredictionSets sets;
    for (const auto& [model, path] : submissions) {
        if (sets.count(model))
            throw ConfigError("agreement: duplicate model name \"" + model + "\"");
        for (const auto& [encounter, qid_indices] : load_submission(path))
            for (const auto& [qid, index] : qid_indices)
                sets[model][{encounter, qid}] = index;
    }
    if (include_gold) {
        for (const auto& annotation : load_annotations(split_annotations_path(split)))
            for (const auto& [qid, indices] : annotation.answers)
                if (!indices.empty())
                    sets["ground_truth"][{annotation.encounter_id, qid}] = indices.front();
    }

    AgreementMatrix matrix = agreement_matrix(sets);
    auto out = output_dir(split);
    std::filesystem::create_directories(out);
    auto agreement_path = out / "agreement.csv";
    write_agreement_csv(agreement_path, matrix);

    json extra{{"split", split},
               {"models", matrix.labels},
               {"include_gold", include_gold},
               {"agreement_csv", agreement_path.filename().string()}};
    return write_manifest(out / "agreement_manifest.json", "agreement", extra);
}

}  // namespace dvqa
