#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dermavqa/backends.hpp"
#include "dermavqa/common.hpp"
#include "dermavqa/dataset.hpp"

namespace dvqa {

struct KnowledgeDocument {
    std::string doc_id;
    std::string title;
    std::string body;
    std::string source_tag;

    bool operator==(const KnowledgeDocument&) const = default;
};

enum class CandidateOrigin { Keyword, Dense, Both };

struct RetrievalCandidate {
    std::string doc_id;
    double keyword_score = 0.0;
    double dense_score = 0.0;
    std::optional<double> rerank_score;
    CandidateOrigin origin = CandidateOrigin::Keyword;
};

// Okapi BM25 statistics over a tokenized corpus.
class KeywordIndex {
public:
    KeywordIndex() = default;
    explicit KeywordIndex(const std::vector<KnowledgeDocument>& docs,
                          double k1 = 1.5, double b = 0.75);

    // IDF(t) = ln((N - df + 0.5)/(df + 0.5) + 1); the +1 keeps IDF >= 0.
    double score(const std::vector<std::string>& query_tokens, const std::string& doc_id) const;
    std::vector<RetrievalCandidate> top_n(const std::vector<std::string>& query_tokens,
                                          int n) const;

    double k1() const { return k1_; }
    double b() const { return b_; }
    double average_doc_length() const { return avgdl_; }
    size_t corpus_size() const { return doc_ids_.size(); }

private:
    double k1_ = 1.5;
    double b_ = 0.75;
    double avgdl_ = 0.0;
    std::vector<std::string> doc_ids_;
    std::vector<std::map<std::string, int>> term_freqs_;
    std::vector<int> doc_lengths_;
    std::map<std::string, int> doc_freqs_;
    std::map<std::string, size_t> id_to_row_;
};

// lowercase, split on non-alphanumeric, keep tokens of length >= 2
std::vector<std::string> tokenize(std::string_view text);

// JSONL {id?, title, body, source} or CSV with an id,title,body,source header.
// Absent ids are assigned from a stable hash of title+body.
std::vector<KnowledgeDocument> ingest_knowledge_base(const std::filesystem::path& path);

// Exhaustive cosine scan. Ties broken by ascending doc_id. Vectors must be
// kEmbeddingDim wide.
std::vector<RetrievalCandidate> dense_search(
    const std::vector<float>& query_vec,
    const std::vector<std::pair<std::string, std::vector<float>>>& corpus_vecs, int k);

struct HybridResult {
    std::vector<RetrievalCandidate> candidates;
    bool dense_degraded = false;   // embedding backend failed; keyword-only
    bool rerank_degraded = false;  // scorer failed; keyword-score ordering
};

// Embedded corpus with both retrieval channels plus persistence. Immutable
// after build; queries are read-only.
class KnowledgeIndex {
public:
    KnowledgeIndex() = default;
    KnowledgeIndex(std::vector<KnowledgeDocument> docs,
                   std::vector<std::vector<float>> embeddings, double k1, double b);

    static KnowledgeIndex build(std::vector<KnowledgeDocument> docs,
                                EmbeddingBackend& embedder, double k1, double b);

    void save(const std::filesystem::path& dir) const;
    static KnowledgeIndex load(const std::filesystem::path& dir);

    // Top-k_each keyword and dense candidates, concatenated and deduplicated
    // by doc_id (max of each score type kept, origin=both).
    HybridResult hybrid_search(const std::string& query, int k_each,
                               EmbeddingBackend& embedder) const;

    // Joint (query, body) scoring; sorted by rerank score desc, doc_id asc,
    // truncated to top_k. Scorer failure falls back to keyword ordering.
    HybridResult rerank(const std::string& query, std::vector<RetrievalCandidate> candidates,
                        ScoringBackend& scorer, int top_k) const;

    const KnowledgeDocument& document(const std::string& doc_id) const;
    const std::vector<KnowledgeDocument>& documents() const { return docs_; }
    const KeywordIndex& keyword_index() const { return keyword_; }
    const std::vector<std::pair<std::string, std::vector<float>>>& vectors() const {
        return vectors_;
    }

private:
    std::vector<KnowledgeDocument> docs_;
    std::vector<std::pair<std::string, std::vector<float>>> vectors_;
    KeywordIndex keyword_;
    std::map<std::string, size_t> id_to_doc_;
    double k1_ = 1.5;
    double b_ = 0.75;
};

struct RetrievalGateConfig {
    std::vector<std::string> image_dependent_families = {"CQID034", "CQID012"};
    std::vector<std::string> known_families;  // for unknown-family warnings
};

// False for image-dependent families (color, size); true otherwise. Pure.
bool should_retrieve(const std::string& question_type, const std::string& base_qid,
                     const RetrievalGateConfig& config);

struct QueryGenerationResult {
    std::vector<std::string> queries;
    bool degraded = false;  // backend failed; template fallback used
};

class TemplateStore;  // agents.hpp

// <= max_queries search strings combining leading diagnoses with the
// question's clinical focus; empty diagnoses yield one question-only query.
QueryGenerationResult generate_queries(const std::vector<std::string>& diagnoses,
                                       const QuestionDefinition& question,
                                       ChatBackend& backend, const TemplateStore& templates,
                                       const GenerationParams& params, int max_queries);

}  // namespace dvqa
