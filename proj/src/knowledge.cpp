#include "dermavqa/knowledge.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "dermavqa/agents.hpp"
#include "dermavqa/csv.hpp"

namespace dvqa {

using nlohmann::json;

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&]() {
        if (current.size() >= 2) tokens.push_back(current);
        current.clear();
    };
    for (char c : text) {
        unsigned char uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc)) {
            current.push_back(static_cast<char>(std::tolower(uc)));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

namespace {

std::string indexed_text(const KnowledgeDocument& doc) {
    return doc.title.empty() ? doc.body : doc.title + " " + doc.body;
}

}  // namespace

KeywordIndex::KeywordIndex(const std::vector<KnowledgeDocument>& docs, double k1, double b)
    : k1_(k1), b_(b) {
    long total_len = 0;
    for (const auto& doc : docs) {
        auto tokens = tokenize(indexed_text(doc));
        std::map<std::string, int> freqs;
        for (const auto& t : tokens) ++freqs[t];
        for (const auto& [term, _] : freqs) ++doc_freqs_[term];
        id_to_row_[doc.doc_id] = doc_ids_.size();
        doc_ids_.push_back(doc.doc_id);
        term_freqs_.push_back(std::move(freqs));
        doc_lengths_.push_back(static_cast<int>(tokens.size()));
        total_len += static_cast<long>(tokens.size());
    }
    avgdl_ = doc_ids_.empty() ? 0.0 : static_cast<double>(total_len) / doc_ids_.size();
}

double KeywordIndex::score(const std::vector<std::string>& query_tokens,
                           const std::string& doc_id) const {
    auto it = id_to_row_.find(doc_id);
    if (it == id_to_row_.end())
        throw IntegrityError("bm25: unknown doc_id " + doc_id);
    size_t row = it->second;
    const auto& freqs = term_freqs_[row];
    double n = static_cast<double>(doc_ids_.size());
    double len_norm = avgdl_ > 0 ? doc_lengths_[row] / avgdl_ : 0.0;
    double total = 0.0;
    for (const auto& term : query_tokens) {
        auto tf_it = freqs.find(term);
        if (tf_it == freqs.end()) continue;
        double tf = tf_it->second;
        auto df_it = doc_freqs_.find(term);
        double df = df_it == doc_freqs_.end() ? 0.0 : df_it->second;
        double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
        total += idf * (tf * (k1_ + 1.0)) / (tf + k1_ * (1.0 - b_ + b_ * len_norm));
    }
    return total;
}

std::vector<RetrievalCandidate> KeywordIndex::top_n(const std::vector<std::string>& query_tokens,
                                                    int n) const {
    std::vector<RetrievalCandidate> scored;
    for (const auto& doc_id : doc_ids_) {
        double s = score(query_tokens, doc_id);
        if (s > 0.0) scored.push_back({doc_id, s, 0.0, std::nullopt, CandidateOrigin::Keyword});
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.keyword_score != b.keyword_score) return a.keyword_score > b.keyword_score;
        return a.doc_id < b.doc_id;
    });
    if (n >= 0 && scored.size() > static_cast<size_t>(n)) scored.resize(n);
    return scored;
}

std::vector<KnowledgeDocument> ingest_knowledge_base(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw ConfigError("knowledge base file not found: " + path.string());

    std::vector<KnowledgeDocument> docs;
    std::set<std::string> seen_ids;
    int skipped = 0;

    auto add_doc = [&](std::string id, std::string title, std::string body, std::string source,
                       const std::string& where) {
        body = trim(body);
        if (body.empty()) {
            ++skipped;
            log_warn("knowledge base: skipping record with empty body (" + where + ")");
            return;
        }
        if (id.empty()) id = hex64(fnv1a64(title + "\x1f" + body));
        if (!seen_ids.insert(id).second)
            throw IntegrityError("knowledge base: duplicate doc_id " + id + " (" + where + ")");
        docs.push_back({std::move(id), std::move(title), std::move(body), std::move(source)});
    };

    if (path.extension() == ".csv") {
        auto rows = csv::read_file(path);
        if (rows.empty()) {
            log_warn("knowledge base is empty: " + path.string());
            return docs;
        }
        const auto& header = rows.front();
        auto col = [&](const std::string& name) -> int {
            for (size_t i = 0; i < header.size(); ++i)
                if (to_lower(trim(header[i])) == name) return static_cast<int>(i);
            return -1;
        };
        int id_col = col("id"), title_col = col("title"), body_col = col("body"),
            source_col = col("source");
        if (body_col < 0)
            throw FormatError("knowledge base csv: missing \"body\" column in header");
        auto cell = [](const csv::Row& row, int idx) {
            return idx >= 0 && idx < static_cast<int>(row.size()) ? row[idx] : std::string();
        };
        for (size_t r = 1; r < rows.size(); ++r)
            add_doc(cell(rows[r], id_col), cell(rows[r], title_col), cell(rows[r], body_col),
                    cell(rows[r], source_col), "row " + std::to_string(r + 1));
    } else {
        auto lines = read_lines(path);
        size_t line_no = 0;
        for (const auto& line : lines) {
            ++line_no;
            if (trim(line).empty()) continue;
            json record = json::parse(line, nullptr, false);
            if (record.is_discarded() || !record.is_object())
                throw FormatError("knowledge base: invalid JSON on line " +
                                  std::to_string(line_no));
            add_doc(record.value("id", ""), record.value("title", ""),
                    record.value("body", ""), record.value("source", ""),
                    "line " + std::to_string(line_no));
        }
    }
    if (docs.empty()) log_warn("knowledge base is empty: " + path.string());
    return docs;
}

std::vector<RetrievalCandidate> dense_search(
    const std::vector<float>& query_vec,
    const std::vector<std::pair<std::string, std::vector<float>>>& corpus_vecs, int k) {
    if (query_vec.size() != static_cast<size_t>(kEmbeddingDim))
        throw ShapeError("dense_search: query vector must be " + std::to_string(kEmbeddingDim) +
                         "-dim, got " + std::to_string(query_vec.size()));
    double qnorm = 0.0;
    for (float x : query_vec) qnorm += static_cast<double>(x) * x;
    qnorm = std::sqrt(qnorm);

    std::vector<RetrievalCandidate> scored;
    scored.reserve(corpus_vecs.size());
    for (const auto& [doc_id, vec] : corpus_vecs) {
        if (vec.size() != static_cast<size_t>(kEmbeddingDim))
            throw ShapeError("dense_search: corpus vector for " + doc_id + " must be " +
                             std::to_string(kEmbeddingDim) + "-dim, got " +
                             std::to_string(vec.size()));
        double dot = 0.0, dnorm = 0.0;
        for (size_t i = 0; i < vec.size(); ++i) {
            dot += static_cast<double>(vec[i]) * query_vec[i];
            dnorm += static_cast<double>(vec[i]) * vec[i];
        }
        dnorm = std::sqrt(dnorm);
        double cosine = (qnorm > 0 && dnorm > 0) ? dot / (qnorm * dnorm) : 0.0;
        scored.push_back({doc_id, 0.0, cosine, std::nullopt, CandidateOrigin::Dense});
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.dense_score != b.dense_score) return a.dense_score > b.dense_score;
        return a.doc_id < b.doc_id;
    });
    if (k < 0) k = 0;
    if (scored.size() > static_cast<size_t>(k)) scored.resize(k);
    return scored;
}

KnowledgeIndex::KnowledgeIndex(std::vector<KnowledgeDocument> docs,
                               std::vector<std::vector<float>> embeddings, double k1, double b)
    : docs_(std::move(docs)), keyword_(docs_, k1, b), k1_(k1), b_(b) {
    if (embeddings.size() != docs_.size())
        throw ShapeError("knowledge index: embedding count != document count");
    for (size_t i = 0; i < docs_.size(); ++i) {
        vectors_.emplace_back(docs_[i].doc_id, std::move(embeddings[i]));
        id_to_doc_[docs_[i].doc_id] = i;
    }
}

KnowledgeIndex KnowledgeIndex::build(std::vector<KnowledgeDocument> docs,
                                     EmbeddingBackend& embedder, double k1, double b) {
    // chunked so live embedding services never see oversized payloads
    constexpr size_t kEmbedChunk = 64;
    std::vector<std::vector<float>> embeddings;
    embeddings.reserve(docs.size());
    for (size_t start = 0; start < docs.size(); start += kEmbedChunk) {
        size_t end = std::min(docs.size(), start + kEmbedChunk);
        std::vector<std::string> texts;
        texts.reserve(end - start);
        for (size_t i = start; i < end; ++i) texts.push_back(indexed_text(docs[i]));
        auto chunk = embedder.embed(texts);
        if (chunk.size() != texts.size())
            throw BackendError("embed returned " + std::to_string(chunk.size()) +
                               " vectors for " + std::to_string(texts.size()) + " texts");
        for (auto& vec : chunk) embeddings.push_back(std::move(vec));
    }
    return KnowledgeIndex(std::move(docs), std::move(embeddings), k1, b);
}

namespace {
constexpr int kIndexFormatVersion = 1;

void append_f32_le(std::string& out, float value) {
    static_assert(sizeof(float) == 4);
    std::uint32_t bits;
    std::memcpy(&bits, &value, 4);
    if constexpr (std::endian::native == std::endian::big) {
        bits = ((bits & 0xFF) << 24) | ((bits & 0xFF00) << 8) | ((bits >> 8) & 0xFF00) |
               (bits >> 24);
    }
    out.push_back(static_cast<char>(bits & 0xFF));
    out.push_back(static_cast<char>((bits >> 8) & 0xFF));
    out.push_back(static_cast<char>((bits >> 16) & 0xFF));
    out.push_back(static_cast<char>((bits >> 24) & 0xFF));
}

float read_f32_le(const unsigned char* p) {
    std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                         (static_cast<std::uint32_t>(p[1]) << 8) |
                         (static_cast<std::uint32_t>(p[2]) << 16) |
                         (static_cast<std::uint32_t>(p[3]) << 24);
    float value;
    std::memcpy(&value, &bits, 4);
    return value;
}
}  // namespace

void KnowledgeIndex::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);

    std::string docs_out;
    for (const auto& doc : docs_) {
        docs_out += json{{"id", doc.doc_id},
                         {"title", doc.title},
                         {"body", doc.body},
                         {"source", doc.source_tag}}
                        .dump();
        docs_out.push_back('\n');
    }
    write_text_file(dir / "docs.jsonl", docs_out);

    std::string matrix;
    matrix.reserve(vectors_.size() * kEmbeddingDim * 4);
    for (const auto& [_, vec] : vectors_)
        for (float x : vec) append_f32_le(matrix, x);
    write_text_file(dir / "embeddings.f32", matrix);

    json manifest{{"format_version", kIndexFormatVersion},
                  {"dim", kEmbeddingDim},
                  {"count", docs_.size()},
                  {"bm25_k1", k1_},
                  {"bm25_b", b_}};
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

KnowledgeIndex KnowledgeIndex::load(const std::filesystem::path& dir) {
    auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path))
        throw ConfigError("knowledge index not found (missing " + manifest_path.string() +
                          "); run build-kb first");
    json manifest = json::parse(read_text_file(manifest_path), nullptr, false);
    if (manifest.is_discarded())
        throw FormatError("knowledge index: invalid manifest JSON");
    if (manifest.value("format_version", -1) != kIndexFormatVersion)
        throw FormatError("knowledge index: unsupported format_version");
    if (manifest.value("dim", 0) != kEmbeddingDim)
        throw ShapeError("knowledge index: manifest dim != " + std::to_string(kEmbeddingDim));
    size_t count = manifest.value("count", size_t{0});
    double k1 = manifest.value("bm25_k1", 1.5);
    double b = manifest.value("bm25_b", 0.75);

    std::vector<KnowledgeDocument> docs;
    for (const auto& line : read_lines(dir / "docs.jsonl")) {
        if (trim(line).empty()) continue;
        json record = json::parse(line, nullptr, false);
        if (record.is_discarded())
            throw FormatError("knowledge index: invalid docs.jsonl line");
        docs.push_back({record.value("id", ""), record.value("title", ""),
                        record.value("body", ""), record.value("source", "")});
    }
    if (docs.size() != count)
        throw IntegrityError("knowledge index: manifest count != docs.jsonl rows");

    std::string matrix = read_text_file(dir / "embeddings.f32");
    if (matrix.size() != count * kEmbeddingDim * 4)
        throw ShapeError("knowledge index: embeddings.f32 size mismatch");
    std::vector<std::vector<float>> embeddings(count, std::vector<float>(kEmbeddingDim));
    const auto* bytes = reinterpret_cast<const unsigned char*>(matrix.data());
    for (size_t i = 0; i < count; ++i)
        for (int d = 0; d < kEmbeddingDim; ++d)
            embeddings[i][d] = read_f32_le(bytes + (i * kEmbeddingDim + d) * 4);

    return KnowledgeIndex(std::move(docs), std::move(embeddings), k1, b);
}

const KnowledgeDocument& KnowledgeIndex::document(const std::string& doc_id) const {
    auto it = id_to_doc_.find(doc_id);
    if (it == id_to_doc_.end())
        throw IntegrityError("knowledge index: unknown doc_id " + doc_id);
    return docs_[it->second];
}

HybridResult KnowledgeIndex::hybrid_search(const std::string& query, int k_each,
                                           EmbeddingBackend& embedder) const {
    HybridResult result;
    auto keyword_hits = keyword_.top_n(tokenize(query), k_each);

    std::vector<RetrievalCandidate> dense_hits;
    try {
        auto vecs = embedder.embed({query});
        if (vecs.size() != 1)
            throw BackendError("embed returned " + std::to_string(vecs.size()) + " vectors");
        dense_hits = dense_search(vecs[0], vectors_, k_each);
    } catch (const Error& e) {
        result.dense_degraded = true;
        log_warn(std::string("hybrid_search: dense channel degraded: ") + e.what());
    }

    result.candidates = std::move(keyword_hits);
    for (const auto& dense : dense_hits) {
        auto it = std::find_if(result.candidates.begin(), result.candidates.end(),
                               [&](const auto& c) { return c.doc_id == dense.doc_id; });
        if (it == result.candidates.end()) {
            result.candidates.push_back(dense);
        } else {
            it->dense_score = std::max(it->dense_score, dense.dense_score);
            it->origin = CandidateOrigin::Both;
        }
    }
    return result;
}

HybridResult KnowledgeIndex::rerank(const std::string& query,
                                    std::vector<RetrievalCandidate> candidates,
                                    ScoringBackend& scorer, int top_k) const {
    if (candidates.empty())
        throw PreconditionError("rerank: candidates must be non-empty");
    HybridResult result;
    std::vector<std::string> passages;
    passages.reserve(candidates.size());
    for (const auto& c : candidates) passages.push_back(document(c.doc_id).body);

    try {
        auto scores = scorer.score_pairs(query, passages);
        if (scores.size() != candidates.size())
            throw BackendError("scorer returned wrong score count");
        for (size_t i = 0; i < candidates.size(); ++i) candidates[i].rerank_score = scores[i];
        std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
            if (*a.rerank_score != *b.rerank_score) return *a.rerank_score > *b.rerank_score;
            return a.doc_id < b.doc_id;
        });
    } catch (const Error& e) {
        result.rerank_degraded = true;
        log_warn(std::string("rerank: scorer degraded, keyword ordering used: ") + e.what());
        for (auto& c : candidates) c.rerank_score = c.keyword_score;
        std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
            if (a.keyword_score != b.keyword_score) return a.keyword_score > b.keyword_score;
            return a.doc_id < b.doc_id;
        });
    }
    if (top_k >= 0 && candidates.size() > static_cast<size_t>(top_k)) candidates.resize(top_k);
    result.candidates = std::move(candidates);
    return result;
}

bool should_retrieve(const std::string& /*question_type*/, const std::string& base_qid,
                     const RetrievalGateConfig& config) {
    for (const auto& family : config.image_dependent_families)
        if (family == base_qid) return false;
    if (!config.known_families.empty() &&
        std::find(config.known_families.begin(), config.known_families.end(), base_qid) ==
            config.known_families.end()) {
        log_warn("should_retrieve: unknown question family " + base_qid +
                 "; defaulting to retrieval enabled");
    }
    return true;
}

namespace {

const std::set<std::string>& focus_stopwords() {
    static const std::set<std::string> words = {
        "the", "is",  "are", "was",  "what", "where", "when",  "how",  "an",  "of",
        "for", "to",  "in",  "on",   "does", "do",    "did",   "this", "that", "it",
        "please", "which", "each", "best", "describes", "many", "much"};
    return words;
}

std::string question_focus(const QuestionDefinition& question) {
    auto tokens = tokenize(clean_question_text(question.question_text));
    std::vector<std::string> kept;
    for (const auto& t : tokens)
        if (!focus_stopwords().count(t)) kept.push_back(t);
    if (kept.empty()) return clean_question_text(question.question_text);
    return join(kept, " ");
}

}  // namespace

QueryGenerationResult generate_queries(const std::vector<std::string>& diagnoses,
                                       const QuestionDefinition& question,
                                       ChatBackend& backend, const TemplateStore& templates,
                                       const GenerationParams& params, int max_queries) {
    if (max_queries < 1) max_queries = 1;
    QueryGenerationResult result;
    std::string focus = question_focus(question);

    if (diagnoses.empty()) {
        result.queries.push_back(focus);
        return result;
    }

    auto fallback = [&]() {
        result.queries.clear();
        for (const auto& diagnosis : diagnoses) {
            if (static_cast<int>(result.queries.size()) >= max_queries) break;
            result.queries.push_back(diagnosis + " " + focus);
        }
        result.degraded = true;
    };

    try {
        ChatRequest request;
        request.stage = "query_generation";
        request.params = params;
        request.messages = {
            {"system", templates.render("query_generation",
                                        {{"max_queries", std::to_string(max_queries)}})},
            {"user", "Question: " + clean_question_text(question.question_text) +
                         "\nClinical focus: " + focus +
                         "\nRanked diagnoses: " + join(diagnoses, ", ")}};
        auto parsed = parse_structured_response(backend.chat(request));
        std::vector<std::string> queries;
        for (const auto& q : parsed.value("queries", json::array()))
            if (q.is_string() && !trim(q.get<std::string>()).empty())
                queries.push_back(trim(q.get<std::string>()));
        if (queries.empty()) {
            fallback();
            return result;
        }
        if (static_cast<int>(queries.size()) > max_queries) queries.resize(max_queries);
        result.queries = std::move(queries);
    } catch (const Error&) {
        fallback();
    }
    return result;
}

}  // namespace dvqa
