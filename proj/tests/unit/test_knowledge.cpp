#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "dermavqa/agents.hpp"
#include "dermavqa/knowledge.hpp"
#include "support/fixtures.hpp"

using namespace dvqa;
using nlohmann::json;

namespace {

KnowledgeDocument doc(const std::string& id, const std::string& body,
                      const std::string& title = "") {
    return {id, title, body, "test"};
}

// Straight transcription of the Okapi formula, kept independent of
// KeywordIndex internals.
double oracle_bm25(const std::vector<std::string>& corpus_bodies,
                   const std::vector<std::string>& query_tokens, size_t doc_idx, double k1,
                   double b) {
    std::vector<std::vector<std::string>> tokenized;
    for (const auto& body : corpus_bodies) tokenized.push_back(tokenize(body));
    double n = static_cast<double>(corpus_bodies.size());
    double total_len = 0;
    for (const auto& tokens : tokenized) total_len += static_cast<double>(tokens.size());
    double avgdl = n > 0 ? total_len / n : 0.0;

    double score = 0.0;
    for (const auto& term : query_tokens) {
        double tf = 0;
        for (const auto& token : tokenized[doc_idx])
            if (token == term) ++tf;
        if (tf == 0) continue;
        double df = 0;
        for (const auto& tokens : tokenized)
            if (std::find(tokens.begin(), tokens.end(), term) != tokens.end()) ++df;
        double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
        double len_norm = avgdl > 0 ? tokenized[doc_idx].size() / avgdl : 0.0;
        score += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * len_norm));
    }
    return score;
}

}  // namespace

TEST_CASE("tokenize lowercases, splits and keeps length >= 2") {
    CHECK(tokenize("Eczema, common body-locations") ==
          std::vector<std::string>{"eczema", "common", "body", "locations"});
    CHECK(tokenize("") == std::vector<std::string>{});
    CHECK(tokenize("BM25Okapi scores TF/IDF") ==
          std::vector<std::string>{"bm25okapi", "scores", "tf", "idf"});
    CHECK(tokenize("a b c") == std::vector<std::string>{});  // single chars dropped
}

TEST_CASE("bm25 matches hand-computed Okapi values") {
    std::vector<KnowledgeDocument> docs = {doc("d0", "cat sat"), doc("d1", "cat cat ran"),
                                           doc("d2", "dog ran")};
    KeywordIndex index(docs, 1.5, 0.75);

    CHECK(index.score({"cat"}, "d0") == doctest::Approx(0.5022939549191067).epsilon(1e-9));
    CHECK(index.score({"cat"}, "d1") == doctest::Approx(0.6149580195738596).epsilon(1e-9));
    CHECK(index.score({"cat"}, "d2") == doctest::Approx(0.0));

    SUBCASE("absent query term contributes zero") {
        CHECK(index.score({"zebra"}, "d0") == 0.0);
    }
    SUBCASE("unknown doc id is a lookup error") {
        CHECK_THROWS_AS(index.score({"cat"}, "nope"), IntegrityError);
    }
}

TEST_CASE("idf stays positive when a term is in every doc") {
    // 2-doc corpus, term in both: idf = ln(1 + 0.5/2.5) > 0
    std::vector<KnowledgeDocument> docs = {doc("d0", "cat dog"), doc("d1", "cat bird")};
    KeywordIndex index(docs, 1.5, 0.75);
    double score = index.score({"cat"}, "d0");
    CHECK(score == doctest::Approx(0.1823215567939546).epsilon(1e-9));
    CHECK(score > 0.0);
}

TEST_CASE("bm25 equals the brute-force oracle on random corpora") {
    std::mt19937 rng(31);
    const std::vector<std::string> vocabulary = {"cat", "dog",  "rash", "red",  "itch",
                                                 "arm", "skin", "dry",  "scaly", "patch"};
    for (int trial = 0; trial < 10; ++trial) {
        size_t doc_count = 2 + rng() % 8;
        std::vector<std::string> bodies;
        std::vector<KnowledgeDocument> docs;
        for (size_t d = 0; d < doc_count; ++d) {
            std::string body;
            size_t words = 1 + rng() % 12;
            for (size_t w = 0; w < words; ++w)
                body += vocabulary[rng() % vocabulary.size()] + " ";
            bodies.push_back(body);
            docs.push_back(doc("doc" + std::to_string(d), body));
        }
        KeywordIndex index(docs, 1.5, 0.75);
        std::vector<std::string> query;
        size_t terms = 1 + rng() % 8;
        for (size_t t = 0; t < terms; ++t) query.push_back(vocabulary[rng() % vocabulary.size()]);
        for (size_t d = 0; d < doc_count; ++d) {
            double expected = oracle_bm25(bodies, query, d, 1.5, 0.75);
            double actual = index.score(query, "doc" + std::to_string(d));
            CHECK(std::abs(expected - actual) <= 1e-9);
        }
    }
}

namespace {

std::vector<float> unit_vec(int hot, float sign = 1.0f) {
    std::vector<float> v(kEmbeddingDim, 0.0f);
    v[hot] = sign;
    return v;
}

}  // namespace

TEST_CASE("dense_search is exact with doc-id tie-breaks") {
    std::vector<std::pair<std::string, std::vector<float>>> corpus = {
        {"a", unit_vec(0)}, {"b", unit_vec(1)}, {"c", unit_vec(0)}};

    SUBCASE("identity match scores 1.0 and ranks first") {
        auto hits = dense_search(unit_vec(1), corpus, 3);
        REQUIRE(hits.size() == 3);
        CHECK(hits[0].doc_id == "b");
        CHECK(hits[0].dense_score == doctest::Approx(1.0));
    }

    SUBCASE("orthogonal query scores 0.0") {
        auto hits = dense_search(unit_vec(2), corpus, 1);
        CHECK(hits[0].dense_score == doctest::Approx(0.0));
    }

    SUBCASE("equal scores break ties by ascending doc id") {
        auto hits = dense_search(unit_vec(0), corpus, 3);
        CHECK(hits[0].doc_id == "a");
        CHECK(hits[1].doc_id == "c");
        CHECK(hits[2].doc_id == "b");
    }

    SUBCASE("dimension mismatch is a shape error") {
        CHECK_THROWS_AS(dense_search(std::vector<float>(10, 0.1f), corpus, 1), ShapeError);
        std::vector<std::pair<std::string, std::vector<float>>> bad = {
            {"x", std::vector<float>(10, 0.1f)}};
        CHECK_THROWS_AS(dense_search(unit_vec(0), bad, 1), ShapeError);
    }
}

TEST_CASE("dense_search matches an exhaustive oracle on seeded vectors") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<std::pair<std::string, std::vector<float>>> corpus;
        size_t count = 5 + rng() % 20;
        for (size_t i = 0; i < count; ++i) {
            char id[8];
            std::snprintf(id, sizeof(id), "d%03zu", i);
            corpus.emplace_back(id, MockEmbeddingBackend::vector_for(rng(), id));
        }
        auto query = MockEmbeddingBackend::vector_for(rng(), "query");

        // oracle: full cosine sort with the same tie-break
        std::vector<std::pair<double, std::string>> oracle;
        for (const auto& [id, vec] : corpus) {
            double dot = 0, qn = 0, dn = 0;
            for (size_t k = 0; k < vec.size(); ++k) {
                dot += static_cast<double>(vec[k]) * query[k];
                qn += static_cast<double>(query[k]) * query[k];
                dn += static_cast<double>(vec[k]) * vec[k];
            }
            oracle.emplace_back(dot / std::sqrt(qn * dn), id);
        }
        std::sort(oracle.begin(), oracle.end(), [](const auto& x, const auto& y) {
            if (x.first != y.first) return x.first > y.first;
            return x.second < y.second;
        });

        auto hits = dense_search(query, corpus, static_cast<int>(count));
        REQUIRE(hits.size() == count);
        for (size_t i = 0; i < count; ++i) CHECK(hits[i].doc_id == oracle[i].second);

        auto top3 = dense_search(query, corpus, 3);
        REQUIRE(top3.size() == 3);
        for (size_t i = 0; i < 3; ++i) CHECK(top3[i].doc_id == oracle[i].second);
    }
}

TEST_CASE("ingest_knowledge_base") {
    fixtures::TempDir dir("kb");

    SUBCASE("800-row corpus loads completely") {
        auto path = dir / "big.jsonl";
        fixtures::write_knowledge_base(path, 788);  // 12 curated + 788 generated
        auto docs = ingest_knowledge_base(path);
        CHECK(docs.size() == 800);
    }

    SUBCASE("empty file yields an empty corpus") {
        auto path = dir / "empty.jsonl";
        write_text_file(path, "");
        CHECK(ingest_knowledge_base(path).empty());
    }

    SUBCASE("identical title+body rows collide on the derived id") {
        auto path = dir / "dup.jsonl";
        std::string line = json{{"title", "t"}, {"body", "same body"}}.dump();
        write_text_file(path, line + "\n" + line + "\n");
        CHECK_THROWS_AS(ingest_knowledge_base(path), IntegrityError);
    }

    SUBCASE("empty body rows are skipped with a warning") {
        auto path = dir / "skip.jsonl";
        write_text_file(path, json{{"id", "a"}, {"title", "t"}, {"body", "  "}}.dump() + "\n" +
                                  json{{"id", "b"}, {"title", "t"}, {"body", "ok"}}.dump() +
                                  "\n");
        auto docs = ingest_knowledge_base(path);
        REQUIRE(docs.size() == 1);
        CHECK(docs[0].doc_id == "b");
    }

    SUBCASE("csv layout with header") {
        auto path = dir / "kb.csv";
        write_text_file(path, "id,title,body,source\n"
                              "c1,Eczema,\"Itchy, dry patches\",aad\n"
                              "c2,Psoriasis,Scaly plaques,aad\n");
        auto docs = ingest_knowledge_base(path);
        REQUIRE(docs.size() == 2);
        CHECK(docs[0].body == "Itchy, dry patches");
    }
}

TEST_CASE("knowledge index hybrid search deduplicates by doc id") {
    std::vector<KnowledgeDocument> docs = {
        doc("a", "eczema affects hands and elbows", "Eczema"),
        doc("b", "psoriasis plaques on knees", "Psoriasis"),
        doc("c", "eczema locations include flexures", "Eczema sites"),
        doc("d", "acne on the face", "Acne"),
    };
    MockEmbeddingBackend embedder(7);
    auto index = KnowledgeIndex::build(docs, embedder, 1.5, 0.75);

    SUBCASE("no duplicate ids; origins recorded") {
        auto result = index.hybrid_search("eczema locations", 3, embedder);
        std::set<std::string> seen;
        for (const auto& candidate : result.candidates) {
            CHECK(seen.insert(candidate.doc_id).second);
        }
        CHECK_FALSE(result.dense_degraded);
        // dense channel always returns k_each hits here, so any keyword hit
        // present in both lists must carry origin=both
        bool any_both = false;
        for (const auto& candidate : result.candidates)
            if (candidate.origin == CandidateOrigin::Both) any_both = true;
        CHECK(any_both);
    }

    SUBCASE("embedding failure degrades to keyword-only") {
        embedder.fail_next(1);
        auto result = index.hybrid_search("eczema locations", 3, embedder);
        CHECK(result.dense_degraded);
        for (const auto& candidate : result.candidates)
            CHECK(candidate.origin == CandidateOrigin::Keyword);
        CHECK_FALSE(result.candidates.empty());
    }

    SUBCASE("save/load round trip preserves documents and vectors") {
        fixtures::TempDir dir("kbidx");
        index.save(dir.path());
        auto loaded = KnowledgeIndex::load(dir.path());
        CHECK(loaded.documents() == index.documents());
        REQUIRE(loaded.vectors().size() == index.vectors().size());
        for (size_t i = 0; i < index.vectors().size(); ++i) {
            CHECK(loaded.vectors()[i].first == index.vectors()[i].first);
            CHECK(loaded.vectors()[i].second == index.vectors()[i].second);
        }
        auto a = index.hybrid_search("eczema", 2, embedder);
        auto b = loaded.hybrid_search("eczema", 2, embedder);
        REQUIRE(a.candidates.size() == b.candidates.size());
        for (size_t i = 0; i < a.candidates.size(); ++i)
            CHECK(a.candidates[i].doc_id == b.candidates[i].doc_id);
    }
}

TEST_CASE("index build chunks embedding requests for large corpora") {
    fixtures::TempDir dir("kbbig");
    auto path = dir / "kb.jsonl";
    fixtures::write_knowledge_base(path, 138);  // 12 curated + 138 generated = 150 docs
    auto docs = ingest_knowledge_base(path);
    REQUIRE(docs.size() == 150);

    MockEmbeddingBackend embedder(3);
    auto index = KnowledgeIndex::build(docs, embedder, 1.5, 0.75);
    CHECK(index.vectors().size() == 150);
    CHECK(embedder.total_calls() == 3);  // ceil(150/64)
    // chunking must not change per-text vectors
    MockEmbeddingBackend fresh(3);
    CHECK(index.vectors()[149].second ==
          fresh.embed({docs[149].title + " " + docs[149].body})[0]);
}

TEST_CASE("rerank orders by cross-encoder score with fallback") {
    std::vector<KnowledgeDocument> docs = {
        doc("a", "red itchy rash on the arm"),
        doc("b", "blue sky and clouds"),
        doc("c", "rash somewhere on the arm"),
    };
    MockEmbeddingBackend embedder(7);
    MockScoringBackend scorer;
    auto index = KnowledgeIndex::build(docs, embedder, 1.5, 0.75);

    std::vector<RetrievalCandidate> candidates = {
        {"b", 3.0, 0, std::nullopt, CandidateOrigin::Keyword},
        {"a", 2.0, 0, std::nullopt, CandidateOrigin::Keyword},
        {"c", 1.0, 0, std::nullopt, CandidateOrigin::Keyword},
    };

    SUBCASE("ordering equals the token-overlap oracle") {
        auto result = index.rerank("red itchy rash arm", candidates, scorer, 3);
        REQUIRE(result.candidates.size() == 3);
        CHECK(result.candidates[0].doc_id == "a");  // 4/4 overlap
        CHECK(result.candidates[1].doc_id == "c");  // rash+arm
        CHECK(result.candidates[2].doc_id == "b");  // none
        for (const auto& candidate : result.candidates) CHECK(candidate.rerank_score.has_value());
        CHECK_FALSE(result.rerank_degraded);
    }

    SUBCASE("single candidate comes back unchanged with its score") {
        std::vector<RetrievalCandidate> one = {candidates[1]};
        auto result = index.rerank("red itchy rash arm", one, scorer, 3);
        REQUIRE(result.candidates.size() == 1);
        CHECK(result.candidates[0].doc_id == "a");
        CHECK(*result.candidates[0].rerank_score == doctest::Approx(1.0));
    }

    SUBCASE("top_k truncates") {
        auto result = index.rerank("red itchy rash arm", candidates, scorer, 2);
        CHECK(result.candidates.size() == 2);
    }

    SUBCASE("scorer failure falls back to keyword ordering") {
        scorer.fail_next(1);
        auto result = index.rerank("red itchy rash arm", candidates, scorer, 3);
        CHECK(result.rerank_degraded);
        CHECK(result.candidates[0].doc_id == "b");  // highest keyword score
        CHECK(result.candidates[1].doc_id == "a");
    }

    SUBCASE("empty candidate list violates the precondition") {
        CHECK_THROWS_AS(index.rerank("q", {}, scorer, 3), PreconditionError);
    }

    SUBCASE("rerank output is a permutation of its input truncated to top_k") {
        auto result = index.rerank("red itchy rash arm", candidates, scorer, 3);
        std::set<std::string> in, out;
        for (const auto& c : candidates) in.insert(c.doc_id);
        for (const auto& c : result.candidates) out.insert(c.doc_id);
        CHECK(in == out);
    }
}

TEST_CASE("should_retrieve gates image-dependent families") {
    RetrievalGateConfig config;
    config.known_families = {"CQID010", "CQID011", "CQID012", "CQID015", "CQID020",
                             "CQID025", "CQID034", "CQID035", "CQID036"};
    CHECK_FALSE(should_retrieve("Color", "CQID034", config));
    CHECK_FALSE(should_retrieve("Size", "CQID012", config));
    CHECK(should_retrieve("Site Location", "CQID011", config));
    CHECK(should_retrieve("?", "CQID999", config));  // unknown family defaults true
}

TEST_CASE("generate_queries") {
    TemplateStore templates{fixtures::repo_templates_dir()};
    GenerationParams params;
    QuestionDefinition question;
    question.qid = "CQID011-A";
    question.base_qid = "CQID011";
    question.question_text = "Where is the affected area?";
    question.options = {"head", "Not mentioned"};
    question.max_answers = 1;

    SUBCASE("scripted backend produces diagnosis-focused queries") {
        MockChatBackend mock;
        mock.set_default("query_generation",
                         R"({"queries":["eczema common body locations",
                             "dermatitis site distribution patterns"]})");
        auto result = generate_queries({"eczema", "dermatitis"}, question, mock, templates,
                                       params, 3);
        REQUIRE(result.queries.size() == 2);
        CHECK(result.queries[0] == "eczema common body locations");
        CHECK(result.queries[1] == "dermatitis site distribution patterns");
        CHECK_FALSE(result.degraded);
    }

    SUBCASE("empty diagnoses yield one question-derived query without a backend call") {
        MockChatBackend mock;
        auto result = generate_queries({}, question, mock, templates, params, 3);
        REQUIRE(result.queries.size() == 1);
        CHECK(result.queries[0].find("affected area") != std::string::npos);
        CHECK(mock.total_calls() == 0);
    }

    SUBCASE("max_queries truncates") {
        MockChatBackend mock;
        mock.set_default("query_generation", R"({"queries":["a b","c d","e f"]})");
        auto result = generate_queries({"eczema"}, question, mock, templates, params, 1);
        CHECK(result.queries.size() == 1);
    }

    SUBCASE("backend failure falls back to diagnosis + focus templates") {
        MockChatBackend mock;
        mock.add_failure({"query_generation", "", -1});
        auto result = generate_queries({"eczema", "dermatitis"}, question, mock, templates,
                                       params, 2);
        CHECK(result.degraded);
        REQUIRE(result.queries.size() == 2);
        CHECK(result.queries[0].find("eczema") == 0);
        CHECK(result.queries[0].find("affected area") != std::string::npos);
    }
}
