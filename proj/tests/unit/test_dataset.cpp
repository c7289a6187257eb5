#include <doctest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "dermavqa/dataset.hpp"
#include "support/fixtures.hpp"

using namespace dvqa;
using nlohmann::json;

TEST_CASE("clean_answer_text strips the documented tokens") {
    CHECK(clean_answer_text("Combination (please specify)") == "Combination");
    CHECK(clean_answer_text("") == "");
    CHECK(clean_answer_text("['red']") == "red");
    CHECK(clean_answer_text("\"quoted\"") == "quoted");
    CHECK(clean_answer_text("  spaced   out  ") == "spaced out");
    CHECK(clean_answer_text("other (PLEASE SPECIFY)") == "other");
}

TEST_CASE("clean_answer_text is idempotent") {
    std::mt19937 rng(7);
    const std::vector<std::string> pieces = {"red",    "[",  "]",  "'",       "\"",
                                             "(please specify)", " ", "(please", "specify)",
                                             "Not mentioned",    "\t", "combo"};
    for (int trial = 0; trial < 500; ++trial) {
        std::string input;
        int chunks = static_cast<int>(rng() % 8);
        for (int i = 0; i < chunks; ++i) input += pieces[rng() % pieces.size()];
        std::string once = clean_answer_text(input);
        CHECK(clean_answer_text(once) == once);
    }
}

TEST_CASE("clean_question_text removes prefixes and instructional phrases") {
    CHECK(clean_question_text("12. Where is the affected area?") ==
          "Where is the affected area?");
    CHECK(clean_question_text("3) What color?") == "What color?");
    CHECK(clean_question_text("How large are the affected areas? Please specify which affected "
                              "area for each selection.") == "How large are the affected areas?");
    CHECK(clean_question_text("No prefix here") == "No prefix here");
}

TEST_CASE("load_question_definitions groups slot families") {
    fixtures::TempDir dir("defs");

    SUBCASE("six-slot family") {
        json defs = json::array();
        for (char slot = 'A'; slot <= 'F'; ++slot)
            defs.push_back(json{{"qid", std::string("CQID034-") + slot},
                                {"question_text", "What color is the skin lesion?"},
                                {"options", {"red", "pink", "Not mentioned"}},
                                {"question_type", "Color"},
                                {"question_category", "Skin Specific"}});
        auto path = dir / "defs.json";
        write_text_file(path, defs.dump());
        auto loaded = load_question_definitions(path);
        REQUIRE(loaded.size() == 6);
        for (const auto& def : loaded) {
            CHECK(def.base_qid == "CQID034");
            CHECK(def.max_answers == 6);
        }
        CHECK(loaded[0].slot_index == 0);
        CHECK(loaded[5].slot_index == 5);
        CHECK(family_base_qids(loaded) == std::vector<std::string>{"CQID034"});
    }

    SUBCASE("empty definitions") {
        auto path = dir / "empty.json";
        write_text_file(path, "[]");
        CHECK(load_question_definitions(path).empty());
    }

    SUBCASE("single-slot question") {
        auto path = dir / "single.json";
        write_text_file(path, json::array({json{{"qid", "CQID025-A"},
                                                {"question_text", "Itch?"},
                                                {"options", {"Yes", "No", "Not mentioned"}}}})
                                  .dump());
        auto loaded = load_question_definitions(path);
        REQUIRE(loaded.size() == 1);
        CHECK(loaded[0].max_answers == 1);
        CHECK(loaded[0].base_qid == "CQID025");
    }

    SUBCASE("duplicate qid is an integrity error") {
        json defs = json::array();
        for (int i = 0; i < 2; ++i)
            defs.push_back(json{{"qid", "CQID010-A"},
                                {"question_text", "Extent?"},
                                {"options", {"a", "b"}}});
        auto path = dir / "dup.json";
        write_text_file(path, defs.dump());
        CHECK_THROWS_AS(load_question_definitions(path), IntegrityError);
    }

    SUBCASE("missing options is a format error naming the field") {
        auto path = dir / "noopt.json";
        write_text_file(path,
                        json::array({json{{"qid", "CQID010-A"}, {"question_text", "Extent?"}}})
                            .dump());
        try {
            load_question_definitions(path);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("options") != std::string::npos);
        }
    }

    SUBCASE("family slots must agree on options") {
        json defs = json::array();
        defs.push_back(json{{"qid", "CQID034-A"},
                            {"question_text", "Color?"},
                            {"options", {"red", "pink"}}});
        defs.push_back(json{{"qid", "CQID034-B"},
                            {"question_text", "Color?"},
                            {"options", {"red", "blue"}}});
        auto path = dir / "mismatch.json";
        write_text_file(path, defs.dump());
        CHECK_THROWS_AS(load_question_definitions(path), IntegrityError);
    }

    SUBCASE("duplicate option after cleaning") {
        auto path = dir / "dupopt.json";
        write_text_file(path, json::array({json{{"qid", "CQID034-A"},
                                                {"question_text", "Color?"},
                                                {"options", {"red", "'red'"}}}})
                                  .dump());
        CHECK_THROWS_AS(load_question_definitions(path), IntegrityError);
    }
}

TEST_CASE("canonicalize_family_answers") {
    CHECK(canonicalize_family_answers({{"Not mentioned"}, {"Not mentioned"}}) == "Not mentioned");
    CHECK(canonicalize_family_answers(
              {{"upper extremities"}, {"Not mentioned"}, {"lower extremities"}}) ==
          "upper extremities, lower extremities");
    CHECK(canonicalize_family_answers({{"red"}, {"red"}}) == "red");
    CHECK(canonicalize_family_answers({{"red", "Not mentioned"}, {"pink"}}) == "red, pink");
}

TEST_CASE("canonicalize keeps Not mentioned iff it was the sole response everywhere") {
    std::mt19937 rng(11);
    const std::vector<std::string> pool = {"red", "pink", "brown", "Not mentioned"};
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::vector<std::string>> slots(1 + rng() % 5);
        bool all_sole_nm = true;
        for (auto& slot : slots) {
            int n = 1 + static_cast<int>(rng() % 2);
            for (int i = 0; i < n; ++i) slot.push_back(pool[rng() % pool.size()]);
            for (const auto& a : slot)
                if (a != "Not mentioned") all_sole_nm = false;
        }
        std::string result = canonicalize_family_answers(slots);
        bool has_nm = result.find("Not mentioned") != std::string::npos;
        CHECK(has_nm == all_sole_nm);
    }
}

namespace {

EncounterRecord enc00006_like() {
    EncounterRecord enc;
    enc.encounter_id = "ENC00006";
    enc.query_title = "Can everyone diagnose what this skin disease is?";
    enc.query_content =
        "The patient is a 50-year-old construction worker frequently exposed to cement "
        "hardener, with rashes on the chest and back which are unbearably itchy.";
    enc.image_ids = {"a.jpg"};
    return enc;
}

QuestionDefinition itch_question() {
    QuestionDefinition def;
    def.qid = "CQID025-A";
    def.base_qid = "CQID025";
    def.question_text = "Does the patient report itching?";
    def.options = {"Yes", "No", "Not mentioned"};
    def.question_type = "Symptom";
    def.question_category = "General";
    def.max_answers = 1;
    return def;
}

}  // namespace

TEST_CASE("synthesize_prompt carries background, metadata and options") {
    auto prompt = synthesize_prompt(itch_question(), enc00006_like());
    CHECK(prompt.find("unbearably itchy") != std::string::npos);
    CHECK(prompt.find("Options: Yes, No, Not mentioned") != std::string::npos);
    CHECK(prompt.find("Symptom") != std::string::npos);
    CHECK(prompt.find("General") != std::string::npos);
    CHECK(prompt.find("exact text") != std::string::npos);

    SUBCASE("empty encounter text leaves the background section empty") {
        EncounterRecord empty;
        empty.encounter_id = "X";
        empty.image_ids = {"a.jpg"};
        auto bare = synthesize_prompt(itch_question(), empty);
        CHECK(bare.find("Background:\n") != std::string::npos);
        CHECK(bare.find("Options: Yes, No, Not mentioned") != std::string::npos);
    }

    SUBCASE("instructional phrase is stripped from the question line") {
        QuestionDefinition size = itch_question();
        size.question_text = "How large are the affected areas? Please specify which affected "
                             "area for each selection.";
        auto cleaned = synthesize_prompt(size, enc00006_like());
        CHECK(cleaned.find("Please specify which affected area") == std::string::npos);
        CHECK(cleaned.find("How large are the affected areas?") != std::string::npos);
    }
}

TEST_CASE("validate_image checks magic headers") {
    fixtures::TempDir dir("img");

    auto jpeg = dir / "ok.jpg";
    fixtures::write_jpeg(jpeg);
    CHECK(validate_image(jpeg).valid);

    auto png = dir / "ok.png";
    fixtures::write_png(png);
    CHECK(validate_image(png).valid);

    auto missing = validate_image(dir / "absent.jpg");
    CHECK_FALSE(missing.valid);
    CHECK(missing.reason == "missing");

    auto fake = dir / "fake.jpg";
    write_text_file(fake, "this is not an image");
    auto corrupt = validate_image(fake);
    CHECK_FALSE(corrupt.valid);
    CHECK(corrupt.reason == "corrupt header");

    auto empty = dir / "empty.jpg";
    write_text_file(empty, "");
    CHECK(validate_image(empty).reason == "empty");
}

TEST_CASE("build_samples emits one row per image-question pair") {
    fixtures::TempDir dir("build");
    auto definitions = fixtures::synthetic_definitions(dir.path());
    auto families = family_base_qids(definitions);
    REQUIRE(families.size() == 9);

    EncounterRecord enc;
    enc.encounter_id = "ENC0001";
    enc.query_title = "title";
    enc.query_content = "content";
    for (int i = 0; i < 2; ++i) {
        auto img = dir / ("img" + std::to_string(i) + ".jpg");
        fixtures::write_jpeg(img);
        enc.image_ids.push_back(img.string());
    }

    SUBCASE("2 images x 9 families = 18 samples") {
        auto report = build_samples({enc}, {}, definitions);
        CHECK(report.samples.size() == 18);
        for (const auto& family : families) CHECK(report.samples_per_family.at(family) == 2);
        for (const auto& sample : report.samples) {
            CHECK_FALSE(sample.answer_text.has_value());
            CHECK(std::find(families.begin(), families.end(), sample.base_qid) !=
                  families.end());
        }
    }

    SUBCASE("duplicate image references collapse to one sample per triple") {
        EncounterRecord doubled = enc;
        doubled.image_ids.push_back(enc.image_ids[0]);
        auto report = build_samples({doubled}, {}, definitions);
        CHECK(report.samples.size() == 18);  // still 2 distinct images x 9 families
        CHECK_FALSE(report.warnings.empty());
    }

    SUBCASE("encounter with no valid images yields zero samples and a warning") {
        EncounterRecord broken;
        broken.encounter_id = "ENC0002";
        broken.image_ids = {(dir / "missing.jpg").string()};
        auto report = build_samples({broken}, {}, definitions);
        CHECK(report.samples.empty());
        REQUIRE(report.warnings.size() == 1);
        CHECK(report.warnings[0].find("ENC0002") != std::string::npos);
    }

    SUBCASE("annotation with unknown qid is an integrity error naming it") {
        AnnotationRecord ann;
        ann.encounter_id = "ENC0001";
        ann.answers["CQID999-A"] = {0};
        try {
            build_samples({enc}, {ann}, definitions);
            FAIL("expected IntegrityError");
        } catch (const IntegrityError& e) {
            CHECK(std::string(e.what()).find("CQID999-A") != std::string::npos);
        }
    }

    SUBCASE("annotation for unknown encounter fails fast") {
        AnnotationRecord ann;
        ann.encounter_id = "ENC9999";
        CHECK_THROWS_AS(build_samples({enc}, {ann}, definitions), IntegrityError);
    }

    SUBCASE("gold answers are exact members of the cleaned option list") {
        AnnotationRecord ann;
        ann.encounter_id = "ENC0001";
        for (const auto& def : definitions)
            if (def.base_qid == "CQID034") ann.answers[def.qid] = {def.slot_index % 2 ? 6 : 0};
        auto report = build_samples({enc}, {ann}, definitions);
        auto slots = family_slots(definitions, "CQID034");
        for (const auto& sample : report.samples) {
            if (sample.base_qid != "CQID034") continue;
            REQUIRE(sample.answer_text.has_value());
            for (const auto& token : split(*sample.answer_text, ',')) {
                auto cleaned = trim(token);
                CHECK(std::find(slots[0].options.begin(), slots[0].options.end(), cleaned) !=
                      slots[0].options.end());
            }
        }
    }

    SUBCASE("multi-slot Not mentioned handling flows through") {
        AnnotationRecord ann;
        ann.encounter_id = "ENC0001";
        auto slots = family_slots(definitions, "CQID034");
        int nm_index = static_cast<int>(slots[0].options.size()) - 1;
        for (const auto& def : slots) ann.answers[def.qid] = {nm_index};
        auto report = build_samples({enc}, {ann}, definitions);
        for (const auto& sample : report.samples)
            if (sample.base_qid == "CQID034") CHECK(*sample.answer_text == "Not mentioned");
    }
}

TEST_CASE("serialize_batches writes ceil(N/100) NDJSON files that round-trip") {
    fixtures::TempDir dir("batches");
    auto make_samples = [&](int n) {
        std::vector<Sample> samples;
        for (int i = 0; i < n; ++i) {
            Sample s;
            s.encounter_id = "ENC" + std::to_string(i / 9);
            s.base_qid = "CQID010";
            s.query_text = "prompt " + std::to_string(i);
            s.image_path = "img.jpg";
            if (i % 2 == 0) s.answer_text = "limited area";
            s.question_type = "Site Extent";
            s.question_category = "General";
            s.is_multilabel = false;
            samples.push_back(std::move(s));
        }
        return samples;
    };

    SUBCASE("250 samples -> 3 files of 100/100/50") {
        auto files = serialize_batches(make_samples(250), dir / "a");
        REQUIRE(files.size() == 3);
        CHECK(files[0].filename() == "batch_000.jsonl");
        CHECK(files[2].filename() == "batch_002.jsonl");
        CHECK(load_batch(files[0]).size() == 100);
        CHECK(load_batch(files[1]).size() == 100);
        CHECK(load_batch(files[2]).size() == 50);
    }

    SUBCASE("0 samples -> 0 files") {
        CHECK(serialize_batches({}, dir / "b").empty());
    }

    SUBCASE("100 samples -> 1 file, round-trip equality") {
        auto samples = make_samples(100);
        auto files = serialize_batches(samples, dir / "c");
        REQUIRE(files.size() == 1);
        CHECK(load_batches(dir / "c") == samples);
    }

    SUBCASE("rerun replaces stale batches") {
        serialize_batches(make_samples(250), dir / "d");
        serialize_batches(make_samples(50), dir / "d");
        CHECK(load_batches(dir / "d").size() == 50);
    }

    SUBCASE("serialization is byte-identical across runs") {
        auto samples = make_samples(120);
        serialize_batches(samples, dir / "e1");
        serialize_batches(samples, dir / "e2");
        CHECK(read_text_file(dir / "e1/batch_000.jsonl") ==
              read_text_file(dir / "e2/batch_000.jsonl"));
        CHECK(read_text_file(dir / "e1/batch_001.jsonl") ==
              read_text_file(dir / "e2/batch_001.jsonl"));
    }
}

TEST_CASE("loaders reject malformed challenge files loudly") {
    fixtures::TempDir dir("loaders");

    auto encounters_path = dir / "valid.json";
    write_text_file(encounters_path, R"([{"encounter_id":"E1"}])");
    CHECK_THROWS_AS(load_encounters(encounters_path), FormatError);

    write_text_file(encounters_path,
                    R"([{"encounter_id":"E1","image_ids":["a.jpg"]},{"encounter_id":"E1","image_ids":["b.jpg"]}])");
    CHECK_THROWS_AS(load_encounters(encounters_path), IntegrityError);

    auto ann_path = dir / "valid_cvqa.json";
    write_text_file(ann_path, R"([{"encounter_id":"E1"}])");
    CHECK_THROWS_AS(load_annotations(ann_path), FormatError);

    write_text_file(ann_path, R"([{"encounter_id":"E1","answers":{"CQID010-A":1}}])");
    auto annotations = load_annotations(ann_path);
    REQUIRE(annotations.size() == 1);
    CHECK(annotations[0].answers.at("CQID010-A") == std::vector<int>{1});

    CHECK_THROWS_AS(load_question_definitions(dir / "nope.json"), ConfigError);
}
