#include "support/fixtures.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>

#include "dermavqa/common.hpp"

namespace fixtures {

using nlohmann::json;

TempDir::TempDir(const std::string& label) {
    static std::atomic<unsigned> counter{0};
    auto root = std::filesystem::temp_directory_path() / "dvqa_tests";
    char name[128];
    std::snprintf(name, sizeof(name), "%s_%u_%u", label.c_str(),
                  static_cast<unsigned>(::getpid()), counter.fetch_add(1));
    path_ = root / name;
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

void write_jpeg(const std::filesystem::path& path) {
    static const unsigned char bytes[] = {0xFF, 0xD8, 0xFF, 0xE0, 0x00, 0x10, 'J',  'F',
                                          'I',  'F',  0x00, 0x01, 0x01, 0x00, 0x00, 0x01,
                                          0x00, 0x01, 0x00, 0x00, 0xFF, 0xD9};
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
}

void write_png(const std::filesystem::path& path) {
    static const unsigned char bytes[] = {0x89, 'P',  'N',  'G',  0x0D, 0x0A, 0x1A, 0x0A,
                                          0x00, 0x00, 0x00, 0x0D, 'I',  'H',  'D',  'R'};
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
}

namespace {

struct FamilySpec {
    const char* base;
    int slots;
    const char* question;
    std::vector<const char*> options;
    const char* type;
    const char* category;
};

const std::vector<FamilySpec>& family_specs() {
    static const std::vector<FamilySpec> specs = {
        {"CQID010", 1, "How much of the body is affected?",
         {"single spot", "limited area", "widespread", "Not mentioned"}, "Site Extent",
         "General"},
        {"CQID011", 8, "Where is the affected area?",
         {"head", "neck", "chest/abdomen", "back", "upper extremities", "lower extremities",
          "other (please specify)", "Not mentioned"},
         "Site Location", "General"},
        {"CQID012", 2,
         "How large are the affected areas? Please specify which affected area for each "
         "selection.",
         {"size of thumb nail", "size of palm", "larger area", "Not mentioned"}, "Size",
         "Skin Specific"},
        {"CQID015", 1, "When did the patient first notice the issue?",
         {"within days", "within weeks", "within months", "years or longer", "Not mentioned"},
         "Onset", "General"},
        {"CQID020", 6, "What label best describes the affected area?",
         {"raised or bumpy", "flat", "skin loss or sunken", "thick or raised",
          "thin or close to the surface", "warty", "crust", "scab", "weeping", "Not mentioned"},
         "Skin Description", "Skin Specific"},
        {"CQID025", 1, "Does the patient report itching?", {"Yes", "No", "Not mentioned"},
         "Symptom", "General"},
        {"CQID034", 6, "What color is the skin lesion?",
         {"red", "pink", "brown", "black", "white", "combination (please specify)",
          "Not mentioned"},
         "Color", "Skin Specific"},
        {"CQID035", 1, "How many skin lesions are there?",
         {"single", "multiple (please specify)", "Not mentioned"}, "Count", "Skin Specific"},
        {"CQID036", 1, "What is the texture of the skin lesion?",
         {"smooth", "rough", "Not mentioned"}, "Texture", "Skin Specific"},
    };
    return specs;
}

std::string slot_qid(const FamilySpec& family, int slot) {
    if (family.slots == 1) return std::string(family.base) + "-A";
    return std::string(family.base) + "-" + static_cast<char>('A' + slot);
}

int not_mentioned_index(const FamilySpec& family) {
    return static_cast<int>(family.options.size()) - 1;  // NM is always last above
}

// Deterministic pseudo-random but hand-checkable gold labels.
std::vector<std::vector<int>> gold_for(const FamilySpec& family, int encounter_index) {
    int nm = not_mentioned_index(family);
    int informative = nm;  // option count without NM
    std::vector<std::vector<int>> slots(family.slots, std::vector<int>{nm});

    bool all_not_mentioned = (encounter_index + std::string(family.base).back()) % 5 == 0;
    if (all_not_mentioned) return slots;

    int first = encounter_index % informative;
    slots[0] = {first};
    if (family.slots > 1 && encounter_index % 3 == 0) {
        int second = (first + 1) % informative;
        slots[1] = {second};
    }
    return slots;
}

}  // namespace

json synthetic_definitions_json() {
    json defs = json::array();
    for (const auto& family : family_specs()) {
        for (int slot = 0; slot < family.slots; ++slot) {
            json options = json::array();
            for (const char* option : family.options) options.push_back(option);
            defs.push_back(json{{"qid", slot_qid(family, slot)},
                                {"question_text", family.question},
                                {"options", options},
                                {"question_type", family.type},
                                {"question_category", family.category}});
        }
    }
    return defs;
}

std::vector<dvqa::QuestionDefinition> synthetic_definitions(
    const std::filesystem::path& scratch) {
    auto path = scratch / "definitions.json";
    dvqa::write_text_file(path, synthetic_definitions_json().dump(2));
    return dvqa::load_question_definitions(path);
}

SyntheticSplit write_synthetic_split(const std::filesystem::path& dir, const SplitSpec& spec) {
    SyntheticSplit split;
    split.data_dir = dir;
    split.images_dir = dir / "images";
    split.definitions_path = dir / "closedquestions_definitions_imageclef2025.json";
    split.split_name = spec.name;
    std::filesystem::create_directories(split.images_dir);

    dvqa::write_text_file(split.definitions_path, synthetic_definitions_json().dump(2));

    json encounters = json::array();
    json annotations = json::array();
    for (int i = 0; i < spec.encounters; ++i) {
        char id[16];
        std::snprintf(id, sizeof(id), "ENC%04d", i + 1);
        split.encounter_ids.push_back(id);

        json image_ids = json::array();
        for (int img = 0; img < spec.images_per_encounter; ++img) {
            std::string image_name = std::string(id) + "_img" + std::to_string(img) + ".jpg";
            write_jpeg(split.images_dir / image_name);
            image_ids.push_back(image_name);
        }

        std::string content =
            "Patient " + std::to_string(30 + i) +
            " years old reports a rash on the arm that appeared two weeks ago.";
        if (i % 2 == 1) content += " The area is unbearably itchy.";
        encounters.push_back(json{{"encounter_id", id},
                                  {"query_title", "What could this skin problem be?"},
                                  {"query_content", content},
                                  {"image_ids", image_ids}});

        if (spec.labeled) {
            json answers = json::object();
            for (const auto& family : family_specs()) {
                auto gold = gold_for(family, i);
                for (int slot = 0; slot < family.slots; ++slot)
                    answers[slot_qid(family, slot)] = gold[slot];
            }
            annotations.push_back(json{{"encounter_id", id}, {"answers", answers}});
        }
    }

    dvqa::write_text_file(dir / (spec.name + ".json"), encounters.dump(2));
    if (spec.labeled)
        dvqa::write_text_file(dir / (spec.name + "_cvqa.json"), annotations.dump(2));
    return split;
}

void write_knowledge_base(const std::filesystem::path& path, int extra_docs) {
    struct Doc {
        const char* id;
        const char* title;
        const char* body;
    };
    static const Doc docs[] = {
        {"kb001", "Eczema overview",
         "Eczema commonly affects the hands, inner elbows, and backs of knees. Patches are "
         "dry, itchy, and red, often flaring after irritant exposure."},
        {"kb002", "Contact dermatitis",
         "Contact dermatitis appears where the skin touched an irritant such as cement, "
         "solvents, or detergents. Distribution follows the exposure site, often the hands "
         "and forearms."},
        {"kb003", "Psoriasis plaques",
         "Psoriasis produces thick, raised, well-demarcated plaques with silvery scale, "
         "typically on extensor surfaces such as elbows and knees."},
        {"kb004", "Tinea corporis",
         "Tinea corporis forms annular scaly patches with central clearing on the trunk "
         "and limbs."},
        {"kb005", "Urticaria",
         "Urticaria presents as transient raised wheals that migrate within hours and are "
         "intensely itchy."},
        {"kb006", "Acne lesion types",
         "Acne involves comedones, papules, and pustules concentrated on the face, chest, "
         "and back."},
        {"kb007", "Seborrheic dermatitis",
         "Seborrheic dermatitis causes greasy yellow scale on the scalp, eyebrows, and "
         "nasolabial folds."},
        {"kb008", "Lichen planus",
         "Lichen planus shows violaceous flat-topped papules on wrists and ankles, often "
         "with fine white striae."},
        {"kb009", "Scabies distribution",
         "Scabies burrows favor finger webs, wrists, and the waistline, with severe "
         "nocturnal itching."},
        {"kb010", "Impetigo",
         "Impetigo forms honey-colored crusts on eroded lesions, most often around the "
         "nose and mouth of children."},
        {"kb011", "Dermatitis site patterns",
         "Dermatitis site distribution patterns depend on the trigger: atopic disease "
         "favors flexures while irritant reactions map to contact areas."},
        {"kb012", "Skin care after rashes",
         "After a rash resolves, gentle cleansing and fragrance-free emollients reduce "
         "recurrence risk."},
    };
    std::string out;
    for (const auto& doc : docs) {
        out += json{{"id", doc.id}, {"title", doc.title}, {"body", doc.body},
                    {"source", "aad"}}
                   .dump();
        out.push_back('\n');
    }
    for (int i = 0; i < extra_docs; ++i) {
        out += json{{"id", "gen" + std::to_string(i)},
                    {"title", "Generated entry " + std::to_string(i)},
                    {"body", "Synthetic dermatology reference text number " + std::to_string(i) +
                                 " covering condition care and prevention."},
                    {"source", "synthetic"}}
                   .dump();
        out.push_back('\n');
    }
    dvqa::write_text_file(path, out);
}

void write_chat_fixtures(const std::filesystem::path& path) {
    json rules = json::array();

    // low-confidence path with revision: 3 backend calls
    rules.push_back(json{
        {"stage", "reasoning"},
        {"contains", "ENC0003"},
        {"response",
         R"({"answers":["Not mentioned"],"confidence":0.4,"rationale":"uncertain between options"})"}});
    rules.push_back(json{
        {"stage", "reflection"},
        {"contains", "ENC0003"},
        {"response",
         R"({"requires_revision":true,"critique":"overlooked the reported itch","adjusted_confidence":0.35})"}});
    // low-confidence path without revision: 2 backend calls
    rules.push_back(json{
        {"stage", "reasoning"},
        {"contains", "ENC0004"},
        {"response",
         R"({"answers":["Not mentioned"],"confidence":0.6,"rationale":"weak visual signal"})"}});
    rules.push_back(json{
        {"stage", "reflection"},
        {"contains", "ENC0004"},
        {"response",
         R"({"requires_revision":false,"critique":"reasoning holds","adjusted_confidence":0.65})"}});

    // per-family answers keyed on the evidence bundle's question_family tag
    auto family_rule = [&](const char* family, const char* answer_json) {
        rules.push_back(json{{"stage", "reasoning"},
                             {"contains", std::string("\"question_family\":\"") + family + "\""},
                             {"response", answer_json}});
    };
    family_rule("CQID010",
                R"({"answers":["limited area"],"confidence":0.9,"rationale":"localized patch"})");
    family_rule("CQID011",
                R"({"answers":["upper extremities","lower extremities"],"confidence":0.85,"rationale":"arm and leg involvement"})");
    family_rule("CQID012",
                R"({"answers":["size of palm"],"confidence":0.88,"rationale":"palm-sized area"})");
    family_rule("CQID015",
                R"({"answers":["within weeks"],"confidence":0.9,"rationale":"two week history"})");
    family_rule("CQID020",
                R"({"answers":["raised or bumpy","crust"],"confidence":0.8,"rationale":"raised crusted papules"})");
    family_rule("CQID025",
                R"({"answers":["Yes"],"confidence":0.92,"rationale":"explicit itch report"})");
    family_rule("CQID034",
                R"({"answers":["red"],"confidence":0.9,"rationale":"uniform erythema"})");
    family_rule("CQID035",
                R"({"answers":["multiple"],"confidence":0.87,"rationale":"several discrete lesions"})");
    family_rule("CQID036",
                R"({"answers":["rough"],"confidence":0.82,"rationale":"scaly surface"})");

    json fixtures{
        {"defaults",
         {{"reanalysis",
           R"({"answers":["Yes"],"confidence":0.7,"rationale":"itch confirmed on reanalysis"})"}}},
        {"rules", rules}};
    dvqa::write_text_file(path, fixtures.dump(2));
}

void write_advisory_csv(const std::filesystem::path& path, const SyntheticSplit& split,
                        const std::string& model_name, int style) {
    std::string out = "encounter_id,base_qid,image_path,model_name,answers\n";
    int encounter_index = 0;
    for (const auto& encounter : split.encounter_ids) {
        for (const auto& family : family_specs()) {
            int informative = not_mentioned_index(family);
            int pick = (encounter_index + style) % informative;
            std::string answer = dvqa::clean_answer_text(family.options[pick]);
            std::string image = encounter + "_img0.jpg";
            if (answer.find(',') != std::string::npos) answer = "\"" + answer + "\"";
            out += encounter + "," + family.base + "," + image + "," + model_name + "," +
                   answer + "\n";
        }
        ++encounter_index;
    }
    dvqa::write_text_file(path, out);
}

json base_config(const std::filesystem::path& work_dir, const SyntheticSplit& split,
                 const std::filesystem::path& chat_fixtures,
                 const std::filesystem::path& knowledge_base) {
    json config{
        {"paths",
         {{"data_dir", split.data_dir.string()},
          {"definitions", split.definitions_path.string()},
          {"images_dir", split.images_dir.string()},
          {"knowledge_base", knowledge_base.string()},
          {"kb_index_dir", (work_dir / "kb_index").string()},
          {"batches_dir", (work_dir / "batches").string()},
          {"output_dir", (work_dir / "out").string()},
          {"templates_dir", repo_templates_dir().string()},
          {"advisory_predictions", json::array()}}},
        {"backends",
         {{"chat", {{"mode", "mock"}, {"fixtures", chat_fixtures.string()}}},
          {"embedding", {{"mode", "mock"}}},
          {"scorer", {{"mode", "mock"}}}}},
        {"reflection_threshold", 0.75},
        {"seed", 42},
        {"workers", 1},
        {"batch_size", 100},
        {"mock_backends", true}};
    return config;
}

std::filesystem::path write_config(const std::filesystem::path& file, const json& config) {
    dvqa::write_text_file(file, config.dump(2));
    return file;
}

std::filesystem::path repo_templates_dir() { return DVQA_REPO_TEMPLATES_DIR; }

}  // namespace fixtures
